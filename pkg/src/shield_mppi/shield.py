"""Post-optimization safety repair of a control sequence.

The optimizer's soft barrier penalty discourages rollouts that violate the
discrete barrier condition h(x_{k+1}) >= alpha h(x_k), but the blended
output can still violate it. This module repairs the head of the output
sequence by gradient ascent on

  J(v) = sum_{k=0}^{N} min(h(x_{k+1}) - alpha h(x_k), 0),

the (non-positive) total violation over an N+1 step lookahead under the
nominal model. J = 0 exactly when the condition holds everywhere, so the
repair stops early once it gets there; otherwise it is best-effort within
the iteration cap. The tail of the sequence beyond step N is never
touched.

Gradients are central finite differences; the flat region of min(., 0)
naturally zeroes entries whose steps already satisfy the condition. The
ascent loop itself (`ascend`) is system-agnostic so its guarantees can be
checked on analytically tractable surrogates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from numba import njit

from .costs import CbfParams, barrier
from .dynamics import IX_EY, STATE_DIM, State, VehicleParams, step_array
from .track import Track


@dataclass(frozen=True)
class ShieldConfig:
    """Repair settings: lookahead length, iteration budget, step sizing.

    ``horizon`` counts repaired controls minus one (entries 0..horizon are
    ascended, so it must stay below the optimizer horizon). ``method``
    selects plain gradient ascent or a quasi-newton (BFGS) direction;
    backtracking line search makes accepted iterates non-decreasing in J.
    """

    horizon: int = 8
    iterations: int = 10
    step_size: float = 0.05
    fd_eps: float = 1e-5
    method: str = "gradient"
    line_search: bool = True
    max_halvings: int = 8

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not self.fd_eps > 0:
            raise ValueError(f"fd_eps must be positive, got {self.fd_eps}")
        if self.method not in ("gradient", "bfgs"):
            raise ValueError(f"method must be 'gradient' or 'bfgs', got {self.method!r}")
        if self.max_halvings < 0:
            raise ValueError(f"max_halvings must be >= 0, got {self.max_halvings}")


@njit(cache=True)
def _objective_kernel(p, cum_s, kappa_arr, total_length, half_width, alpha, x0, v):
    xa = x0.copy()
    xb = np.empty(STATE_DIM)
    total = 0.0
    h_prev = barrier(half_width, xa[IX_EY])
    for k in range(v.shape[0]):
        ok = step_array(
            p, cum_s, kappa_arr, total_length, half_width,
            xa, v[k, 0], v[k, 1], xb,
        )
        if not ok:
            return -np.inf
        h_curr = barrier(half_width, xb[IX_EY])
        r = h_curr - alpha * h_prev
        if r < 0.0:
            total += r
        h_prev = h_curr
        tmp = xa
        xa = xb
        xb = tmp
    return total


@njit(cache=True)
def _gradient_kernel(
    p, cum_s, kappa_arr, total_length, half_width, alpha, fd_eps, x0, v, out
):
    vt = v.copy()
    for k in range(v.shape[0]):
        for c in range(2):
            orig = vt[k, c]
            vt[k, c] = orig + fd_eps
            up = _objective_kernel(
                p, cum_s, kappa_arr, total_length, half_width, alpha, x0, vt
            )
            vt[k, c] = orig - fd_eps
            down = _objective_kernel(
                p, cum_s, kappa_arr, total_length, half_width, alpha, x0, vt
            )
            vt[k, c] = orig
            if math.isfinite(up) and math.isfinite(down):
                out[k, c] = (up - down) / (2.0 * fd_eps)
            else:
                out[k, c] = 0.0


def _as_state_array(x0: Union[State, np.ndarray]) -> np.ndarray:
    arr = x0.as_array() if isinstance(x0, State) else np.asarray(x0, dtype=float)
    if arr.shape != (STATE_DIM,):
        raise ValueError(f"x0 must have {STATE_DIM} entries, got shape {arr.shape}")
    return arr


def repair_objective(
    vehicle: VehicleParams,
    cbf: CbfParams,
    track: Track,
    x0: Union[State, np.ndarray],
    v: np.ndarray,
) -> float:
    """Total barrier-condition violation of the rollout of ``v`` from x0.

    Zero iff every step satisfies the condition; -inf if the model blows up.
    """
    v = np.ascontiguousarray(np.asarray(v, dtype=float))
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 1:
        raise ValueError(f"v must be (n, 2) with n >= 1, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("controls must be finite")
    return float(
        _objective_kernel(
            vehicle.as_array(), track.cum_arclength, track.curvature,
            track.total_length, track.half_width, cbf.alpha,
            _as_state_array(x0), v,
        )
    )


def repair_gradient(
    vehicle: VehicleParams,
    cbf: CbfParams,
    track: Track,
    x0: Union[State, np.ndarray],
    v: np.ndarray,
    fd_eps: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of `repair_objective` in the controls.

    Entries whose probes hit the sentinel (or sit in the flat satisfied
    region) come back 0.
    """
    v = np.ascontiguousarray(np.asarray(v, dtype=float))
    out = np.empty_like(v)
    _gradient_kernel(
        vehicle.as_array(), track.cum_arclength, track.curvature,
        track.total_length, track.half_width, cbf.alpha, float(fd_eps),
        _as_state_array(x0), v, out,
    )
    return out


def ascend(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    iterations: int,
    step_size: float,
    clamp: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    method: str = "gradient",
    line_search: bool = True,
    max_halvings: int = 8,
) -> Tuple[np.ndarray, List[float]]:
    """Maximize a non-positive objective by (quasi-)gradient ascent.

    Returns the final iterate and the accepted-objective trace (starting
    with the initial value). With line search enabled the trace is
    non-decreasing; without it, steps are taken blindly at ``step_size``.
    Stops early at objective 0, a zero direction, or a failed line search.
    """
    v = np.array(v0, dtype=float)
    if clamp is not None:
        v = clamp(v)
    j_cur = objective(v)
    trace = [j_cur]
    shape = v.shape
    n = v.size
    h_inv = np.eye(n)
    g_flat = None
    for _ in range(iterations):
        if j_cur == 0.0 or not math.isfinite(j_cur):
            break
        g_new = np.asarray(gradient(v), dtype=float).reshape(n)
        if method == "bfgs" and g_flat is not None:
            # Secant update on the minimization of -J: y uses -g deltas.
            s = v.reshape(n) - v_prev_flat
            y = -(g_new - g_flat)
            sy = float(s @ y)
            if sy > 1e-12:
                rho = 1.0 / sy
                outer = np.outer(s, y)
                h_inv = (
                    (np.eye(n) - rho * outer) @ h_inv @ (np.eye(n) - rho * outer.T)
                    + rho * np.outer(s, s)
                )
        g_flat = g_new
        v_prev_flat = v.reshape(n).copy()
        direction = (h_inv @ g_flat if method == "bfgs" else g_flat).reshape(shape)
        if not np.any(direction):
            break
        if line_search:
            step = step_size
            accepted = False
            for _ in range(max_halvings + 1):
                cand = v + step * direction
                if clamp is not None:
                    cand = clamp(cand)
                j_new = objective(cand)
                if math.isfinite(j_new) and j_new >= j_cur:
                    v, j_cur = cand, j_new
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        else:
            v = v + step_size * direction
            if clamp is not None:
                v = clamp(v)
            j_cur = objective(v)
        trace.append(j_cur)
    return v, trace


def clamp_sequence(vehicle: VehicleParams, v: np.ndarray) -> np.ndarray:
    """Clamp a control sequence to the vehicle's actuation bounds."""
    out = np.array(v, dtype=float)
    np.clip(out[:, 0], -vehicle.delta_max, vehicle.delta_max, out=out[:, 0])
    np.clip(out[:, 1], vehicle.throttle_min, vehicle.throttle_max, out=out[:, 1])
    return out


def repair(
    config: ShieldConfig,
    vehicle: VehicleParams,
    cbf: CbfParams,
    track: Track,
    x0: Union[State, np.ndarray],
    v_plus: np.ndarray,
) -> np.ndarray:
    """Ascend the first ``horizon``+1 controls toward zero violation.

    Best-effort: the sequence comes back unchanged when the budget is
    zero, the objective is already zero, or the initial rollout hits the
    blow-up sentinel. Entries past the repaired head are bit-identical to
    the input.
    """
    v_plus = np.asarray(v_plus, dtype=float)
    head_len = config.horizon + 1
    if v_plus.ndim != 2 or v_plus.shape[1] != 2 or v_plus.shape[0] < head_len:
        raise ValueError(
            f"v_plus must be (K, 2) with K >= {head_len}, got shape {v_plus.shape}"
        )
    out = v_plus.copy()
    if config.iterations == 0:
        return out
    x0_arr = _as_state_array(x0)
    head = out[:head_len]
    if not math.isfinite(repair_objective(vehicle, cbf, track, x0_arr, head)):
        return out

    def objective(v):
        return repair_objective(vehicle, cbf, track, x0_arr, v)

    def gradient(v):
        return repair_gradient(vehicle, cbf, track, x0_arr, v, fd_eps=config.fd_eps)

    repaired, _ = ascend(
        objective, gradient, head,
        iterations=config.iterations,
        step_size=config.step_size,
        clamp=lambda v: clamp_sequence(vehicle, v),
        method=config.method,
        line_search=config.line_search,
        max_halvings=config.max_halvings,
    )
    out[:head_len] = repaired
    return out
