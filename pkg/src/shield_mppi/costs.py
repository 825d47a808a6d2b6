"""Scalar cost machinery: barrier function, barrier-condition penalty,
state running/terminal costs, collision indicator, and per-trajectory
accumulation.

The barrier h(x) = half_width^2 - e_y^2 is non-negative exactly on the safe
set (vehicle inside the track). The one-step condition
h(x_k) - alpha * h(x_{k-1}) >= 0 bounds how fast h may decay; its violation
is penalized in rollout costs, which is the first shield layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from numba import njit

from .dynamics import IX_EY, IX_VX, STATE_DIM, AugmentedState, State
from .track import Track

StateLike = Union[State, np.ndarray]


@dataclass(frozen=True)
class CbfParams:
    """Barrier-condition parameters: decay factor alpha in (0,1) and the
    violation penalty weight (cost per unit violation)."""

    alpha: float = 0.95
    weight: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.weight < 0.0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha


@dataclass(frozen=True)
class CostParams:
    """State-cost weights and optimizer temperature.

    q_diag are diagonal quadratic weights over the 8 state slots; the target
    state is zero except the longitudinal-velocity slot, which is
    target_speed. collision_penalty is added for any off-track state.
    control_cost_scale multiplies the v^T Sigma^-1 u term accumulated during
    rollouts; it defaults to the temperature.
    """

    q_diag: np.ndarray = field(default_factory=lambda: np.zeros(STATE_DIM))
    target_speed: float = 5.0
    collision_penalty: float = 1.0e4
    temperature: float = 10.0
    control_cost_scale: float = -1.0  # sentinel: follow temperature

    def __post_init__(self):
        q = np.ascontiguousarray(np.asarray(self.q_diag, dtype=float))
        if q.shape != (STATE_DIM,):
            raise ValueError(f"q_diag must have shape ({STATE_DIM},), got {q.shape}")
        if np.any(q < 0):
            raise ValueError("q_diag entries must be >= 0")
        if self.collision_penalty < 0:
            raise ValueError("collision_penalty must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        object.__setattr__(self, "q_diag", q)
        if self.control_cost_scale < 0:
            object.__setattr__(self, "control_cost_scale", float(self.temperature))
        q.setflags(write=False)

    def target_state(self) -> np.ndarray:
        xg = np.zeros(STATE_DIM)
        xg[IX_VX] = self.target_speed
        return xg


@njit(cache=True)
def barrier(half_width, e_y):
    """h = half_width^2 - e_y^2; >= 0 iff the state is inside the track."""
    return half_width * half_width - e_y * e_y


@njit(cache=True)
def residual(alpha, h_curr, h_prev):
    """One-step barrier-condition residual; >= 0 means the condition holds."""
    return h_curr - alpha * h_prev


@njit(cache=True)
def penalty(weight, alpha, h_curr, h_prev):
    """weight * max(-h_curr + alpha * h_prev, 0); zero when the condition holds."""
    violation = -h_curr + alpha * h_prev
    if violation > 0.0:
        return weight * violation
    return 0.0


@njit(cache=True)
def state_cost(q_diag, target_speed, collision_penalty, half_width, x):
    """(x - x_g)^T Q (x - x_g) plus the off-track collision indicator."""
    acc = 0.0
    for i in range(STATE_DIM):
        d = x[i] - (target_speed if i == IX_VX else 0.0)
        acc += q_diag[i] * d * d
    e_y = x[IX_EY]
    if e_y > half_width or e_y < -half_width:
        acc += collision_penalty
    return acc


def _state_array(x: StateLike) -> np.ndarray:
    if isinstance(x, State):
        return x.as_array()
    return np.asarray(x, dtype=float)


def h(track: Union[Track, float], x: StateLike) -> float:
    """Barrier value of a state (or raw state vector) on a track.

    Accepts the track itself or just its half-width.
    """
    half_width = track.half_width if isinstance(track, Track) else float(track)
    return float(barrier(half_width, _state_array(x)[IX_EY]))


def dcbf_residual(cbf: CbfParams, h_curr: float, h_prev: float) -> float:
    return float(residual(cbf.alpha, h_curr, h_prev))


def cbf_penalty(cbf: CbfParams, z: AugmentedState, half_width: float) -> float:
    return float(
        penalty(
            cbf.weight,
            cbf.alpha,
            barrier(half_width, z.current.e_y),
            barrier(half_width, z.previous.e_y),
        )
    )


def running_cost(cp: CostParams, track: Track, x: StateLike) -> float:
    return float(
        state_cost(
            cp.q_diag, cp.target_speed, cp.collision_penalty,
            track.half_width, _state_array(x),
        )
    )


def terminal_cost(cp: CostParams, track: Track, x: StateLike) -> float:
    """Terminal cost: same quadratic-plus-indicator form as the running cost."""
    return running_cost(cp, track, x)


@njit(cache=True)
def control_cost_term(sigma_inv, v_k, u_k):
    """v_k^T Sigma_eps^-1 u_k for one step (2-dimensional controls)."""
    a = sigma_inv[0, 0] * u_k[0] + sigma_inv[0, 1] * u_k[1]
    b = sigma_inv[1, 0] * u_k[0] + sigma_inv[1, 1] * u_k[1]
    return v_k[0] * a + v_k[1] * b


@njit(cache=True)
def trajectory_cost_array(
    q_diag, target_speed, collision_penalty, gamma, sigma_inv,
    cbf_weight, cbf_alpha, cbf_enabled, half_width, states, v, u, prev0_ey,
):
    """Accumulate the rollout cost over states (K+1, 8) and controls (K, 2).

    Sum over k < K of state cost + gamma * v^T Sigma^-1 u + barrier penalty,
    plus the terminal state cost and terminal barrier penalty. prev0_ey is
    the lateral deviation of the step-0 predecessor (equal to the initial
    state's during rollouts, so the k = 0 penalty only fires off-track).
    """
    K = v.shape[0]
    total = 0.0
    h_prev = barrier(half_width, prev0_ey)
    for k in range(K):
        h_curr = barrier(half_width, states[k, IX_EY])
        total += state_cost(q_diag, target_speed, collision_penalty, half_width, states[k])
        total += gamma * control_cost_term(sigma_inv, v[k], u[k])
        if cbf_enabled:
            total += penalty(cbf_weight, cbf_alpha, h_curr, h_prev)
        h_prev = h_curr
    h_curr = barrier(half_width, states[K, IX_EY])
    total += state_cost(q_diag, target_speed, collision_penalty, half_width, states[K])
    if cbf_enabled:
        total += penalty(cbf_weight, cbf_alpha, h_curr, h_prev)
    return total


def trajectory_cost(
    cp: CostParams,
    cbf: CbfParams,
    track: Track,
    rollout: Sequence[Tuple[AugmentedState, np.ndarray, np.ndarray]],
    sigma_eps_inv: np.ndarray,
    cbf_enabled: bool = True,
) -> float:
    """Cost of one rollout given (augmented state, mean control, executed
    control) triples: K + 1 entries, the final one terminal (its controls
    are ignored and may be None).
    """
    if len(rollout) < 2:
        raise ValueError("rollout needs at least one running step plus the terminal entry")
    K = len(rollout) - 1
    states = np.empty((K + 1, STATE_DIM))
    v = np.empty((K, 2))
    u = np.empty((K, 2))
    for k, (z, v_k, u_k) in enumerate(rollout):
        states[k] = z.current.as_array()
        if k < K:
            if v_k is None or u_k is None:
                raise ValueError(f"step {k}: running entries need both controls")
            v[k] = np.asarray(v_k, dtype=float)
            u[k] = np.asarray(u_k, dtype=float)
    return float(
        trajectory_cost_array(
            cp.q_diag, cp.target_speed, cp.collision_penalty,
            cp.control_cost_scale, np.ascontiguousarray(sigma_eps_inv, dtype=float),
            cbf.weight, cbf.alpha, cbf_enabled, track.half_width, states, v, u,
            rollout[0][0].previous.e_y,
        )
    )
