"""Sampling-based trajectory optimizer with barrier-penalized rollouts.

Each control step draws M control-noise sequences, rolls every candidate
out through the nominal vehicle model, scores the rollouts with the
barrier-augmented cost, and blends the noise by exponentiated-cost
weights:

  u_k^m  = clamp(v_k + eps_k^m)
  w^m    = exp(-(S^m - min_m S^m) / temperature)
  v_k^+  = clamp(v_k + sum_m w^m eps_k^m / sum_m w^m)

Noise is counter-based: the draws for rollout m at control step
``iteration`` depend only on (seed, iteration, m), never on how rollouts
are scheduled across threads, so batches are bit-identical for any worker
count. Streams are SplitMix64 with Box-Muller shaping and a Cholesky
factor correlating the two control channels per step.

Rollouts that push the model into non-finite territory are kept in the
batch with a +inf sentinel cost; they then carry zero weight. Only a
batch with no finite cost at all raises OptimizerError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import numba
from numba import njit, prange

from .costs import CbfParams, CostParams, trajectory_cost_array
from .dynamics import (
    CONTROL_DIM,
    IX_EY,
    STATE_DIM,
    State,
    VehicleParams,
    clamp_control,
    step_array,
)
from .track import Track

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U53 = 1.0 / 9007199254740992.0  # 2**-53, maps the top 53 bits onto [0, 1)
_TWO_PI = 2.0 * math.pi


class OptimizerError(RuntimeError):
    """No rollout produced a finite cost (or the weight mass vanished)."""


@dataclass(frozen=True)
class MppiConfig:
    """Optimizer settings.

    ``noise_cov`` is the 2x2 sampling covariance over (steering, throttle);
    its Cholesky factor and inverse are derived once here. ``temperature``
    sets how selective the exponentiated-cost weighting is.
    ``cbf_cost_enabled`` switches the soft barrier penalty inside rollout
    scoring; ``no_shift`` makes warm starting reuse the sequence verbatim
    instead of shifting it one step.
    """

    samples: int = 50
    horizon: int = 75
    noise_cov: np.ndarray = field(
        default_factory=lambda: np.array([[0.0025, 0.0], [0.0, 0.01]])
    )
    temperature: float = 10.0
    seed: int = 0
    cbf_cost_enabled: bool = True
    no_shift: bool = False
    noise_chol: np.ndarray = field(init=False, repr=False, compare=False)
    noise_cov_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if int(self.horizon) < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0 <= int(self.seed) < 2**63:
            raise ValueError(f"seed must be in [0, 2**63), got {self.seed}")
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "seed", int(self.seed))
        cov = np.array(self.noise_cov, dtype=float, order="C")
        if cov.shape != (CONTROL_DIM, CONTROL_DIM):
            raise ValueError(f"noise_cov must be 2x2, got shape {cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ValueError("noise_cov must be finite")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, float(np.abs(cov).max())):
            raise ValueError("noise_cov must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("noise_cov must be positive definite") from None
        inv = np.linalg.inv(cov)
        for name, arr in (
            ("noise_cov", cov),
            ("noise_chol", np.ascontiguousarray(chol)),
            ("noise_cov_inv", np.ascontiguousarray(inv)),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class RolloutBatch:
    """One batch of scored rollouts.

    ``trajectories`` is populated (samples, horizon+1, 8) only when the
    caller asked for it; rows after a blown-up step repeat the non-finite
    state that triggered the +inf sentinel.
    """

    noises: np.ndarray
    costs: np.ndarray
    trajectories: Optional[np.ndarray] = None


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX_A
    z = (z ^ (z >> _S27)) * _MIX_B
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _stream_state(seed, iteration, m):
    h = _mix64(np.uint64(seed) + _GOLDEN)
    h = _mix64(h + np.uint64(iteration) * _GOLDEN)
    return _mix64(h + np.uint64(m) * _GOLDEN)


@njit(cache=True)
def _fill_sample_noise(seed, iteration, m, chol, out):
    """Fill (K, 2) noise for one rollout from its private counter stream."""
    state = _stream_state(seed, iteration, m)
    l00 = chol[0, 0]
    l10 = chol[1, 0]
    l11 = chol[1, 1]
    for k in range(out.shape[0]):
        state = state + _GOLDEN
        u1 = 1.0 - (_mix64(state) >> _S11) * _U53  # (0, 1], keeps log finite
        state = state + _GOLDEN
        u2 = (_mix64(state) >> _S11) * _U53
        r = math.sqrt(-2.0 * math.log(u1))
        z0 = r * math.cos(_TWO_PI * u2)
        z1 = r * math.sin(_TWO_PI * u2)
        out[k, 0] = l00 * z0
        out[k, 1] = l10 * z0 + l11 * z1


@njit(cache=True, parallel=True)
def _noise_kernel(seed, iteration, chol, out):
    for m in prange(out.shape[0]):
        _fill_sample_noise(seed, iteration, m, chol, out[m])


@njit(cache=True, parallel=True)
def _rollout_kernel(
    seed, iteration, chol, gen_noise, p, cum_s, kappa_arr, total_length,
    half_width, q_diag, target_speed, collision_penalty, gamma, sigma_inv,
    cbf_weight, cbf_alpha, cbf_enabled, x0, v, noises, costs, states_buf,
):
    M = noises.shape[0]
    K = noises.shape[1]
    for m in prange(M):
        if gen_noise:
            _fill_sample_noise(seed, iteration, m, chol, noises[m])
        states = states_buf[m]
        u = np.empty((K, CONTROL_DIM))
        for k in range(K):
            d, t = clamp_control(
                p, v[k, 0] + noises[m, k, 0], v[k, 1] + noises[m, k, 1]
            )
            u[k, 0] = d
            u[k, 1] = t
        for i in range(STATE_DIM):
            states[0, i] = x0[i]
        ok = True
        for k in range(K):
            ok = step_array(
                p, cum_s, kappa_arr, total_length, half_width,
                states[k], u[k, 0], u[k, 1], states[k + 1],
            )
            if not ok:
                for j in range(k + 1, K):
                    for i in range(STATE_DIM):
                        states[j + 1, i] = states[k + 1, i]
                break
        if ok:
            costs[m] = trajectory_cost_array(
                q_diag, target_speed, collision_penalty, gamma, sigma_inv,
                cbf_weight, cbf_alpha, cbf_enabled, half_width,
                states, v, u, x0[IX_EY],
            )
        else:
            costs[m] = np.inf


def sample_noise(config: MppiConfig, iteration: int = 0) -> np.ndarray:
    """Draw the (samples, horizon, 2) noise batch for one control step.

    The stream for rollout m is keyed by (seed, iteration, m), so the same
    triple always reproduces the same draws regardless of batch layout or
    thread count.
    """
    iteration = int(iteration)
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    out = np.empty((config.samples, config.horizon, CONTROL_DIM))
    _noise_kernel(config.seed, iteration, config.noise_chol, out)
    return out


def rollout_batch(
    config: MppiConfig,
    vehicle: VehicleParams,
    cost_params: CostParams,
    cbf_params: CbfParams,
    track: Track,
    x0: Union[State, np.ndarray],
    v: np.ndarray,
    iteration: int = 0,
    noises: Optional[np.ndarray] = None,
    store_trajectories: bool = False,
    workers: Optional[int] = None,
) -> RolloutBatch:
    """Roll out and score every noisy variant of the mean sequence ``v``.

    Controls are clamped after noise is added, so the costed and simulated
    controls agree. Pass ``noises`` to bypass generation (oracle tests and
    contrived batches); pass ``workers`` to pin the thread count, which
    never changes the result thanks to per-rollout streams and per-rollout
    output slices.
    """
    x0_arr = x0.as_array() if isinstance(x0, State) else np.asarray(x0, dtype=float)
    if x0_arr.shape != (STATE_DIM,):
        raise ValueError(f"x0 must have {STATE_DIM} entries, got shape {x0_arr.shape}")
    if not np.all(np.isfinite(x0_arr)):
        raise ValueError("x0 must be finite")
    v = np.ascontiguousarray(np.asarray(v, dtype=float))
    if v.shape != (config.horizon, CONTROL_DIM):
        raise ValueError(
            f"v must have shape ({config.horizon}, {CONTROL_DIM}), got {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("control sequence must be finite")

    M, K = config.samples, config.horizon
    if noises is None:
        noise_arr = np.empty((M, K, CONTROL_DIM))
        gen_noise = True
    else:
        noise_arr = np.ascontiguousarray(np.asarray(noises, dtype=float))
        if noise_arr.shape != (M, K, CONTROL_DIM):
            raise ValueError(
                f"noises must have shape ({M}, {K}, {CONTROL_DIM}), "
                f"got {noise_arr.shape}"
            )
        if not np.all(np.isfinite(noise_arr)):
            raise ValueError("injected noises must be finite")
        gen_noise = False

    costs = np.empty(M)
    states_buf = np.empty((M, K + 1, STATE_DIM))
    previous_threads = numba.get_num_threads()
    if workers is not None:
        numba.set_num_threads(min(max(1, int(workers)), numba.config.NUMBA_NUM_THREADS))
    try:
        _rollout_kernel(
            config.seed, int(iteration), config.noise_chol, gen_noise,
            vehicle.as_array(), track.cum_arclength, track.curvature,
            track.total_length, track.half_width,
            cost_params.q_diag, cost_params.target_speed,
            cost_params.collision_penalty, cost_params.control_cost_scale,
            config.noise_cov_inv, cbf_params.weight, cbf_params.alpha,
            config.cbf_cost_enabled, x0_arr, v, noise_arr, costs, states_buf,
        )
    finally:
        if workers is not None:
            numba.set_num_threads(previous_threads)
    return RolloutBatch(
        noises=noise_arr,
        costs=costs,
        trajectories=states_buf if store_trajectories else None,
    )


def weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    """Exponentiated-cost rollout weights with min-subtraction.

    Returns the unnormalized weights; +inf sentinel costs map to exactly 0.
    Raises OptimizerError when no cost is finite.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError(f"costs must be a non-empty 1-d array, got shape {costs.shape}")
    if np.isnan(costs).any():
        raise ValueError("costs must not contain NaN")
    lowest = float(np.min(costs))
    if not math.isfinite(lowest):
        raise OptimizerError("every rollout diverged; no finite cost to weight")
    return np.exp(-(costs - lowest) / float(temperature))


def update_controls(
    v: np.ndarray,
    noises: np.ndarray,
    w: np.ndarray,
    vehicle: VehicleParams,
) -> np.ndarray:
    """Blend the noise by normalized weights and clamp to control bounds.

    The reductions run in fixed array order (single-threaded numpy), so the
    update is reproducible independent of how the rollouts were computed.
    """
    v = np.asarray(v, dtype=float)
    noises = np.asarray(noises, dtype=float)
    w = np.asarray(w, dtype=float)
    if noises.shape != (w.shape[0],) + v.shape:
        raise ValueError(
            f"shape mismatch: noises {noises.shape}, weights {w.shape}, v {v.shape}"
        )
    w_sum = float(np.sum(w))
    if not math.isfinite(w_sum) or w_sum <= 0.0:
        raise OptimizerError(f"weight mass is not positive ({w_sum})")
    v_plus = v + np.einsum("m,mkc->kc", w, noises) / w_sum
    np.clip(v_plus[:, 0], -vehicle.delta_max, vehicle.delta_max, out=v_plus[:, 0])
    np.clip(v_plus[:, 1], vehicle.throttle_min, vehicle.throttle_max, out=v_plus[:, 1])
    return v_plus


def warm_start(v_plus: np.ndarray, no_shift: bool = False) -> np.ndarray:
    """Seed the next control step: shift one step, duplicating the last entry.

    ``no_shift`` reuses the sequence verbatim (the literal single-shot
    update rule, kept for fidelity checks).
    """
    v_plus = np.asarray(v_plus, dtype=float)
    out = v_plus.copy()
    if not no_shift and out.shape[0] > 1:
        out[:-1] = v_plus[1:]
        out[-1] = v_plus[-1]
    return out
