"""Discrete-time single-track vehicle model in curvilinear track coordinates.

State (8): [v_x, v_y, psi_dot, omega_F, omega_R, e_psi, e_y, s]
Control (2): [delta (steering angle, rad), T (throttle, braking negative)]

Model, integrated with explicit Euler at ``dt`` (RK4 optional):

  slip angles     alpha_f = delta - atan((v_y + l_f psi_dot) / v_eff)
                  alpha_r = -atan((v_y - l_r psi_dot) / v_eff)
  lateral tires   F_yf = C_f alpha_f,  F_yr = C_r alpha_r          (linear)
  slip ratios     sigma_i = (r_w omega_i - v_x) / v_eff
  long. tires     F_xi = C_long sigma_i                            (linear)
  wheels          I_w domega_F = -r_w F_xf
                  I_w domega_R = tau_drive - r_w F_xr,  tau_drive = gain T
  body            m (dv_x - v_y psi_dot) = F_xf cos d - F_yf sin d + F_xr - F_res
                  m (dv_y + v_x psi_dot) = F_yf cos d + F_xf sin d + F_yr
                  I_z dpsi_dot = l_f (F_yf cos d + F_xf sin d) - l_r F_yr
  resistance      F_res = c_roll v_x + c_drag v_x |v_x|   (vanishes at rest)
  curvilinear     ds     = (v_x cos e_psi - v_y sin e_psi) / (1 - kappa e_y)
                  de_psi = psi_dot - kappa ds
                  de_y   = v_x sin e_psi + v_y cos e_psi

with v_eff = max(|v_x|, V_EFF_MIN) guarding the low-speed singularity and
the (1 - kappa e_y) denominator clamped to magnitude >= 0.1 (states that
deep off-track are already boundary contacts).

Boundary contact: when |e_y| exceeds the track half-width, all speeds decay
by exp(-berm_decel * depth * dt) per step, modelling the soft berm that
scrubs speed on a scrape and drags a deep excursion to a stop. e_psi is
wrapped to [-pi, pi) after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np
from numba import njit

from .track import Track

# Guard for slip-angle/slip-ratio denominators. 1.0 m/s keeps explicit Euler
# stable at dt = 0.02 with the shipped cornering stiffnesses (the lateral
# eigenvalue scales as (C_f + C_r) / (m * v_eff)).
V_EFF_MIN = 1.0

# Denominator floor for the curvilinear projection 1 - kappa * e_y.
PROJECTION_FLOOR = 0.1

STATE_DIM = 8
CONTROL_DIM = 2

# Indices into the flat state vector.
IX_VX, IX_VY, IX_PSIDOT, IX_OMEGA_F, IX_OMEGA_R, IX_EPSI, IX_EY, IX_S = range(8)

# Indices into the flat parameter vector (see VehicleParams.as_array).
(
    P_MASS,
    P_IZ,
    P_LF,
    P_LR,
    P_RW,
    P_IW,
    P_CF,
    P_CR,
    P_CLONG,
    P_DRIVE,
    P_CROLL,
    P_CDRAG,
    P_DT,
    P_DELTA_MAX,
    P_TMIN,
    P_TMAX,
    P_BERM,
    P_RK4,
) = range(18)

PARAM_DIM = 18

_PARAM_FILE_KEYS = (
    "mass",
    "yaw_inertia",
    "lf",
    "lr",
    "wheel_radius",
    "wheel_inertia",
    "corner_stiff_front",
    "corner_stiff_rear",
    "long_stiff",
    "drive_gain",
    "roll_resist",
    "drag_coeff",
    "dt",
    "delta_max",
    "throttle_min",
    "throttle_max",
    "berm_decel",
)


class DynamicsError(RuntimeError):
    """Model produced a non-finite state; carries the offending output."""

    def __init__(self, message: str, state: np.ndarray):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class State:
    """Vehicle state in curvilinear coordinates."""

    v_x: float = 0.0
    v_y: float = 0.0
    psi_dot: float = 0.0
    omega_F: float = 0.0
    omega_R: float = 0.0
    e_psi: float = 0.0
    e_y: float = 0.0
    s: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.v_x, self.v_y, self.psi_dot, self.omega_F, self.omega_R,
             self.e_psi, self.e_y, self.s]
        )

    @staticmethod
    def from_array(x: np.ndarray) -> "State":
        return State(*(float(v) for v in x))


@dataclass(frozen=True)
class Control:
    delta: float = 0.0
    T: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.T])


@dataclass(frozen=True)
class AugmentedState:
    """Pair (current, previous) used by the barrier-condition cost terms.

    At the start of a rollout previous equals current.
    """

    current: State
    previous: State

    @staticmethod
    def initial(x: State) -> "AugmentedState":
        return AugmentedState(current=x, previous=x)


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters plus integration settings.

    Sized for a 22 kg, ~1 m wheelbase-class electric rally car. Plausibility,
    not fidelity: the benchmark claims rest on trends, not absolute speeds.
    """

    mass: float = 22.0                 # kg
    yaw_inertia: float = 1.8           # kg m^2
    lf: float = 0.52                   # m, CoG to front axle
    lr: float = 0.38                   # m, CoG to rear axle
    wheel_radius: float = 0.095        # m
    wheel_inertia: float = 0.08        # kg m^2 (per axle, stability-sized)
    corner_stiff_front: float = 350.0  # N/rad
    corner_stiff_rear: float = 800.0   # N/rad
    long_stiff: float = 500.0          # N per unit slip
    drive_gain: float = 12.0           # N m per unit throttle, rear axle
    roll_resist: float = 2.0           # N s/m
    drag_coeff: float = 1.2            # N s^2/m^2
    dt: float = 0.02                   # s
    delta_max: float = 0.35            # rad
    throttle_min: float = -1.0
    throttle_max: float = 1.0
    berm_decel: float = 15.0           # 1/(m s), boundary-contact decay gain
    integrator: str = "euler"          # "euler" | "rk4"

    def __post_init__(self):
        positive = (
            "mass", "yaw_inertia", "lf", "lr", "wheel_radius", "wheel_inertia",
            "corner_stiff_front", "corner_stiff_rear", "long_stiff",
            "drive_gain", "delta_max",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("roll_resist", "drag_coeff", "berm_decel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0.0 < self.dt <= 0.1:
            raise ValueError(f"dt must be in (0, 0.1], got {self.dt}")
        if self.throttle_min >= self.throttle_max:
            raise ValueError("throttle_min must be below throttle_max")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"integrator must be 'euler' or 'rk4', got {self.integrator!r}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mass, self.yaw_inertia, self.lf, self.lr, self.wheel_radius,
             self.wheel_inertia, self.corner_stiff_front, self.corner_stiff_rear,
             self.long_stiff, self.drive_gain, self.roll_resist, self.drag_coeff,
             self.dt, self.delta_max, self.throttle_min, self.throttle_max,
             self.berm_decel, 1.0 if self.integrator == "rk4" else 0.0]
        )

    @staticmethod
    def from_file(path: Union[str, Path]) -> "VehicleParams":
        """Load from flat key = value text. Every physical key is mandatory."""
        values = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in _PARAM_FILE_KEYS:
                    raise ValueError(f"{path}: line {lineno}: unknown parameter {key!r}")
                if key in values:
                    raise ValueError(f"{path}: line {lineno}: duplicate parameter {key!r}")
                try:
                    values[key] = float(val.strip())
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: non-numeric value for {key!r}"
                    ) from None
        missing = [k for k in _PARAM_FILE_KEYS if k not in values]
        if missing:
            raise ValueError(f"{path}: missing parameters: {', '.join(missing)}")
        return VehicleParams(
            mass=values["mass"],
            yaw_inertia=values["yaw_inertia"],
            lf=values["lf"],
            lr=values["lr"],
            wheel_radius=values["wheel_radius"],
            wheel_inertia=values["wheel_inertia"],
            corner_stiff_front=values["corner_stiff_front"],
            corner_stiff_rear=values["corner_stiff_rear"],
            long_stiff=values["long_stiff"],
            drive_gain=values["drive_gain"],
            roll_resist=values["roll_resist"],
            drag_coeff=values["drag_coeff"],
            dt=values["dt"],
            delta_max=values["delta_max"],
            throttle_min=values["throttle_min"],
            throttle_max=values["throttle_max"],
            berm_decel=values["berm_decel"],
        )

    def with_integrator(self, integrator: str) -> "VehicleParams":
        return replace(self, integrator=integrator)


@njit(cache=True)
def curvature_lookup(cum_s, kappa, total_length, s):
    """Periodic linear interpolation of waypoint curvature at arclength s."""
    sw = s % total_length
    if sw < 0.0:
        sw += total_length
    n = cum_s.shape[0]
    # cum_s[0] == 0, so sw >= cum_s[0] always.
    lo = 0
    hi = n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if cum_s[mid] <= sw:
            lo = mid
        else:
            hi = mid
    if lo == n - 1:
        span = total_length - cum_s[n - 1]
        t = (sw - cum_s[n - 1]) / span
        return kappa[n - 1] + t * (kappa[0] - kappa[n - 1])
    span = cum_s[lo + 1] - cum_s[lo]
    t = (sw - cum_s[lo]) / span
    return kappa[lo] + t * (kappa[lo + 1] - kappa[lo])


@njit(cache=True)
def _derivative(p, cum_s, kappa_arr, total_length, x, delta, throttle, out):
    v_x = x[IX_VX]
    v_y = x[IX_VY]
    psi_dot = x[IX_PSIDOT]
    omega_f = x[IX_OMEGA_F]
    omega_r = x[IX_OMEGA_R]
    e_psi = x[IX_EPSI]
    e_y = x[IX_EY]
    s = x[IX_S]

    v_eff = abs(v_x)
    if v_eff < V_EFF_MIN:
        v_eff = V_EFF_MIN

    alpha_f = delta - math.atan((v_y + p[P_LF] * psi_dot) / v_eff)
    alpha_r = -math.atan((v_y - p[P_LR] * psi_dot) / v_eff)
    f_yf = p[P_CF] * alpha_f
    f_yr = p[P_CR] * alpha_r

    slip_f = (p[P_RW] * omega_f - v_x) / v_eff
    slip_r = (p[P_RW] * omega_r - v_x) / v_eff
    f_xf = p[P_CLONG] * slip_f
    f_xr = p[P_CLONG] * slip_r

    f_res = p[P_CROLL] * v_x + p[P_CDRAG] * v_x * abs(v_x)

    cos_d = math.cos(delta)
    sin_d = math.sin(delta)
    front_lat = f_yf * cos_d + f_xf * sin_d

    out[IX_VX] = (f_xf * cos_d - f_yf * sin_d + f_xr - f_res) / p[P_MASS] + v_y * psi_dot
    out[IX_VY] = front_lat / p[P_MASS] + f_yr / p[P_MASS] - v_x * psi_dot
    out[IX_PSIDOT] = (p[P_LF] * front_lat - p[P_LR] * f_yr) / p[P_IZ]
    out[IX_OMEGA_F] = -p[P_RW] * f_xf / p[P_IW]
    out[IX_OMEGA_R] = (p[P_DRIVE] * throttle - p[P_RW] * f_xr) / p[P_IW]

    kap = curvature_lookup(cum_s, kappa_arr, total_length, s)
    denom = 1.0 - kap * e_y
    if denom >= 0.0:
        if denom < PROJECTION_FLOOR:
            denom = PROJECTION_FLOOR
    else:
        if denom > -PROJECTION_FLOOR:
            denom = -PROJECTION_FLOOR
    cos_e = math.cos(e_psi)
    sin_e = math.sin(e_psi)
    ds = (v_x * cos_e - v_y * sin_e) / denom
    out[IX_EPSI] = psi_dot - kap * ds
    out[IX_EY] = v_x * sin_e + v_y * cos_e
    out[IX_S] = ds


@njit(cache=True)
def clamp_control(p, delta, throttle):
    if delta > p[P_DELTA_MAX]:
        delta = p[P_DELTA_MAX]
    elif delta < -p[P_DELTA_MAX]:
        delta = -p[P_DELTA_MAX]
    if throttle > p[P_TMAX]:
        throttle = p[P_TMAX]
    elif throttle < p[P_TMIN]:
        throttle = p[P_TMIN]
    return delta, throttle


@njit(cache=True)
def step_array(p, cum_s, kappa_arr, total_length, half_width, x, delta, throttle, out):
    """One integration step into ``out``. Returns False on non-finite output."""
    delta, throttle = clamp_control(p, delta, throttle)
    dt = p[P_DT]
    if p[P_RK4] != 0.0:
        k1 = np.empty(STATE_DIM)
        k2 = np.empty(STATE_DIM)
        k3 = np.empty(STATE_DIM)
        k4 = np.empty(STATE_DIM)
        tmp = np.empty(STATE_DIM)
        _derivative(p, cum_s, kappa_arr, total_length, x, delta, throttle, k1)
        for i in range(STATE_DIM):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        _derivative(p, cum_s, kappa_arr, total_length, tmp, delta, throttle, k2)
        for i in range(STATE_DIM):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        _derivative(p, cum_s, kappa_arr, total_length, tmp, delta, throttle, k3)
        for i in range(STATE_DIM):
            tmp[i] = x[i] + dt * k3[i]
        _derivative(p, cum_s, kappa_arr, total_length, tmp, delta, throttle, k4)
        for i in range(STATE_DIM):
            out[i] = x[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
    else:
        # Allocation-free: derivative lands in out, then out = x + dt * out.
        _derivative(p, cum_s, kappa_arr, total_length, x, delta, throttle, out)
        for i in range(STATE_DIM):
            out[i] = x[i] + dt * out[i]

    # Keep heading error bounded regardless of how wild the excursion was.
    e_psi = out[IX_EPSI]
    if e_psi >= math.pi or e_psi < -math.pi:
        e_psi = (e_psi + math.pi) % (2.0 * math.pi) - math.pi
        out[IX_EPSI] = e_psi

    # Boundary contact: scrub speed in proportion to penetration depth.
    depth = abs(out[IX_EY]) - half_width
    if depth > 0.0:
        decay = math.exp(-p[P_BERM] * depth * dt)
        out[IX_VX] *= decay
        out[IX_VY] *= decay
        out[IX_PSIDOT] *= decay
        out[IX_OMEGA_F] *= decay
        out[IX_OMEGA_R] *= decay

    ok = True
    for i in range(STATE_DIM):
        if not math.isfinite(out[i]):
            ok = False
    return ok


def step(params: VehicleParams, track: Track, x: State, u: Control) -> State:
    """Propagate one step; deterministic, raises DynamicsError on blow-up."""
    out = np.empty(STATE_DIM)
    ok = step_array(
        params.as_array(),
        track.cum_arclength,
        track.curvature,
        track.total_length,
        track.half_width,
        x.as_array(),
        float(u.delta),
        float(u.T),
        out,
    )
    if not ok:
        raise DynamicsError("vehicle model produced a non-finite state", out)
    return State.from_array(out)


def step_augmented(
    params: VehicleParams, track: Track, z: AugmentedState, u: Control
) -> AugmentedState:
    """Propagate the (current, previous) pair: new previous is the old current."""
    return AugmentedState(current=step(params, track, z.current, u), previous=z.current)


def step_disturbed(
    params: VehicleParams, track: Track, x: State, u: Control, noise: np.ndarray
) -> State:
    """Nominal step plus additive state noise drawn by the caller."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (STATE_DIM,):
        raise ValueError(f"noise must have shape ({STATE_DIM},), got {noise.shape}")
    if not np.all(np.isfinite(noise)):
        raise DynamicsError("disturbance noise is not finite", noise)
    nominal = step(params, track, x, u)
    out = nominal.as_array() + noise
    if not np.all(np.isfinite(out)):
        raise DynamicsError("disturbed state is not finite", out)
    return State.from_array(out)
