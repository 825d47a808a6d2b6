"""Closed-loop benchmark harness: plant, controller catalog, metrics, sweeps.

The plant integrates the same vehicle model the optimizer plans with, plus
additive state disturbances, so the gap between planned and realized
trajectories is exactly the injected noise. Four controller kinds cover
the benchmark matrix:

  mppi    sampling optimizer, plain quadratic cost, disturbed plant
  cbf     mppi plus the soft barrier penalty inside rollout scoring
  shield  cbf plus the post-optimization gradient repair
  pt      plain optimizer on an idealized plant that realizes the nominal
          prediction exactly (perfect tracking; disturbances ignored)

Episodes run one lap, ending early on a crash or a timeout. A crash is
being beyond the crash margin at walking pace for half a second straight;
a collision is a recovered scrape: a contiguous excursion past the
half-width that stays within the crash margin and comes back. Both are
judged on plant states only, never on sampled rollouts.
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .costs import CbfParams, CostParams, h as barrier_value
from .dynamics import (
    STATE_DIM,
    Control,
    DynamicsError,
    State,
    VehicleParams,
    step,
    step_disturbed,
)
from .mppi import (
    MppiConfig,
    OptimizerError,
    rollout_batch,
    update_controls,
    warm_start,
    weights,
)
from .shield import ShieldConfig, repair
from .track import Track

TRAJECTORY_COLUMNS = (
    "t", "s", "e_y", "e_psi", "v_x", "v_y", "psi_dot",
    "delta", "T", "h", "dcbf_residual", "repaired",
)

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


class ControllerKind(enum.Enum):
    MPPI = "mppi"
    CBF = "cbf"
    SHIELD = "shield"
    PT = "pt"

    @staticmethod
    def parse(name: str) -> "ControllerKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "mppi": ControllerKind.MPPI,
            "cbf": ControllerKind.CBF,
            "cbf-mppi": ControllerKind.CBF,
            "shield": ControllerKind.SHIELD,
            "shield-mppi": ControllerKind.SHIELD,
            "pt": ControllerKind.PT,
            "pt-mppi": ControllerKind.PT,
        }
        if key not in aliases:
            raise ValueError(f"unknown controller kind {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class DisturbanceModel:
    """Additive plant noise: independent per-component stds, drawn each step."""

    stds: np.ndarray = field(default_factory=lambda: np.zeros(STATE_DIM))
    enabled: bool = True

    def __post_init__(self):
        stds = np.array(self.stds, dtype=float)
        if stds.shape != (STATE_DIM,):
            raise ValueError(f"stds must have shape ({STATE_DIM},), got {stds.shape}")
        if not np.all(np.isfinite(stds)) or np.any(stds < 0):
            raise ValueError("stds must be finite and non-negative")
        stds.setflags(write=False)
        object.__setattr__(self, "stds", stds)


@dataclass(frozen=True)
class EpisodeSettings:
    """Episode termination: lap, crash state machine, timeout.

    ``crash_margin`` is the boundary-penetration depth separating a scrape
    from crash territory; None resolves to 0.3 x track half-width at run
    time. A crash needs depth beyond the margin and forward speed below
    ``v_stop`` for ``t_stop`` seconds straight.
    """

    timeout: float = 60.0
    crash_margin: Optional[float] = None
    v_stop: float = 0.3
    t_stop: float = 0.5
    start_speed: float = 2.0

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.crash_margin is not None and not self.crash_margin > 0:
            raise ValueError(f"crash_margin must be positive, got {self.crash_margin}")
        if not self.v_stop > 0:
            raise ValueError(f"v_stop must be positive, got {self.v_stop}")
        if not self.t_stop > 0:
            raise ValueError(f"t_stop must be positive, got {self.t_stop}")
        if self.start_speed < 0:
            raise ValueError(f"start_speed must be >= 0, got {self.start_speed}")

    def margin_for(self, track: Track) -> float:
        return self.crash_margin if self.crash_margin is not None else 0.3 * track.half_width


@dataclass(frozen=True)
class EpisodeMetrics:
    crashed: bool
    collisions: int
    lap_time: float
    avg_speed: float
    max_speed: float
    shield_interventions: int
    optimizer_errors: int = 0
    completed_lap: bool = False
    log: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RunBundle:
    """Everything one episode needs, bundled so sweeps can rebuild per grid point."""

    vehicle: VehicleParams
    track: Track
    mppi: MppiConfig
    costs: CostParams
    cbf: CbfParams
    shield: ShieldConfig
    disturbance: DisturbanceModel
    episode: EpisodeSettings


def rolling_state(vehicle: VehicleParams, v_x: float, e_y: float = 0.0, s: float = 0.0) -> State:
    """Start state with wheels matched to the body speed (no initial slip)."""
    omega = v_x / vehicle.wheel_radius
    return State(v_x=v_x, omega_F=omega, omega_R=omega, e_y=e_y, s=s)


class Controller:
    """One receding-horizon controller instance with its warm-start memory.

    The kind decides which machinery runs: the barrier penalty inside
    rollout scoring for cbf/shield, the repair pass for shield only. On an
    optimizer failure (no finite rollout cost) the controller plays the
    next entry of its previous plan and reports the step as flagged.
    """

    def __init__(self, kind: ControllerKind, bundle: RunBundle, seed: int,
                 workers: Optional[int] = None):
        self.kind = kind
        self.bundle = bundle
        cbf_on = kind in (ControllerKind.CBF, ControllerKind.SHIELD)
        self.config = replace(bundle.mppi, seed=int(seed), cbf_cost_enabled=cbf_on)
        self.repair_enabled = (
            kind is ControllerKind.SHIELD and bundle.shield.iterations > 0
        )
        self.workers = workers
        self.warm = np.zeros((self.config.horizon, 2))

    def control_step(self, x: State, iteration: int) -> Tuple[np.ndarray, bool, bool]:
        """Run one optimize(-repair) cycle; returns (u, repaired, flagged)."""
        b = self.bundle
        try:
            batch = rollout_batch(
                self.config, b.vehicle, b.costs, b.cbf, b.track, x, self.warm,
                iteration=iteration, workers=self.workers,
            )
            w = weights(batch.costs, self.config.temperature)
            v_plus = update_controls(self.warm, batch.noises, w, b.vehicle)
        except OptimizerError:
            u = self.warm[0].copy()
            self.warm = warm_start(self.warm, self.config.no_shift)
            return u, False, True
        if self.repair_enabled:
            v_safe = repair(b.shield, b.vehicle, b.cbf, b.track, x, v_plus)
            repaired = not np.array_equal(v_safe, v_plus)
        else:
            v_safe = v_plus
            repaired = False
        u = v_safe[0].copy()
        self.warm = warm_start(v_safe, self.config.no_shift)
        return u, repaired, False


def run_episode(
    kind: ControllerKind,
    bundle: RunBundle,
    seed: int,
    log: bool = False,
    workers: Optional[int] = None,
) -> EpisodeMetrics:
    """Drive one lap (or until crash/timeout) and score it.

    Fully determined by (kind, bundle, seed): the optimizer noise streams
    are keyed by the seed and step index, and the plant disturbance comes
    from a generator seeded by the same episode seed.
    """
    b = bundle
    track, vehicle = b.track, b.vehicle
    dt = vehicle.dt
    half_width = track.half_width
    margin = b.episode.margin_for(track)
    stop_steps = max(1, int(round(b.episode.t_stop / dt)))
    max_steps = max(1, int(round(b.episode.timeout / dt)))
    controller = Controller(kind, bundle, seed, workers=workers)
    perfect = kind is ControllerKind.PT
    disturb = b.disturbance.enabled and not perfect
    rng = np.random.default_rng((int(seed), 0x5EED))

    x = rolling_state(vehicle, b.episode.start_speed)
    s_origin = x.s
    h_prev = barrier_value(track, x)
    rows: List[List[float]] = []

    crashed = False
    completed = False
    collisions = 0
    interventions = 0
    opt_errors = 0
    in_excursion = False
    excursion_deep = False
    stop_run = 0
    speed_sum = 0.0
    speed_max = 0.0
    steps_done = 0
    lap_time = b.episode.timeout

    for step_idx in range(max_steps):
        u, repaired, flagged = controller.control_step(x, step_idx)
        interventions += int(repaired)
        opt_errors += int(flagged)
        control = Control(delta=float(u[0]), T=float(u[1]))
        t = (step_idx + 1) * dt
        try:
            if perfect:
                x_next = step(vehicle, track, x, control)
            elif disturb:
                noise = b.disturbance.stds * rng.standard_normal(STATE_DIM)
                x_next = step_disturbed(vehicle, track, x, control, noise)
            else:
                x_next = step(vehicle, track, x, control)
        except DynamicsError:
            crashed = True
            lap_time = t
            break

        steps_done += 1
        speed = math.hypot(x_next.v_x, x_next.v_y)
        speed_sum += speed
        speed_max = max(speed_max, speed)
        h_curr = barrier_value(track, x_next)
        if log:
            rows.append([
                t, x_next.s, x_next.e_y, x_next.e_psi, x_next.v_x, x_next.v_y,
                x_next.psi_dot, control.delta, control.T, h_curr,
                h_curr - b.cbf.alpha * h_prev, float(repaired),
            ])
        h_prev = h_curr

        depth = abs(x_next.e_y) - half_width
        if depth > 0.0:
            if not in_excursion:
                in_excursion = True
                excursion_deep = False
            if depth > margin:
                excursion_deep = True
                if x_next.v_x < b.episode.v_stop:
                    stop_run += 1
                else:
                    stop_run = 0
            else:
                stop_run = 0
            if stop_run >= stop_steps:
                crashed = True
                lap_time = t
                break
        else:
            if in_excursion:
                if not excursion_deep:
                    collisions += 1
                in_excursion = False
            stop_run = 0

        if x_next.s - s_origin >= track.total_length:
            completed = True
            lap_time = t
            break
        x = x_next

    if in_excursion and not crashed and not excursion_deep:
        collisions += 1

    return EpisodeMetrics(
        crashed=crashed,
        collisions=collisions,
        lap_time=lap_time,
        avg_speed=speed_sum / max(1, steps_done),
        max_speed=speed_max,
        shield_interventions=interventions,
        optimizer_errors=opt_errors,
        completed_lap=completed,
        log=np.array(rows) if log else None,
    )


GridPoint = Tuple[Tuple[str, float], ...]


@dataclass(frozen=True)
class EpisodeRow:
    kind: ControllerKind
    point: GridPoint
    seed: int
    metrics: EpisodeMetrics


@dataclass(frozen=True)
class Aggregate:
    """Per (kind, grid point) summary.

    collision_rate is the fraction of episodes with at least one collision
    (the quantity quoted as a percentage); collisions_mean is the mean
    number of scrapes per episode.
    """

    kind: ControllerKind
    point: GridPoint
    episodes: int
    crash_rate: float
    crash_rate_ci95: float
    collision_rate: float
    collision_rate_ci95: float
    collisions_mean: float
    collisions_mean_ci95: float
    lap_time_mean: float
    lap_time_ci95: float
    avg_speed_mean: float
    avg_speed_ci95: float
    max_speed_mean: float
    interventions_mean: float


def grid_points(axes: Sequence[Tuple[str, Sequence[float]]]) -> List[GridPoint]:
    """Cartesian product of sweep axes, in declared order."""
    if not axes:
        return [()]
    names = [name for name, _ in axes]
    return [
        tuple(zip(names, combo))
        for combo in itertools.product(*[values for _, values in axes])
    ]


def run_sweep(
    build: Callable[[Dict[str, float]], RunBundle],
    kinds: Sequence[ControllerKind],
    axes: Sequence[Tuple[str, Sequence[float]]],
    seeds: Sequence[int],
    log_dir: Optional[Union[str, Path]] = None,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[EpisodeRow]:
    """Run kinds x grid x seeds and return one row per episode.

    ``build`` turns a dict of axis overrides into a RunBundle, so each grid
    point gets a fresh, fully validated configuration. Rows come back in
    deterministic (grid point, kind, seed) order regardless of worker
    count; per-episode trajectory logs land in ``log_dir`` when given.
    """
    points = grid_points(axes)
    jobs: List[Tuple[int, GridPoint, RunBundle, ControllerKind, int]] = []
    for point in points:
        bundle = build(dict(point))
        for kind in kinds:
            for seed in seeds:
                jobs.append((len(jobs), point, bundle, kind, int(seed)))

    log_path = Path(log_dir) if log_dir is not None else None
    if log_path is not None:
        log_path.mkdir(parents=True, exist_ok=True)
    results: List[Optional[EpisodeRow]] = [None] * len(jobs)
    total = len(jobs)
    done = 0

    def run_one(job):
        idx, point, bundle, kind, seed = job
        metrics = run_episode(kind, bundle, seed, log=log_path is not None)
        if log_path is not None and metrics.log is not None:
            point_tag = "_".join(f"{k.split('.')[-1]}{v:g}" for k, v in point)
            name = f"traj_{kind.value}" + (f"_{point_tag}" if point_tag else "") + f"_{seed}.csv"
            write_trajectory_csv(log_path / name, metrics.log)
        return idx, EpisodeRow(kind=kind, point=point, seed=seed, metrics=metrics)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, row in pool.map(run_one, jobs):
                results[idx] = row
                done += 1
                if progress is not None:
                    progress(done, total)
    else:
        for job in jobs:
            idx, row = run_one(job)
            results[idx] = row
            done += 1
            if progress is not None:
                progress(done, total)
    return [row for row in results if row is not None]


def _ci95(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(_Z95 * values.std(ddof=1) / math.sqrt(values.size))


def aggregate(rows: Sequence[EpisodeRow]) -> List[Aggregate]:
    """Per (kind, grid point) means with normal-approximation 95% CIs."""
    groups: Dict[Tuple[ControllerKind, GridPoint], List[EpisodeMetrics]] = {}
    for row in rows:
        groups.setdefault((row.kind, row.point), []).append(row.metrics)
    out = []
    for (kind, point), metrics in groups.items():
        crashed = np.array([float(m.crashed) for m in metrics])
        collided = np.array([float(m.collisions > 0) for m in metrics])
        collision_counts = np.array([float(m.collisions) for m in metrics])
        lap = np.array([m.lap_time for m in metrics])
        avg_v = np.array([m.avg_speed for m in metrics])
        max_v = np.array([m.max_speed for m in metrics])
        shield_n = np.array([float(m.shield_interventions) for m in metrics])
        out.append(Aggregate(
            kind=kind,
            point=point,
            episodes=len(metrics),
            crash_rate=float(crashed.mean()),
            crash_rate_ci95=_ci95(crashed),
            collision_rate=float(collided.mean()),
            collision_rate_ci95=_ci95(collided),
            collisions_mean=float(collision_counts.mean()),
            collisions_mean_ci95=_ci95(collision_counts),
            lap_time_mean=float(lap.mean()),
            lap_time_ci95=_ci95(lap),
            avg_speed_mean=float(avg_v.mean()),
            avg_speed_ci95=_ci95(avg_v),
            max_speed_mean=float(max_v.mean()),
            interventions_mean=float(shield_n.mean()),
        ))
    return out


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _header_line(label: str, note: str) -> str:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    suffix = f" | {note}" if note else ""
    return f"# {label} generated {stamp}{suffix}\n"


def write_episodes_csv(
    path: Union[str, Path],
    rows: Sequence[EpisodeRow],
    axis_names: Sequence[str] = (),
    note: str = "",
) -> None:
    """One row per episode; body is byte-stable given identical inputs."""
    columns = ["kind", *axis_names, "seed", "crashed", "collisions", "lap_time",
               "avg_speed", "max_speed", "shield_interventions"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header_line("episodes", note))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            values = dict(row.point)
            m = row.metrics
            fields = [row.kind.value]
            fields += [_fmt(values[name]) for name in axis_names]
            fields += [
                str(row.seed), _fmt(m.crashed), str(m.collisions),
                _fmt(m.lap_time), _fmt(m.avg_speed), _fmt(m.max_speed),
                str(m.shield_interventions),
            ]
            fh.write(",".join(fields) + "\n")


def write_aggregates_csv(
    path: Union[str, Path],
    aggs: Sequence[Aggregate],
    axis_names: Sequence[str] = (),
    note: str = "",
) -> None:
    columns = ["kind", *axis_names, "episodes",
               "crash_rate", "crash_rate_ci95",
               "collision_rate", "collision_rate_ci95",
               "collisions_mean", "collisions_mean_ci95",
               "lap_time_mean", "lap_time_ci95",
               "avg_speed_mean", "avg_speed_ci95",
               "max_speed_mean", "interventions_mean"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header_line("aggregates", note))
        fh.write(",".join(columns) + "\n")
        for agg in aggs:
            values = dict(agg.point)
            fields = [agg.kind.value]
            fields += [_fmt(values[name]) for name in axis_names]
            fields += [
                str(agg.episodes),
                _fmt(agg.crash_rate), _fmt(agg.crash_rate_ci95),
                _fmt(agg.collision_rate), _fmt(agg.collision_rate_ci95),
                _fmt(agg.collisions_mean), _fmt(agg.collisions_mean_ci95),
                _fmt(agg.lap_time_mean), _fmt(agg.lap_time_ci95),
                _fmt(agg.avg_speed_mean), _fmt(agg.avg_speed_ci95),
                _fmt(agg.max_speed_mean), _fmt(agg.interventions_mean),
            ]
            fh.write(",".join(fields) + "\n")


def write_trajectory_csv(path: Union[str, Path], log: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in log:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def measure_latency(
    bundle: RunBundle,
    kind: ControllerKind,
    steps: int = 1000,
    workers: Optional[int] = None,
    warmup: int = 10,
) -> Tuple[float, float]:
    """Wall-clock p50/p95 of the control step in milliseconds.

    Runs the controller closed-loop on the undisturbed plant (restarting
    whenever the episode ends) and times only the control computation,
    after a short warm-up that absorbs JIT compilation.
    """
    controller = Controller(kind, bundle, seed=0, workers=workers)
    x = rolling_state(bundle.vehicle, bundle.episode.start_speed)
    durations = np.empty(steps)
    recorded = -warmup
    while recorded < steps:
        t0 = time.perf_counter()
        u, _, _ = controller.control_step(x, max(0, recorded))
        elapsed = time.perf_counter() - t0
        if recorded >= 0:
            durations[recorded] = elapsed
        recorded += 1
        try:
            x = step(bundle.vehicle, bundle.track, x, Control(float(u[0]), float(u[1])))
        except DynamicsError:
            x = rolling_state(bundle.vehicle, bundle.episode.start_speed)
            controller = Controller(kind, bundle, seed=0, workers=workers)
        if abs(x.e_y) > bundle.track.half_width + bundle.episode.margin_for(bundle.track):
            x = rolling_state(bundle.vehicle, bundle.episode.start_speed)
    return (
        float(np.percentile(durations, 50) * 1e3),
        float(np.percentile(durations, 95) * 1e3),
    )
