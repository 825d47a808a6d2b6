"""Closed-loop harness: detector oracle, controller equivalences, sweeps."""
import dataclasses
import math
import os

import numpy as np
import pytest

from shield_mppi.costs import CbfParams, CostParams
from shield_mppi.dynamics import State, VehicleParams
from shield_mppi.harness import (
    Aggregate,
    Controller,
    ControllerKind,
    DisturbanceModel,
    EpisodeMetrics,
    EpisodeRow,
    EpisodeSettings,
    RunBundle,
    TRAJECTORY_COLUMNS,
    aggregate,
    grid_points,
    measure_latency,
    rolling_state,
    run_episode,
    run_sweep,
    write_aggregates_csv,
    write_episodes_csv,
    write_trajectory_csv,
)
from shield_mppi.mppi import MppiConfig
from shield_mppi.shield import ShieldConfig

Q_DIAG = np.array([2.0, 0.1, 0.1, 0.0, 0.0, 5.0, 0.0, 0.0])
STDS = np.array([0.04, 0.04, 0.02, 0.0, 0.0, 0.004, 0.008, 0.0])


def make_bundle(track, target_speed=7.0, samples=24, horizon=20, stds=None,
                timeout=30.0, q_ey=0.0):
    q = Q_DIAG.copy()
    q[6] = q_ey
    noise_cov = np.diag([0.08**2, 0.25**2])
    return RunBundle(
        vehicle=VehicleParams(),
        track=track,
        mppi=MppiConfig(samples=samples, horizon=horizon, temperature=10.0,
                        noise_cov=noise_cov),
        costs=CostParams(q_diag=q, target_speed=target_speed),
        cbf=CbfParams(alpha=0.95, weight=1000.0),
        shield=ShieldConfig(horizon=8, iterations=10),
        disturbance=DisturbanceModel(
            stds=STDS if stds is None else stds, enabled=True),
        episode=EpisodeSettings(timeout=timeout),
    )


# ------------------------------------------------------------ detector oracle

def detector_oracle(bundle, log):
    """Re-run the crash/collision state machine over the logged trajectory."""
    hw = bundle.track.half_width
    margin = bundle.episode.margin_for(bundle.track)
    dt = bundle.vehicle.dt
    stop_steps = max(1, int(round(bundle.episode.t_stop / dt)))
    total_length = bundle.track.total_length
    crashed = completed = False
    in_exc = deep = False
    stop_run = collisions = 0
    lap_time = bundle.episode.timeout
    speeds = []
    for row in log:
        t, s, e_y, v_x, v_y = row[0], row[1], row[2], row[4], row[5]
        speeds.append(math.hypot(v_x, v_y))
        depth = abs(e_y) - hw
        if depth > 0.0:
            if not in_exc:
                in_exc, deep = True, False
            if depth > margin:
                deep = True
                stop_run = stop_run + 1 if v_x < bundle.episode.v_stop else 0
            else:
                stop_run = 0
            if stop_run >= stop_steps:
                crashed, lap_time = True, t
                break
        else:
            if in_exc:
                if not deep:
                    collisions += 1
                in_exc = False
            stop_run = 0
        if s >= total_length:  # episodes start at s = 0
            completed, lap_time = True, t
            break
    if in_exc and not crashed and not deep:
        collisions += 1
    return {
        "crashed": crashed,
        "completed_lap": completed,
        "collisions": collisions,
        "lap_time": lap_time,
        "avg_speed": sum(speeds) / max(1, len(speeds)),
        "max_speed": max(speeds) if speeds else 0.0,
    }


def test_episode_metrics_match_detector_oracle(course_track):
    bundle = make_bundle(course_track)
    outcomes = set()
    for seed in range(6):
        m = run_episode(ControllerKind.MPPI, bundle, seed, log=True)
        want = detector_oracle(bundle, m.log)
        assert m.crashed == want["crashed"]
        assert m.completed_lap == want["completed_lap"]
        assert m.collisions == want["collisions"]
        assert m.lap_time == want["lap_time"]
        assert m.avg_speed == want["avg_speed"]
        assert m.max_speed == want["max_speed"]
        outcomes.add((m.crashed, m.collisions > 0))
    # The seed set must exercise both terminal outcomes and some scrapes.
    assert any(c for c, _ in outcomes)
    assert any(not c for c, _ in outcomes)
    assert any(col for _, col in outcomes)


def test_shield_episode_logs_interventions(course_track):
    bundle = make_bundle(course_track)
    m = run_episode(ControllerKind.SHIELD, bundle, 3, log=True)
    assert m.shield_interventions == int(m.log[:, 11].sum())
    assert m.log.shape[1] == len(TRAJECTORY_COLUMNS)


# ------------------------------------------------------------ equivalences

def test_pt_plant_ignores_disturbances(course_track):
    noisy = make_bundle(course_track, stds=np.full(8, 10.0), timeout=2.0)
    quiet = dataclasses.replace(
        noisy, disturbance=dataclasses.replace(noisy.disturbance, enabled=False))
    a = run_episode(ControllerKind.PT, noisy, 5, log=True)
    b = run_episode(ControllerKind.PT, quiet, 5, log=True)
    np.testing.assert_array_equal(a.log, b.log)
    # The regular optimizer on the disturbed plant does feel the noise.
    c = run_episode(ControllerKind.MPPI, noisy, 5, log=True)
    d = run_episode(ControllerKind.MPPI, quiet, 5, log=True)
    assert not np.array_equal(c.log, d.log)


def test_mppi_equals_cbf_with_zero_penalty_weight(course_track):
    bundle = dataclasses.replace(
        make_bundle(course_track, timeout=5.0),
        cbf=CbfParams(alpha=0.95, weight=0.0))
    a = run_episode(ControllerKind.MPPI, bundle, 2, log=True)
    b = run_episode(ControllerKind.CBF, bundle, 2, log=True)
    np.testing.assert_array_equal(a.log, b.log)
    assert a.collisions == b.collisions
    assert a.crashed == b.crashed


def test_shield_equals_cbf_with_zero_repair_budget(course_track):
    bundle = dataclasses.replace(
        make_bundle(course_track, timeout=5.0),
        shield=ShieldConfig(horizon=8, iterations=0))
    a = run_episode(ControllerKind.CBF, bundle, 2, log=True)
    b = run_episode(ControllerKind.SHIELD, bundle, 2, log=True)
    np.testing.assert_array_equal(a.log, b.log)
    assert b.shield_interventions == 0


def test_episode_is_deterministic(course_track):
    bundle = make_bundle(course_track, timeout=4.0)
    a = run_episode(ControllerKind.SHIELD, bundle, 11, log=True)
    b = run_episode(ControllerKind.SHIELD, bundle, 11, log=True)
    assert a.lap_time == b.lap_time
    assert a.collisions == b.collisions
    np.testing.assert_array_equal(a.log, b.log)
    c = run_episode(ControllerKind.SHIELD, bundle, 12, log=True)
    assert not np.array_equal(a.log, c.log)


# ------------------------------------------------------------ episode paths

def test_timeout_path(circle_track):
    bundle = make_bundle(circle_track, target_speed=5.0, samples=8, horizon=8,
                         stds=np.zeros(8), timeout=0.5)
    m = run_episode(ControllerKind.CBF, bundle, 0)
    assert not m.completed_lap
    assert not m.crashed
    assert m.lap_time == 0.5
    assert m.avg_speed > 0.0


def test_lap_completion_path(circle_track):
    bundle = make_bundle(circle_track, target_speed=5.0, samples=32, horizon=25,
                         stds=np.zeros(8), timeout=60.0, q_ey=10.0)
    # Zero the control-effort term so the optimizer chases the speed target
    # instead of settling into a cheap crawl on the constant-curvature circle.
    bundle = dataclasses.replace(
        bundle, costs=dataclasses.replace(bundle.costs, control_cost_scale=0.0))
    m = run_episode(ControllerKind.CBF, bundle, 0)
    assert m.completed_lap
    assert not m.crashed
    assert m.lap_time < 30.0
    assert 2.0 < m.avg_speed < 7.0
    assert m.max_speed >= m.avg_speed


def test_controller_failure_replays_warm_start(course_track):
    bundle = make_bundle(course_track)
    controller = Controller(ControllerKind.MPPI, bundle, seed=0)
    plan = np.linspace(0.0, 1.0, bundle.mppi.horizon * 2).reshape(-1, 2) * 0.1
    controller.warm = plan.copy()
    u, repaired, flagged = controller.control_step(State(v_x=1e200), 0)
    assert flagged and not repaired
    np.testing.assert_array_equal(u, plan[0])
    np.testing.assert_array_equal(controller.warm[0], plan[1])  # shifted


def test_rolling_state_matches_wheel_speed(vehicle):
    x = rolling_state(vehicle, 3.0, e_y=0.2, s=5.0)
    assert x.omega_F == pytest.approx(3.0 / vehicle.wheel_radius)
    assert x.omega_R == x.omega_F
    assert (x.v_x, x.e_y, x.s) == (3.0, 0.2, 5.0)
    assert x.v_y == 0.0


# ------------------------------------------------------------ sweeps

def test_run_sweep_order_and_worker_invariance(circle_track):
    base = make_bundle(circle_track, samples=8, horizon=8, stds=np.zeros(8),
                       timeout=1.0)
    builds = []

    def build(overrides):
        builds.append(dict(overrides))
        return dataclasses.replace(
            base, costs=dataclasses.replace(
                base.costs, target_speed=overrides["cost.target_speed"]))

    kinds = [ControllerKind.MPPI, ControllerKind.CBF]
    axes = [("cost.target_speed", [4.0, 5.0])]
    rows = run_sweep(build, kinds, axes, seeds=[0, 1], workers=1)
    assert len(builds) == 2  # one bundle per grid point
    assert len(rows) == 8
    expect = [(4.0, "mppi", 0), (4.0, "mppi", 1), (4.0, "cbf", 0),
              (4.0, "cbf", 1), (5.0, "mppi", 0), (5.0, "mppi", 1),
              (5.0, "cbf", 0), (5.0, "cbf", 1)]
    got = [(dict(r.point)["cost.target_speed"], r.kind.value, r.seed)
           for r in rows]
    assert got == expect
    threaded = run_sweep(build, kinds, axes, seeds=[0, 1], workers=3)
    assert threaded == rows


def test_run_sweep_writes_trajectory_logs(circle_track, tmp_path):
    base = make_bundle(circle_track, samples=8, horizon=8, stds=np.zeros(8),
                       timeout=0.5)
    rows = run_sweep(lambda _: base, [ControllerKind.MPPI],
                     [("mppi.samples", [8.0])], seeds=[7],
                     log_dir=tmp_path / "logs")
    name = tmp_path / "logs" / "traj_mppi_samples8_7.csv"
    assert name.exists()
    data = np.loadtxt(name, delimiter=",", skiprows=1)
    assert data.shape == (25, len(TRAJECTORY_COLUMNS))
    assert rows[0].metrics.log is not None


def test_grid_points_layout():
    assert grid_points([]) == [()]
    pts = grid_points([("a", [1.0, 2.0]), ("b", [3.0])])
    assert pts == [(("a", 1.0), ("b", 3.0)), (("a", 2.0), ("b", 3.0))]


# ------------------------------------------------------------ aggregation

def fake_row(kind, point, seed, crashed=False, collisions=0, lap=20.0,
             avg=4.0, vmax=6.0, shield_n=0):
    return EpisodeRow(kind=kind, point=point, seed=seed, metrics=EpisodeMetrics(
        crashed=crashed, collisions=collisions, lap_time=lap, avg_speed=avg,
        max_speed=vmax, shield_interventions=shield_n))


def test_aggregate_math():
    point = (("mppi.samples", 50.0),)
    rows = [
        fake_row(ControllerKind.MPPI, point, 0, crashed=True, collisions=2,
                 lap=10.0, avg=3.0),
        fake_row(ControllerKind.MPPI, point, 1, collisions=0, lap=20.0, avg=4.0),
        fake_row(ControllerKind.MPPI, point, 2, collisions=1, lap=30.0, avg=5.0),
        fake_row(ControllerKind.MPPI, point, 3, collisions=0, lap=40.0, avg=6.0),
        fake_row(ControllerKind.SHIELD, point, 0, lap=15.0, shield_n=4),
    ]
    aggs = {a.kind: a for a in aggregate(rows)}
    m = aggs[ControllerKind.MPPI]
    assert m.episodes == 4
    assert m.crash_rate == 0.25
    assert m.collision_rate == 0.5  # fraction of episodes with any scrape
    assert m.collisions_mean == 0.75
    assert m.lap_time_mean == 25.0
    lap = np.array([10.0, 20.0, 30.0, 40.0])
    assert m.lap_time_ci95 == pytest.approx(
        1.959963984540054 * lap.std(ddof=1) / 2.0)
    s = aggs[ControllerKind.SHIELD]
    assert s.episodes == 1
    assert s.lap_time_ci95 == 0.0  # singleton: no spread to report
    assert s.interventions_mean == 4.0


def test_aggregate_groups_by_point():
    p1, p2 = (("k", 1.0),), (("k", 2.0),)
    rows = [fake_row(ControllerKind.MPPI, p1, 0), fake_row(ControllerKind.MPPI, p2, 0)]
    aggs = aggregate(rows)
    assert {a.point for a in aggs} == {p1, p2}


# ------------------------------------------------------------ CSV output

def test_episode_csv_shape_and_stability(tmp_path):
    point = (("cost.target_speed", 7.0),)
    rows = [fake_row(ControllerKind.MPPI, point, 0, crashed=True, lap=12.5),
            fake_row(ControllerKind.SHIELD, point, 1, collisions=3)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_episodes_csv(p1, rows, axis_names=["cost.target_speed"], note="check")
    write_episodes_csv(p2, rows, axis_names=["cost.target_speed"], note="check")
    lines1 = p1.read_text().splitlines()
    lines2 = p2.read_text().splitlines()
    assert lines1[0].startswith("# episodes generated")
    assert "check" in lines1[0]
    assert lines1[1] == ("kind,cost.target_speed,seed,crashed,collisions,"
                         "lap_time,avg_speed,max_speed,shield_interventions")
    assert lines1[2] == "mppi,7.0,0,1,0,12.5,4.0,6.0,0"
    assert lines1[3] == "shield,7.0,1,0,3,20.0,4.0,6.0,0"
    assert lines1[1:] == lines2[1:]  # body is byte-stable; header carries time


def test_aggregates_csv_round_trip(tmp_path):
    rows = [fake_row(ControllerKind.CBF, (), s, collisions=s % 2, lap=20.0 + s)
            for s in range(5)]
    path = tmp_path / "agg.csv"
    write_aggregates_csv(path, aggregate(rows))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# aggregates generated")
    header = lines[1].split(",")
    body = lines[2].split(",")
    record = dict(zip(header, body))
    assert record["kind"] == "cbf"
    assert record["episodes"] == "5"
    assert float(record["collision_rate"]) == 0.4
    assert float(record["lap_time_mean"]) == 22.0


def test_trajectory_csv_round_trip(tmp_path, rng):
    log = rng.normal(0.0, 1.0, (7, len(TRAJECTORY_COLUMNS)))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, log)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back, log)  # repr() round-trips exactly


# ------------------------------------------------------------ latency probe

def test_measure_latency_sanity(circle_track):
    bundle = dataclasses.replace(
        make_bundle(circle_track, samples=4, horizon=5, stds=np.zeros(8)),
        shield=ShieldConfig(horizon=4, iterations=10))
    p50, p95 = measure_latency(bundle, ControllerKind.SHIELD, steps=30)
    assert 0.0 < p50 <= p95 < 1000.0


# ------------------------------------------------------------ validation

def test_controller_kind_parse():
    assert ControllerKind.parse("shield-mppi") is ControllerKind.SHIELD
    assert ControllerKind.parse("CBF_MPPI") is ControllerKind.CBF
    assert ControllerKind.parse(" pt ") is ControllerKind.PT
    assert ControllerKind.parse("MPPI") is ControllerKind.MPPI
    with pytest.raises(ValueError):
        ControllerKind.parse("lqr")


def test_disturbance_model_validation():
    with pytest.raises(ValueError):
        DisturbanceModel(stds=np.zeros(3))
    with pytest.raises(ValueError):
        DisturbanceModel(stds=-np.ones(8))
    with pytest.raises(ValueError):
        DisturbanceModel(stds=np.full(8, np.nan))
    model = DisturbanceModel(stds=np.zeros(8))
    assert not model.stds.flags.writeable


def test_episode_settings_validation(circle_track):
    for kwargs in ({"timeout": 0.0}, {"crash_margin": 0.0}, {"v_stop": 0.0},
                   {"t_stop": 0.0}, {"start_speed": -1.0}):
        with pytest.raises(ValueError):
            EpisodeSettings(**kwargs)
    assert EpisodeSettings().margin_for(circle_track) == pytest.approx(
        0.3 * circle_track.half_width)
    assert EpisodeSettings(crash_margin=0.2).margin_for(circle_track) == 0.2
