"""Command-line front end: run studies, reproduce the benchmark figures,
and measure control-step latency.

  shield-mppi run --config study.cfg --out results/
  shield-mppi repro fig5 --out results/fig5/
  shield-mppi bench --config bench.cfg

Exit codes: 0 success, 2 invalid configuration or arguments, 3 I/O
failure. The SHIELD_MPPI_SEED environment variable overrides the seed
base of whatever config is loaded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numba

from .config import ConfigError, ExperimentConfig, load_config, seed_override_from_env
from .harness import (
    Aggregate,
    ControllerKind,
    aggregate,
    measure_latency,
    run_sweep,
    write_aggregates_csv,
    write_episodes_csv,
)

_DATA_DIR = Path(__file__).resolve().parent / "data"

# study name -> (packaged config, header note for the emitted CSVs)
_STUDIES: Dict[str, Tuple[str, str]] = {
    "fig3": ("fig3.cfg", "cost sensitivity sweep (q_ey x target speed)"),
    "fig4": ("fig4.cfg", "collision rate vs sample count"),
    "fig5": ("fig5.cfg", "sample count x horizon grid"),
    "table1": (
        "table1.cfg",
        "benchmark matrix, desk scale: samples=512 stands in for 10^4; "
        "ordering-only",
    ),
}


def study_config_path(study: str) -> Path:
    return _DATA_DIR / "configs" / _STUDIES[study][0]


def _progress_printer(total: int):
    if total < 50:
        return None
    step = max(1, total // 20)

    def progress(done: int, total_: int):
        if done % step == 0 or done == total_:
            sys.stderr.write(f"  {done}/{total_} episodes\n")
            sys.stderr.flush()

    return progress


def _summarize(aggs: Sequence[Aggregate], axis_names: Sequence[str]) -> str:
    lines = []
    head = ["kind"] + list(axis_names) + [
        "episodes", "crash_rate", "collisions/lap", "avg_speed",
    ]
    lines.append("  ".join(f"{h:>14}" for h in head))
    for agg in aggs:
        values = dict(agg.point)
        cells = [agg.kind.value]
        cells += [f"{values[name]:g}" for name in axis_names]
        cells += [
            str(agg.episodes),
            f"{agg.crash_rate:.3f}",
            f"{agg.collisions_mean:.3f}",
            f"{agg.avg_speed_mean:.2f}",
        ]
        lines.append("  ".join(f"{c:>14}" for c in cells))
    return "\n".join(lines)


def _execute_study(
    config: ExperimentConfig,
    out_dir: Path,
    note: str,
    log_trajectories: bool,
    workers: int,
) -> List[Aggregate]:
    axis_names = [name for name, _ in config.axes]
    total = len(config.kinds) * len(config.seeds)
    for _, values in config.axes:
        total *= len(values)
    rows = run_sweep(
        config.build,
        config.kinds,
        config.axes,
        config.seeds,
        log_dir=out_dir / "trajectories" if log_trajectories else None,
        workers=workers,
        progress=_progress_printer(total),
    )
    aggs = aggregate(rows)
    write_episodes_csv(out_dir / "episodes.csv", rows, axis_names, note)
    write_aggregates_csv(out_dir / "aggregates.csv", aggs, axis_names, note)
    print(_summarize(aggs, axis_names))
    return aggs


def _write_fig5_outputs(out_dir: Path, aggs: Sequence[Aggregate], note: str) -> None:
    """Reduction (cbf minus shield) and absolute collision rates per cell."""
    by_cell: Dict[tuple, Dict[ControllerKind, Aggregate]] = {}
    order: List[tuple] = []
    for agg in aggs:
        if agg.point not in by_cell:
            by_cell[agg.point] = {}
            order.append(agg.point)
        by_cell[agg.point][agg.kind] = agg
    with open(out_dir / "fig5_reduction.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# fig5 reduction | {note}\n")
        fh.write("mppi.samples,mppi.horizon,cbf_rate,shield_rate,reduction\n")
        for point in order:
            cell = by_cell[point]
            if ControllerKind.CBF not in cell or ControllerKind.SHIELD not in cell:
                continue
            values = dict(point)
            cbf_rate = cell[ControllerKind.CBF].collision_rate
            shield_rate = cell[ControllerKind.SHIELD].collision_rate
            fh.write(
                f"{values['mppi.samples']:g},{values['mppi.horizon']:g},"
                f"{cbf_rate!r},{shield_rate!r},{cbf_rate - shield_rate!r}\n"
            )
    with open(out_dir / "fig5_absolute.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# fig5 absolute | {note}\n")
        fh.write("kind,mppi.samples,mppi.horizon,collision_rate,collision_rate_ci95\n")
        for point in order:
            for kind, agg in by_cell[point].items():
                values = dict(point)
                fh.write(
                    f"{kind.value},{values['mppi.samples']:g},"
                    f"{values['mppi.horizon']:g},"
                    f"{agg.collision_rate!r},{agg.collision_rate_ci95!r}\n"
                )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config, seed_override=seed_override_from_env())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _execute_study(config, out_dir, "", args.log_trajectories, args.workers)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_repro(args: argparse.Namespace) -> int:
    config_path = study_config_path(args.study)
    note = _STUDIES[args.study][1]
    try:
        config = load_config(config_path, seed_override=seed_override_from_env())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        aggs = _execute_study(config, out_dir, note, args.log_trajectories, args.workers)
        if args.study == "fig5":
            _write_fig5_outputs(out_dir, aggs, note)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config, seed_override=seed_override_from_env())
        bundle = config.build({})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    max_threads = numba.config.NUMBA_NUM_THREADS
    print(f"# control-step latency over {args.steps} steps "
          f"(post-warmup), config {args.config}")
    for kind in config.kinds:
        for threads in dict.fromkeys([1, max_threads]):
            p50, p95 = measure_latency(bundle, kind, steps=args.steps, workers=threads)
            print(
                f"kind={kind.value} threads={threads} "
                f"p50_ms={p50:.3f} p95_ms={p95:.3f}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shield-mppi",
        description="Safety-shielded sampling MPC benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a study config")
    p_run.add_argument("--config", required=True, help="study config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--log-trajectories", action="store_true",
                       help="write one per-step log per episode")
    p_run.add_argument("--workers", type=int, default=1,
                       help="parallel episodes (default 1)")
    p_run.set_defaults(func=cmd_run)

    p_repro = sub.add_parser("repro", help="reproduce a benchmark study")
    p_repro.add_argument("study", choices=sorted(_STUDIES))
    p_repro.add_argument("--out", required=True, help="output directory")
    p_repro.add_argument("--log-trajectories", action="store_true")
    p_repro.add_argument("--workers", type=int, default=1)
    p_repro.set_defaults(func=cmd_repro)

    p_bench = sub.add_parser("bench", help="measure control-step latency")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--steps", type=int, default=1000)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
