"""Experiment configuration: flat ``key.path = value`` text files.

One file describes a whole study: track and vehicle file references,
controller kinds, optimizer/cost/barrier/repair settings, the disturbance
model, episode termination rules, seed block, and optional sweep axes.
Sweep axes are declared as ``sweep.<key> = v1,v2,...`` over any numeric
key and keep their file order. Unknown keys, duplicates, or type
mismatches are rejected with the offending line number so a typo cannot
silently fall back to a default.

Paths are resolved relative to the config file's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .costs import CbfParams, CostParams
from .dynamics import (
    IX_EPSI,
    IX_EY,
    IX_PSIDOT,
    IX_VX,
    IX_VY,
    STATE_DIM,
    VehicleParams,
)
from .harness import (
    ControllerKind,
    DisturbanceModel,
    EpisodeSettings,
    RunBundle,
)
from .mppi import MppiConfig
from .shield import ShieldConfig
from .track import Track, load_track

SEED_ENV_VAR = "SHIELD_MPPI_SEED"


class ConfigError(ValueError):
    """Configuration file rejected; message names the key (and line)."""


# key -> (type tag, default); required keys have default None.
_SCHEMA: Dict[str, Tuple[str, object]] = {
    "track": ("path", None),
    "vehicle": ("path", None),
    "controllers": ("kinds", (ControllerKind.SHIELD,)),
    "seeds.count": ("int", 1),
    "seeds.base": ("int", 0),
    "mppi.samples": ("int", 50),
    "mppi.horizon": ("int", 75),
    "mppi.temperature": ("float", 10.0),
    "mppi.noise_std_delta": ("float", 0.08),
    "mppi.noise_std_throttle": ("float", 0.25),
    "mppi.noise_corr": ("float", 0.0),
    "mppi.no_shift": ("bool", False),
    "cost.q_vx": ("float", 2.0),
    "cost.q_vy": ("float", 0.1),
    "cost.q_psidot": ("float", 0.1),
    "cost.q_epsi": ("float", 5.0),
    "cost.q_ey": ("float", 10.0),
    "cost.target_speed": ("float", 5.0),
    "cost.collision_penalty": ("float", 1e4),
    "cost.control_cost_scale": ("float", 1.0),
    "cbf.alpha": ("float", 0.95),
    "cbf.weight": ("float", 1000.0),
    "shield.horizon": ("int", 8),
    "shield.iterations": ("int", 10),
    "shield.step_size": ("float", 0.05),
    "shield.fd_eps": ("float", 1e-5),
    "shield.method": ("str", "gradient"),
    "shield.line_search": ("bool", True),
    "disturbance.enabled": ("bool", True),
    "disturbance.std_vx": ("float", 0.1),
    "disturbance.std_vy": ("float", 0.1),
    "disturbance.std_psidot": ("float", 0.05),
    "disturbance.std_ey": ("float", 0.02),
    "disturbance.std_epsi": ("float", 0.01),
    "episode.timeout": ("float", 60.0),
    "episode.crash_margin": ("float", -1.0),
    "episode.v_stop": ("float", 0.3),
    "episode.t_stop": ("float", 0.5),
    "episode.start_speed": ("float", 2.0),
}

_NUMERIC_TAGS = ("int", "float")


def _parse_scalar(key: str, tag: str, raw: str, lineno: int):
    raw = raw.strip()
    if tag == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key}: expected integer, got {raw!r}") from None
    if tag == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key}: expected number, got {raw!r}") from None
    if tag == "bool":
        lowered = raw.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"line {lineno}: {key}: expected true/false, got {raw!r}")
    if tag == "kinds":
        names = [part.strip() for part in raw.split(",") if part.strip()]
        if not names:
            raise ConfigError(f"line {lineno}: {key}: empty controller list")
        try:
            return tuple(ControllerKind.parse(name) for name in names)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return raw  # str / path


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed study: resolved values, loaded track/vehicle, sweep axes."""

    values: Dict[str, object]
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]
    kinds: Tuple[ControllerKind, ...]
    seeds: Tuple[int, ...]
    track: Track
    vehicle: VehicleParams
    source: Path

    def build(self, overrides: Optional[Dict[str, float]] = None) -> RunBundle:
        """Materialize one grid point into validated runtime objects."""
        merged = dict(self.values)
        for key, value in (overrides or {}).items():
            if key not in _SCHEMA or _SCHEMA[key][0] not in _NUMERIC_TAGS:
                raise ConfigError(f"{key}: not an overridable numeric key")
            if _SCHEMA[key][0] == "int":
                if float(value) != int(float(value)):
                    raise ConfigError(f"{key}: expected integer, got {value}")
                merged[key] = int(float(value))
            else:
                merged[key] = float(value)

        sd = merged["mppi.noise_std_delta"]
        st = merged["mppi.noise_std_throttle"]
        corr = merged["mppi.noise_corr"]
        cov = np.array([
            [sd * sd, corr * sd * st],
            [corr * sd * st, st * st],
        ])
        try:
            mppi_cfg = MppiConfig(
                samples=merged["mppi.samples"],
                horizon=merged["mppi.horizon"],
                noise_cov=cov,
                temperature=merged["mppi.temperature"],
                seed=self.seeds[0] if self.seeds else 0,
                no_shift=merged["mppi.no_shift"],
            )
            q_diag = np.zeros(STATE_DIM)
            q_diag[IX_VX] = merged["cost.q_vx"]
            q_diag[IX_VY] = merged["cost.q_vy"]
            q_diag[IX_PSIDOT] = merged["cost.q_psidot"]
            q_diag[IX_EPSI] = merged["cost.q_epsi"]
            q_diag[IX_EY] = merged["cost.q_ey"]
            cost_params = CostParams(
                q_diag=q_diag,
                target_speed=merged["cost.target_speed"],
                collision_penalty=merged["cost.collision_penalty"],
                temperature=merged["mppi.temperature"],
                control_cost_scale=merged["cost.control_cost_scale"],
            )
            cbf_params = CbfParams(
                alpha=merged["cbf.alpha"],
                weight=merged["cbf.weight"],
            )
            shield_cfg = ShieldConfig(
                horizon=merged["shield.horizon"],
                iterations=merged["shield.iterations"],
                step_size=merged["shield.step_size"],
                fd_eps=merged["shield.fd_eps"],
                method=merged["shield.method"],
                line_search=merged["shield.line_search"],
            )
            stds = np.zeros(STATE_DIM)
            stds[IX_VX] = merged["disturbance.std_vx"]
            stds[IX_VY] = merged["disturbance.std_vy"]
            stds[IX_PSIDOT] = merged["disturbance.std_psidot"]
            stds[IX_EY] = merged["disturbance.std_ey"]
            stds[IX_EPSI] = merged["disturbance.std_epsi"]
            disturbance = DisturbanceModel(
                stds=stds,
                enabled=merged["disturbance.enabled"],
            )
            margin = merged["episode.crash_margin"]
            episode = EpisodeSettings(
                timeout=merged["episode.timeout"],
                crash_margin=None if margin < 0 else margin,
                v_stop=merged["episode.v_stop"],
                t_stop=merged["episode.t_stop"],
                start_speed=merged["episode.start_speed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if ControllerKind.SHIELD in self.kinds and shield_cfg.horizon >= mppi_cfg.horizon:
            raise ConfigError(
                f"shield.horizon ({shield_cfg.horizon}) must be below "
                f"mppi.horizon ({mppi_cfg.horizon})"
            )
        return RunBundle(
            vehicle=self.vehicle,
            track=self.track,
            mppi=mppi_cfg,
            costs=cost_params,
            cbf=cbf_params,
            shield=shield_cfg,
            disturbance=disturbance,
            episode=episode,
        )


def load_config(
    path: Union[str, Path],
    seed_override: Optional[int] = None,
) -> ExperimentConfig:
    """Parse and validate a study file; raises ConfigError on bad content.

    ``seed_override`` replaces the seed base (the CLI wires the
    SHIELD_MPPI_SEED environment variable into it).
    """
    path = Path(path)
    raw_values: Dict[str, object] = {}
    axes: List[Tuple[str, Tuple[float, ...]]] = []
    seen_axes = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key.startswith("sweep."):
                target = key[len("sweep."):]
                if target not in _SCHEMA:
                    raise ConfigError(f"line {lineno}: unknown sweep target {target!r}")
                if _SCHEMA[target][0] not in _NUMERIC_TAGS:
                    raise ConfigError(f"line {lineno}: {target!r} is not sweepable")
                if target in seen_axes:
                    raise ConfigError(f"line {lineno}: duplicate sweep axis {target!r}")
                parts = [p.strip() for p in value.split(",") if p.strip()]
                if not parts:
                    raise ConfigError(f"line {lineno}: empty sweep values for {target!r}")
                try:
                    values = tuple(float(p) for p in parts)
                except ValueError:
                    raise ConfigError(
                        f"line {lineno}: non-numeric sweep value for {target!r}"
                    ) from None
                seen_axes.add(target)
                axes.append((target, values))
                continue
            if key not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in raw_values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw_values[key] = _parse_scalar(key, _SCHEMA[key][0], value, lineno)

    values: Dict[str, object] = {}
    for key, (tag, default) in _SCHEMA.items():
        if key in raw_values:
            values[key] = raw_values[key]
        elif default is None:
            raise ConfigError(f"missing required key {key!r}")
        else:
            values[key] = default

    base = int(values["seeds.base"]) if seed_override is None else int(seed_override)
    count = int(values["seeds.count"])
    if count < 1:
        raise ConfigError(f"seeds.count must be >= 1, got {count}")
    seeds = tuple(range(base, base + count))

    config_dir = path.resolve().parent
    track_path = (config_dir / str(values["track"])).resolve()
    vehicle_path = (config_dir / str(values["vehicle"])).resolve()
    if not track_path.is_file():
        raise ConfigError(f"track: file not found: {track_path}")
    if not vehicle_path.is_file():
        raise ConfigError(f"vehicle: file not found: {vehicle_path}")
    try:
        track = load_track(track_path)
    except ValueError as exc:
        raise ConfigError(f"track: {exc}") from exc
    try:
        vehicle = VehicleParams.from_file(vehicle_path)
    except ValueError as exc:
        raise ConfigError(f"vehicle: {exc}") from exc

    config = ExperimentConfig(
        values=values,
        axes=tuple(axes),
        kinds=tuple(values["controllers"]),
        seeds=seeds,
        track=track,
        vehicle=vehicle,
        source=path.resolve(),
    )
    config.build({})  # fail fast on invalid nested values
    return config


def seed_override_from_env() -> Optional[int]:
    """Read the base-seed override from the environment, if set."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(
            f"{SEED_ENV_VAR} must be an integer, got {raw!r}"
        ) from None
