"""Shared fixtures: threads pinned before numba loads, canned tracks, params."""
import io
import math
import os

os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from shield_mppi.dynamics import VehicleParams
from shield_mppi.track import Track, load_track

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "shield_mppi", "data")


def circle_track_text(radius: float, n: int = 360, half_width: float = 1.0) -> str:
    lines = [f"half_width,{half_width}"]
    for i in range(n):
        th = 2.0 * math.pi * i / n
        lines.append(f"{radius * math.cos(th):.12f},{radius * math.sin(th):.12f}")
    lines.append(lines[1])  # close the loop explicitly
    return "\n".join(lines) + "\n"


def stadium_track_text(straight: float = 40.0, radius: float = 8.0,
                       half_width: float = 1.0, ds: float = 0.25) -> str:
    """Counter-clockwise stadium: straight, half circle, straight, half circle."""
    pts = []
    x = -straight / 2.0
    n_straight = int(round(straight / ds))
    for i in range(n_straight):
        pts.append((x + i * ds, -radius))
    n_arc = int(round(math.pi * radius / ds))
    cx = straight / 2.0
    for i in range(n_arc):
        th = -math.pi / 2.0 + math.pi * i / n_arc
        pts.append((cx + radius * math.cos(th), radius * math.sin(th)))
    for i in range(n_straight):
        pts.append((straight / 2.0 - i * ds, radius))
    cx = -straight / 2.0
    for i in range(n_arc):
        th = math.pi / 2.0 + math.pi * i / n_arc
        pts.append((cx + radius * math.cos(th), radius * math.sin(th)))
    pts.append(pts[0])  # close the loop explicitly
    lines = [f"half_width,{half_width}"]
    lines += [f"{px:.12f},{py:.12f}" for px, py in pts]
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def circle_track() -> Track:
    return load_track(io.StringIO(circle_track_text(10.0, 360, 1.0)))


@pytest.fixture(scope="session")
def stadium_track() -> Track:
    return load_track(io.StringIO(stadium_track_text()))


@pytest.fixture(scope="session")
def course_track() -> Track:
    return load_track(os.path.join(DATA_DIR, "tracks", "course.csv"))


@pytest.fixture(scope="session")
def vehicle() -> VehicleParams:
    return VehicleParams()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
