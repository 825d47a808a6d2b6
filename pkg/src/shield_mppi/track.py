"""Closed racing-track geometry.

A track is a closed centerline polyline with a constant half-width. All
vehicle state is expressed in curvilinear coordinates relative to it:
``s`` is arclength progress along the centerline, ``e_y`` the signed
lateral deviation (positive to the left of travel) and ``e_psi`` the
heading error. The loop closes implicitly from the last waypoint back to
the first.

Track files are plain comma-separated text::

    half_width,1.2
    0.0,0.0
    5.0,0.0
    ...

one ``x,y`` waypoint row per line after the header. The final row must
repeat the first waypoint — loops that fail to come back around are
rejected — and the duplicate is dropped after the check.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TextIO, Union

import numpy as np

CLOSURE_TOL = 1e-6  # relative to total length; duplicate-endpoint detection


class TrackFormatError(ValueError):
    """Raised when a track file cannot be parsed; message names the line."""


class TrackGeometryError(ValueError):
    """Raised when parsed waypoints do not form a usable closed loop."""


@dataclass(frozen=True)
class Track:
    """Immutable closed-loop track; safe to share across rollout workers.

    ``cum_arclength[i]`` is the distance along the centerline from waypoint 0
    to waypoint i; the implicit closing segment brings the total to
    ``total_length``. ``curvature[i]`` is the signed curvature (positive for
    left turns) estimated at waypoint i.
    """

    waypoints: np.ndarray        # (N, 2) planar points, m
    cum_arclength: np.ndarray    # (N,) strictly increasing, starts at 0, m
    curvature: np.ndarray        # (N,) signed, 1/m
    half_width: float            # m
    total_length: float          # m

    def __post_init__(self):
        n = self.waypoints.shape[0]
        if n < 4:
            raise TrackGeometryError(f"need at least 4 waypoints, got {n}")
        if self.half_width <= 0:
            raise TrackGeometryError(f"half_width must be > 0, got {self.half_width}")
        if self.total_length <= 0:
            raise TrackGeometryError("total_length must be > 0")
        s = self.cum_arclength
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise TrackGeometryError("cum_arclength must start at 0 and strictly increase")
        if not np.all(np.isfinite(self.curvature)):
            raise TrackGeometryError("curvature must be finite at every waypoint")
        self.waypoints.setflags(write=False)
        self.cum_arclength.setflags(write=False)
        self.curvature.setflags(write=False)


def _signed_menger_curvature(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> float:
    """Curvature of the circle through three points, signed by turn direction."""
    a = p1 - p0
    b = p2 - p1
    c = p2 - p0
    la = float(np.hypot(a[0], a[1]))
    lb = float(np.hypot(b[0], b[1]))
    lc = float(np.hypot(c[0], c[1]))
    denom = la * lb * lc
    if denom < 1e-12:
        return 0.0
    cross = float(a[0] * b[1] - a[1] * b[0])
    return 2.0 * cross / denom


def _compute_curvature(waypoints: np.ndarray) -> np.ndarray:
    n = waypoints.shape[0]
    kappa = np.empty(n)
    for i in range(n):
        kappa[i] = _signed_menger_curvature(
            waypoints[i - 1], waypoints[i], waypoints[(i + 1) % n]
        )
    return kappa


def load_track(source: Union[str, Path, TextIO]) -> Track:
    """Load a track from a file path or text stream.

    Arclength is the cumulative polyline length, curvature the three-point
    circumscribed-circle estimate over the closed loop.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_track(fh)

    lines = source.read().splitlines()
    header = None
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if header is None:
            if len(parts) != 2 or parts[0] != "half_width":
                raise TrackFormatError(
                    f"line {lineno}: expected header 'half_width,<value>', got {raw!r}"
                )
            try:
                header = float(parts[1])
            except ValueError:
                raise TrackFormatError(f"line {lineno}: bad half_width value {parts[1]!r}") from None
            continue
        if len(parts) != 2:
            raise TrackFormatError(f"line {lineno}: expected 'x,y', got {raw!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise TrackFormatError(f"line {lineno}: non-numeric waypoint {raw!r}") from None

    if header is None:
        raise TrackFormatError("missing 'half_width,<value>' header")

    pts = np.asarray(rows, dtype=float)
    if pts.size and not np.all(np.isfinite(pts)):
        raise TrackGeometryError("waypoints must be finite")
    if pts.shape[0] >= 2:
        # Files are explicitly closed (final waypoint repeats the first);
        # drop the duplicate and reject loops that do not come back around.
        perimeter = np.sum(np.hypot(*np.diff(pts, axis=0).T))
        gap = float(np.hypot(*(pts[-1] - pts[0])))
        if perimeter > 0 and gap > CLOSURE_TOL * perimeter:
            raise TrackGeometryError(
                f"loop does not close: endpoint gap {gap:.6g} exceeds "
                f"{CLOSURE_TOL:g} of the {perimeter:.6g} m perimeter"
            )
        pts = pts[:-1]
    if pts.shape[0] < 4:
        raise TrackGeometryError(f"need at least 4 waypoints, got {pts.shape[0]}")

    seg = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(seg <= 0):
        bad = int(np.argmin(seg)) + 1
        raise TrackGeometryError(f"zero-length segment at waypoint {bad}")
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    closing = float(np.hypot(*(pts[0] - pts[-1])))
    if closing <= 0:
        raise TrackGeometryError("closing segment has zero length")
    total = float(cum[-1] + closing)

    return Track(
        waypoints=pts,
        cum_arclength=cum,
        curvature=_compute_curvature(pts),
        half_width=float(header),
        total_length=total,
    )


def wrap_s(track: Track, s: float) -> float:
    """Wrap centerline progress into [0, total_length)."""
    wrapped = float(np.mod(s, track.total_length))
    # np.mod can round up to the modulus itself for tiny negative inputs;
    # fold that edge back so the half-open range holds exactly.
    return 0.0 if wrapped >= track.total_length else wrapped


def curvature_at(track: Track, s: float) -> float:
    """Signed curvature at wrapped arclength s, linearly interpolated."""
    return float(
        np.interp(
            wrap_s(track, s),
            track.cum_arclength,
            track.curvature,
            period=track.total_length,
        )
    )


def inside_track(track: Track, e_y: float) -> bool:
    """True iff lateral deviation stays within the half-width (boundary inclusive)."""
    return abs(e_y) <= track.half_width


def position_at(track: Track, s: float, e_y: float = 0.0) -> np.ndarray:
    """Lift curvilinear (s, e_y) to a Cartesian point.

    The centerline point at s plus e_y along the left normal of the segment
    containing s. Used only for export and plotting; simulation stays in
    curvilinear coordinates.
    """
    sw = wrap_s(track, s)
    cum = track.cum_arclength
    pts = track.waypoints
    n = pts.shape[0]
    i = int(np.searchsorted(cum, sw, side="right")) - 1
    i = max(0, min(i, n - 1))
    p0 = pts[i]
    p1 = pts[(i + 1) % n]
    seg_len = (track.total_length - cum[i]) if i == n - 1 else (cum[i + 1] - cum[i])
    t = (sw - cum[i]) / seg_len
    tangent = (p1 - p0) / seg_len
    normal = np.array([-tangent[1], tangent[0]])
    return p0 + t * (p1 - p0) + e_y * normal


def boundary_polylines(track: Track, samples_per_segment: int = 1):
    """Left and right boundary polylines, for plotting and export."""
    ss = []
    for i in range(track.waypoints.shape[0]):
        s0 = track.cum_arclength[i]
        s1 = track.total_length if i == track.waypoints.shape[0] - 1 else track.cum_arclength[i + 1]
        for j in range(samples_per_segment):
            ss.append(s0 + (s1 - s0) * j / samples_per_segment)
    left = np.array([position_at(track, s, track.half_width) for s in ss])
    right = np.array([position_at(track, s, -track.half_width) for s in ss])
    return left, right
