#!/usr/bin/env python3
"""Regenerate the packaged track files.

Three closed circuits, written as centerline waypoint CSVs:

  course.csv   the default benchmark course: a rounded rectangle with
               alternating 3.5 m and 5.0 m corners, plus a chicane in the
               back straight. The tight corners cap cornering speed around
               5.5 m/s (steering-limited), so a 7 m/s target forces real
               braking zones; the chicane's centerline jinks 1.3 m sideways,
               which punishes controllers that ignore lateral error.
  stadium.csv  two 20 m straights joined by 6 m half-circles.
  speedway.csv stadium stretched to 60 m straights with a wider lane;
               gentle enough that no braking is ever needed at 7 m/s.
  circle.csv   constant-curvature 10 m circle (smoke tests).

Waypoints start mid-straight so episodes begin on a straight, and are
spaced about 0.25 m apart. The loader closes the loop implicitly, so the
first point is not repeated at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "shield_mppi" / "data" / "tracks"
SPACING = 0.25  # m between waypoints


@dataclass(frozen=True)
class Straight:
    length: float


@dataclass(frozen=True)
class Arc:
    radius: float
    angle: float  # signed, radians; positive = left turn


Segment = Tuple[str, float, float]


def _segment_length(seg) -> float:
    if isinstance(seg, Straight):
        return seg.length
    return abs(seg.angle) * seg.radius


def sample_path(segments: List, n: int) -> List[Tuple[float, float]]:
    """n points evenly spaced in arclength along the segment chain."""
    lengths = [_segment_length(s) for s in segments]
    total = sum(lengths)
    # Precompute each segment's start pose.
    poses = []
    x, y, heading = 0.0, 0.0, 0.0
    for seg in segments:
        poses.append((x, y, heading))
        if isinstance(seg, Straight):
            x += seg.length * math.cos(heading)
            y += seg.length * math.sin(heading)
        else:
            sign = 1.0 if seg.angle >= 0 else -1.0
            cx = x - sign * seg.radius * math.sin(heading)
            cy = y + sign * seg.radius * math.cos(heading)
            phi = math.atan2(y - cy, x - cx) + seg.angle
            x = cx + seg.radius * math.cos(phi)
            y = cy + seg.radius * math.sin(phi)
            heading += seg.angle
    closure = math.hypot(x, y)
    if closure > 1e-9:
        raise ValueError(f"segment chain does not close (gap {closure:.3e} m)")

    points = []
    for i in range(n):
        s = total * i / n
        for seg, length, (px, py, ph) in zip(segments, lengths, poses):
            if s > length:
                s -= length
                continue
            if isinstance(seg, Straight):
                points.append((px + s * math.cos(ph), py + s * math.sin(ph)))
            else:
                sign = 1.0 if seg.angle >= 0 else -1.0
                cx = px - sign * seg.radius * math.sin(ph)
                cy = py + sign * seg.radius * math.cos(ph)
                phi0 = math.atan2(py - cy, px - cx)
                phi = phi0 + sign * s / seg.radius
                points.append((cx + seg.radius * math.cos(phi),
                               cy + seg.radius * math.sin(phi)))
            break
    return points


def write_track(name: str, half_width: float, segments: List) -> None:
    total = sum(_segment_length(s) for s in segments)
    n = max(8, int(round(total / SPACING)))
    points = sample_path(segments, n)
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    path = OUT_DIR / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"half_width,{half_width}\n")
        for x, y in points:
            fh.write(f"{x:.6f},{y:.6f}\n")
        # Explicit closure: repeat the first waypoint so loaders can verify
        # the loop comes back around.
        fh.write(f"{points[0][0]:.6f},{points[0][1]:.6f}\n")
    print(f"wrote {path} ({n} waypoints, length {total:.2f} m)")


def main() -> None:
    quarter = math.pi / 2
    eighth = math.pi / 4
    # Closure: opposite straights must differ by the signed corner-radius
    # sums; with radii alternating 3.5/5.0 the differences cancel. The
    # chicane (45/-90/45 deg arcs at 4.5 m) has zero net heading and zero
    # net lateral displacement, advancing 4 * 4.5 * sin 45 = 12.73 m along
    # the straight it replaces.
    jink_advance = 4 * 4.5 * math.sin(eighth)
    pad = (14.0 - jink_advance) / 2.0
    # The lap leads with gentle corners (5.0 and 4.2 m radii, which the
    # car can take at racing speed) and saves the chicane plus the single
    # tight 3.5 m corner for the end, so failures land late in the lap
    # instead of stacking at the start. Closure for quarter-turn corners
    # r1..r4 with straights a..d between them requires
    # c = a + r1 - r2 - r3 + r4 and d = b + r1 + r2 - r3 - r4.
    course = [
        Straight(8.0),
        Arc(5.0, quarter),
        Straight(13.3),           # bottom straight
        Arc(4.2, quarter),
        Straight(7.3),
        Arc(5.0, quarter),
        Straight(pad),            # back straight with a chicane in it
        Arc(4.5, eighth),
        Arc(4.5, -quarter),
        Arc(4.5, eighth),
        Straight(pad),
        Arc(3.5, quarter),
    ]
    stadium = [
        Straight(10.0),
        Arc(6.0, math.pi),
        Straight(20.0),
        Arc(6.0, math.pi),
        Straight(10.0),
    ]
    speedway = [
        Straight(30.0),
        Arc(6.0, math.pi),
        Straight(60.0),
        Arc(6.0, math.pi),
        Straight(30.0),
    ]
    circle = [Arc(10.0, 2.0 * math.pi)]

    write_track("course.csv", 1.2, course)
    write_track("stadium.csv", 1.2, stadium)
    write_track("speedway.csv", 1.5, speedway)
    write_track("circle.csv", 1.2, circle)


if __name__ == "__main__":
    main()
