/**
 * Trajectory overlay: the track boundaries in world coordinates with one
 * episode's path drawn on top, colored by planar speed. Off-track
 * samples are flagged with dots, repaired steps with rings.
 *
 * The log stores track-relative coordinates (progress s, lateral offset
 * e_y); this module rebuilds world positions from the track polyline.
 */
import { interpolateViridis } from "d3-scale-chromatic";
import type { TrackGeometry, TrajectoryPoint } from "./csv.js";
import { document, fmt, tag, textEl } from "./svg.js";

interface Mapper {
  total: number;
  toWorld(s: number, eY: number): [number, number];
  offsetLoop(offset: number): Array<[number, number]>;
}

export function centerlineMapper(track: TrackGeometry): Mapper {
  const pts = track.waypoints;
  const n = pts.length;
  const cum: number[] = new Array(n);
  const segLen: number[] = new Array(n);
  const segDir: Array<[number, number]> = new Array(n);
  let total = 0;
  for (let i = 0; i < n; i += 1) {
    cum[i] = total;
    const a = pts[i]!;
    const b = pts[(i + 1) % n]!;
    const dx = b[0] - a[0];
    const dy = b[1] - a[1];
    const len = Math.hypot(dx, dy);
    if (len <= 0) {
      throw new Error(`track: zero-length segment at waypoint ${i}`);
    }
    segLen[i] = len;
    segDir[i] = [dx / len, dy / len];
    total += len;
  }

  function segmentAt(s: number): number {
    let lo = 0;
    let hi = n - 1;
    while (lo < hi) {
      const mid = (lo + hi + 1) >> 1;
      if (cum[mid]! <= s) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  return {
    total,
    toWorld(s: number, eY: number): [number, number] {
      let wrapped = s % total;
      if (wrapped < 0) {
        wrapped += total;
      }
      const i = segmentAt(wrapped);
      const frac = (wrapped - cum[i]!) / segLen[i]!;
      const a = pts[i]!;
      const [dx, dy] = segDir[i]!;
      const baseX = a[0] + frac * segLen[i]! * dx;
      const baseY = a[1] + frac * segLen[i]! * dy;
      // Positive e_y sits to the left of the direction of travel.
      return [baseX - dy * eY, baseY + dx * eY];
    },
    offsetLoop(offset: number): Array<[number, number]> {
      const loop: Array<[number, number]> = [];
      for (let i = 0; i < n; i += 1) {
        const prev = segDir[(i - 1 + n) % n]!;
        const next = segDir[i]!;
        let nx = -(prev[1] + next[1]);
        let ny = prev[0] + next[0];
        const norm = Math.hypot(nx, ny);
        if (norm > 0) {
          nx /= norm;
          ny /= norm;
        }
        loop.push([pts[i]![0] + nx * offset, pts[i]![1] + ny * offset]);
      }
      loop.push(loop[0]!);
      return loop;
    },
  };
}

const SIZE = 560;
const PAD = 40;

function loopArea(loop: Array<[number, number]>): number {
  let twice = 0;
  for (let i = 1; i < loop.length; i += 1) {
    const [x1, y1] = loop[i - 1]!;
    const [x2, y2] = loop[i]!;
    twice += x1 * y2 - x2 * y1;
  }
  return Math.abs(twice) / 2;
}

export function renderOverlay(
  track: TrackGeometry,
  trajectory: TrajectoryPoint[],
): string {
  if (trajectory.length < 2) {
    throw new Error("overlay: trajectory needs at least 2 samples");
  }
  const mapper = centerlineMapper(track);
  // Which rim is outermost depends on the travel direction, so pick by
  // enclosed area rather than by the sign of the offset.
  const left = mapper.offsetLoop(track.halfWidth);
  const right = mapper.offsetLoop(-track.halfWidth);
  const [outer, inner] =
    loopArea(left) >= loopArea(right) ? [left, right] : [right, left];
  const center = mapper.offsetLoop(0);

  const xs = [...outer, ...inner].map((p) => p[0]);
  const ys = [...outer, ...inner].map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const scale = (SIZE - 2 * PAD) / Math.max(maxX - minX, maxY - minY);
  const width = Math.ceil((maxX - minX) * scale + 2 * PAD);
  const height = Math.ceil((maxY - minY) * scale + 2 * PAD) + 52;
  const toSvg = ([x, y]: [number, number]): [number, number] => [
    PAD + (x - minX) * scale,
    PAD + (maxY - y) * scale,
  ];

  const loopPath = (loop: Array<[number, number]>): string =>
    loop
      .map((p, i) => {
        const [x, y] = toSvg(p);
        return `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(y)}`;
      })
      .join("") + "Z";

  const body: string[] = [
    tag("path", {
      d: loopPath(outer), fill: "#f2f2f2",
      stroke: "#333333", "stroke-width": "1.5",
    }),
    tag("path", {
      d: loopPath(inner), fill: "#ffffff",
      stroke: "#333333", "stroke-width": "1.5",
    }),
    tag("path", {
      d: loopPath(center), fill: "none",
      stroke: "#bbbbbb", "stroke-width": "0.8", "stroke-dasharray": "5,4",
    }),
  ];

  const speeds = trajectory.map((p) => Math.hypot(p.vX, p.vY));
  const vMax = Math.max(1e-9, ...speeds);
  const world = trajectory.map((p) => toSvg(mapper.toWorld(p.s, p.eY)));
  for (let i = 1; i < world.length; i += 1) {
    const [x1, y1] = world[i - 1]!;
    const [x2, y2] = world[i]!;
    const v = 0.5 * (speeds[i - 1]! + speeds[i]!);
    body.push(tag("line", {
      x1, y1, x2, y2,
      stroke: interpolateViridis(v / vMax), "stroke-width": "2.2",
      "stroke-linecap": "round",
    }));
  }

  trajectory.forEach((p, i) => {
    const [cx, cy] = world[i]!;
    if (p.h < 0) {
      body.push(tag("circle", {
        cx, cy, r: 3.2, fill: "#d11a1a", stroke: "#7a0000",
        "stroke-width": "0.8",
      }));
    } else if (p.repaired) {
      body.push(tag("circle", {
        cx, cy, r: 2.6, fill: "none", stroke: "#1145c9",
        "stroke-width": "1.2",
      }));
    }
  });

  const [startX, startY] = world[0]!;
  body.push(
    tag("circle", {
      cx: startX, cy: startY, r: 4, fill: "#ffffff",
      stroke: "#111111", "stroke-width": "1.5",
    }),
    textEl(startX + 7, startY - 6, "start", {
      "font-size": "10", fill: "#111111",
    }),
  );

  // Speed key plus marker explanations along the bottom edge.
  const keyY = height - 30;
  const keyW = 160;
  const steps = 32;
  for (let i = 0; i < steps; i += 1) {
    body.push(tag("rect", {
      x: PAD + (i * keyW) / steps, y: keyY,
      width: keyW / steps + 0.5, height: 9,
      fill: interpolateViridis(i / (steps - 1)),
    }));
  }
  body.push(
    textEl(PAD, keyY + 21, "0", {
      "text-anchor": "middle", "font-size": "9", fill: "#333333",
    }),
    textEl(PAD + keyW, keyY + 21, `${fmt(vMax)} m/s`, {
      "text-anchor": "middle", "font-size": "9", fill: "#333333",
    }),
    tag("circle", {
      cx: PAD + keyW + 46, cy: keyY + 5, r: 3.2, fill: "#d11a1a",
      stroke: "#7a0000", "stroke-width": "0.8",
    }),
    textEl(PAD + keyW + 54, keyY + 8, "off track", {
      "font-size": "9", fill: "#333333",
    }),
    tag("circle", {
      cx: PAD + keyW + 118, cy: keyY + 5, r: 2.6, fill: "none",
      stroke: "#1145c9", "stroke-width": "1.2",
    }),
    textEl(PAD + keyW + 126, keyY + 8, "repaired step", {
      "font-size": "9", fill: "#333333",
    }),
  );
  return document(width, height, body);
}
