/**
 * Cost-sensitivity chart: collision rate (with 95% CI bands) versus the
 * lane-keeping weight, one panel per target speed, one series per
 * controller kind.
 */
import type { AggregateRow } from "./csv.js";
import {
  KIND_COLORS,
  axes,
  document,
  fmt,
  frame,
  legend,
  polyline,
  tag,
  textEl,
  uniqueSorted,
} from "./svg.js";

const X_AXIS = "cost.q_ey";
const PANEL_AXIS = "cost.target_speed";

const PANEL_W = 240;
const PANEL_H = 190;
const MARGIN_L = 56;
const MARGIN_T = 46;
const GAP = 34;

export function renderFig3(rows: AggregateRow[]): string {
  if (rows.length === 0) {
    throw new Error("fig3: no aggregate rows");
  }
  for (const axis of [X_AXIS, PANEL_AXIS]) {
    if (!(axis in rows[0]!.axes)) {
      throw new Error(`fig3: aggregates are missing the ${axis} sweep axis`);
    }
  }
  const speeds = uniqueSorted(rows.map((r) => r.axes[PANEL_AXIS]!));
  const weights = uniqueSorted(rows.map((r) => r.axes[X_AXIS]!));
  const kinds = [...new Set(rows.map((r) => r.kind))].sort();

  const width = MARGIN_L + speeds.length * (PANEL_W + GAP);
  const height = MARGIN_T + PANEL_H + 64;
  const body: string[] = [
    textEl(width / 2, 20, "Collision rate vs lane-keeping weight", {
      "text-anchor": "middle", "font-size": "14", fill: "#111111",
    }),
    ...legend(MARGIN_L, 36, kinds),
  ];

  speeds.forEach((speed, p) => {
    const f = frame(
      MARGIN_L + p * (PANEL_W + GAP), MARGIN_T,
      PANEL_W, PANEL_H,
      [weights[0]!, weights[weights.length - 1]!],
      [0, 1],
    );
    body.push(...axes(f, "lane-keeping weight q_ey",
                      p === 0 ? "collision rate" : "",
                      { xTicks: weights, yTicks: [0, 0.25, 0.5, 0.75, 1] }));
    body.push(textEl(f.x0 + PANEL_W / 2, MARGIN_T - 8,
                     `target speed ${fmt(speed)} m/s`, {
                       "text-anchor": "middle", "font-size": "11",
                       fill: "#333333",
                     }));
    for (const kind of kinds) {
      const series = rows
        .filter((r) => r.kind === kind && r.axes[PANEL_AXIS] === speed)
        .sort((a, b) => a.axes[X_AXIS]! - b.axes[X_AXIS]!);
      if (series.length === 0) {
        continue;
      }
      const color = KIND_COLORS[kind] ?? "#777777";
      const upper = series.map((r): [number, number] => [
        f.xScale(r.axes[X_AXIS]!),
        f.yScale(Math.min(1, r.collisionRate + r.collisionRateCi95)),
      ]);
      const lower = series.map((r): [number, number] => [
        f.xScale(r.axes[X_AXIS]!),
        f.yScale(Math.max(0, r.collisionRate - r.collisionRateCi95)),
      ]);
      const band = [...upper, ...lower.reverse()]
        .map(([x, y], i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(y)}`)
        .join("") + "Z";
      body.push(tag("path", { d: band, fill: color, "fill-opacity": "0.15" }));
      body.push(polyline(
        series.map((r): [number, number] => [
          f.xScale(r.axes[X_AXIS]!), f.yScale(r.collisionRate),
        ]),
        { fill: "none", stroke: color, "stroke-width": "1.6" },
      ));
      for (const r of series) {
        body.push(tag("circle", {
          cx: f.xScale(r.axes[X_AXIS]!), cy: f.yScale(r.collisionRate),
          r: 2.4, fill: color,
        }));
      }
    }
  });
  return document(width, height, body);
}
