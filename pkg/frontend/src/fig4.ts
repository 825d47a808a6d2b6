/**
 * Budget-trend chart: collision rate versus sample count with 95% CI
 * error bars, one panel per control horizon, one series per kind.
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

const X_AXIS = "mppi.samples";
const PANEL_AXIS = "mppi.horizon";

const PANEL_W = 230;
const PANEL_H = 190;
const MARGIN_L = 56;
const MARGIN_T = 46;
const GAP = 34;

export function renderFig4(rows: AggregateRow[]): string {
  if (rows.length === 0) {
    throw new Error("fig4: no aggregate rows");
  }
  for (const axis of [X_AXIS, PANEL_AXIS]) {
    if (!(axis in rows[0]!.axes)) {
      throw new Error(`fig4: aggregates are missing the ${axis} sweep axis`);
    }
  }
  const horizons = uniqueSorted(rows.map((r) => r.axes[PANEL_AXIS]!));
  const samples = uniqueSorted(rows.map((r) => r.axes[X_AXIS]!));
  const kinds = [...new Set(rows.map((r) => r.kind))].sort();

  const width = MARGIN_L + horizons.length * (PANEL_W + GAP);
  const height = MARGIN_T + PANEL_H + 64;
  const body: string[] = [
    textEl(width / 2, 20, "Collision rate vs sampling budget", {
      "text-anchor": "middle", "font-size": "14", fill: "#111111",
    }),
    ...legend(MARGIN_L, 36, kinds),
  ];

  horizons.forEach((horizon, p) => {
    const f = frame(
      MARGIN_L + p * (PANEL_W + GAP), MARGIN_T,
      PANEL_W, PANEL_H,
      [samples[0]!, samples[samples.length - 1]!],
      [0, 1],
    );
    body.push(...axes(f, "samples per step",
                      p === 0 ? "collision rate" : "",
                      { xTicks: samples, yTicks: [0, 0.25, 0.5, 0.75, 1] }));
    body.push(textEl(f.x0 + PANEL_W / 2, MARGIN_T - 8,
                     `horizon ${fmt(horizon)} steps`, {
                       "text-anchor": "middle", "font-size": "11",
                       fill: "#333333",
                     }));
    for (const kind of kinds) {
      const series = rows
        .filter((r) => r.kind === kind && r.axes[PANEL_AXIS] === horizon)
        .sort((a, b) => a.axes[X_AXIS]! - b.axes[X_AXIS]!);
      if (series.length === 0) {
        continue;
      }
      const color = KIND_COLORS[kind] ?? "#777777";
      body.push(polyline(
        series.map((r): [number, number] => [
          f.xScale(r.axes[X_AXIS]!), f.yScale(r.collisionRate),
        ]),
        { fill: "none", stroke: color, "stroke-width": "1.6" },
      ));
      for (const r of series) {
        const x = f.xScale(r.axes[X_AXIS]!);
        const yLo = f.yScale(Math.max(0, r.collisionRate - r.collisionRateCi95));
        const yHi = f.yScale(Math.min(1, r.collisionRate + r.collisionRateCi95));
        body.push(
          tag("line", {
            x1: x, y1: yLo, x2: x, y2: yHi,
            stroke: color, "stroke-width": "1",
          }),
          tag("line", {
            x1: x - 3, y1: yHi, x2: x + 3, y2: yHi,
            stroke: color, "stroke-width": "1",
          }),
          tag("line", {
            x1: x - 3, y1: yLo, x2: x + 3, y2: yLo,
            stroke: color, "stroke-width": "1",
          }),
          tag("circle", {
            cx: x, cy: f.yScale(r.collisionRate), r: 2.4, fill: color,
          }),
        );
      }
    }
  });
  return document(width, height, body);
}
