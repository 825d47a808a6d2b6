/**
 * Reduction heat map: per (samples, horizon) cell, how much collision
 * rate the repair layer removes on top of the barrier-cost layer.
 * Cells are annotated with the reduction and the underlying two rates.
 */
import { interpolateRdYlGn } from "d3-scale-chromatic";
import type { ReductionCell } from "./csv.js";
import { document, fmt, tag, textEl, uniqueSorted } from "./svg.js";

const CELL_W = 108;
const CELL_H = 74;
const MARGIN_L = 86;
const MARGIN_T = 56;

function signed(value: number): string {
  return value >= 0 ? `+${fmt(value)}` : fmt(value);
}

export function renderFig5(cells: ReductionCell[]): string {
  if (cells.length === 0) {
    throw new Error("fig5: no reduction cells");
  }
  const samples = uniqueSorted(cells.map((c) => c.samples));
  const horizons = uniqueSorted(cells.map((c) => c.horizon));
  const byCell = new Map<string, ReductionCell>();
  for (const cell of cells) {
    byCell.set(`${cell.samples}x${cell.horizon}`, cell);
  }

  const amax = Math.max(0.05, ...cells.map((c) => Math.abs(c.reduction)));
  const color = (reduction: number): string =>
    interpolateRdYlGn(0.5 + 0.5 * (reduction / amax));

  const width = MARGIN_L + samples.length * CELL_W + 30;
  const height = MARGIN_T + horizons.length * CELL_H + 96;
  const body: string[] = [
    textEl(width / 2, 22, "Collision-rate reduction from the repair layer", {
      "text-anchor": "middle", "font-size": "14", fill: "#111111",
    }),
    textEl(width / 2, 38, "cell = rate(barrier cost only) − rate(barrier cost + repair)", {
      "text-anchor": "middle", "font-size": "10", fill: "#555555",
    }),
  ];

  horizons.forEach((horizon, row) => {
    const y = MARGIN_T + row * CELL_H;
    body.push(textEl(MARGIN_L - 10, y + CELL_H / 2 + 3, fmt(horizon), {
      "text-anchor": "end", "font-size": "11", fill: "#333333",
    }));
    samples.forEach((sampleCount, col) => {
      const x = MARGIN_L + col * CELL_W;
      const cell = byCell.get(`${sampleCount}x${horizon}`);
      if (cell === undefined) {
        body.push(tag("rect", {
          x, y, width: CELL_W - 2, height: CELL_H - 2,
          fill: "#eeeeee", stroke: "#bbbbbb", "stroke-width": "1",
        }));
        body.push(textEl(x + CELL_W / 2 - 1, y + CELL_H / 2 + 3, "missing", {
          "text-anchor": "middle", "font-size": "10", fill: "#999999",
        }));
        return;
      }
      body.push(tag("rect", {
        x, y, width: CELL_W - 2, height: CELL_H - 2,
        fill: color(cell.reduction), stroke: "#ffffff", "stroke-width": "1",
      }));
      body.push(textEl(x + CELL_W / 2 - 1, y + CELL_H / 2 - 4,
                       signed(cell.reduction), {
                         "text-anchor": "middle", "font-size": "13",
                         "font-weight": "bold", fill: "#111111",
                       }));
      body.push(textEl(x + CELL_W / 2 - 1, y + CELL_H / 2 + 14,
                       `${fmt(cell.cbfRate)} → ${fmt(cell.shieldRate)}`, {
                         "text-anchor": "middle", "font-size": "10",
                         fill: "#222222",
                       }));
    });
  });

  samples.forEach((sampleCount, col) => {
    const x = MARGIN_L + col * CELL_W + CELL_W / 2 - 1;
    body.push(textEl(x, MARGIN_T + horizons.length * CELL_H + 16,
                     fmt(sampleCount), {
                       "text-anchor": "middle", "font-size": "11",
                       fill: "#333333",
                     }));
  });
  body.push(
    textEl(MARGIN_L + (samples.length * CELL_W) / 2,
           MARGIN_T + horizons.length * CELL_H + 34, "samples per step", {
             "text-anchor": "middle", "font-size": "11", fill: "#111111",
           }),
    textEl(0, 0, "horizon (steps)", {
      "text-anchor": "middle", "font-size": "11", fill: "#111111",
      transform: `translate(${fmt(MARGIN_L - 56)},${fmt(
        MARGIN_T + (horizons.length * CELL_H) / 2)}) rotate(-90)`,
    }),
  );

  // Color key: worst observed harm to best observed reduction.
  const keyY = MARGIN_T + horizons.length * CELL_H + 52;
  const steps = 40;
  const keyW = 240;
  for (let i = 0; i < steps; i += 1) {
    const value = -amax + (2 * amax * i) / (steps - 1);
    body.push(tag("rect", {
      x: MARGIN_L + (i * keyW) / steps, y: keyY,
      width: keyW / steps + 0.5, height: 10, fill: color(value),
    }));
  }
  body.push(
    textEl(MARGIN_L, keyY + 22, signed(-amax), {
      "text-anchor": "middle", "font-size": "9", fill: "#333333",
    }),
    textEl(MARGIN_L + keyW / 2, keyY + 22, "0", {
      "text-anchor": "middle", "font-size": "9", fill: "#333333",
    }),
    textEl(MARGIN_L + keyW, keyY + 22, signed(amax), {
      "text-anchor": "middle", "font-size": "9", fill: "#333333",
    }),
  );
  return document(width, height, body);
}
