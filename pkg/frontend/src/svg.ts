/**
 * Minimal deterministic SVG assembly.
 *
 * Every figure is a plain string: fixed attribute order, fixed number
 * formatting (up to three decimals, trailing zeros stripped), no
 * timestamps — the same input always yields the same bytes.
 */
import { scaleLinear, type ScaleLinear } from "d3-scale";

export const KIND_COLORS: Record<string, string> = {
  mppi: "#c23b22",
  cbf: "#e08a1e",
  shield: "#2d7f3f",
  pt: "#34559c",
};

export const KIND_LABELS: Record<string, string> = {
  mppi: "MPPI",
  cbf: "CBF-MPPI",
  shield: "Shield-MPPI",
  pt: "PT-MPPI",
};

export function fmt(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`cannot place non-finite coordinate ${value}`);
  }
  const rounded = value.toFixed(3);
  return rounded.includes(".")
    ? rounded.replace(/\.?0+$/, "") || "0"
    : rounded;
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  body?: string,
): string {
  const parts = Object.entries(attrs).map(
    ([key, value]) =>
      `${key}="${typeof value === "number" ? fmt(value) : value}"`,
  );
  const open = `<${name}${parts.length ? " " + parts.join(" ") : ""}`;
  return body === undefined ? `${open}/>` : `${open}>${body}</${name}>`;
}

export function textEl(
  x: number,
  y: number,
  content: string,
  attrs: Record<string, string | number> = {},
): string {
  return tag("text", { x, y, ...attrs }, esc(content));
}

export function polyline(
  points: Array<[number, number]>,
  attrs: Record<string, string | number>,
): string {
  const path = points
    .map(([x, y], i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(y)}`)
    .join("");
  return tag("path", { d: path, ...attrs });
}

export function document(
  width: number,
  height: number,
  body: string[],
): string {
  return [
    `<?xml version="1.0" encoding="UTF-8"?>`,
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    tag("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }),
    ...body,
    `</svg>`,
    ``,
  ].join("\n");
}

export interface Frame {
  x0: number;
  y0: number;
  width: number;
  height: number;
  xScale: ScaleLinear<number, number>;
  yScale: ScaleLinear<number, number>;
}

export function frame(
  x0: number,
  y0: number,
  width: number,
  height: number,
  xDomain: [number, number],
  yDomain: [number, number],
): Frame {
  return {
    x0,
    y0,
    width,
    height,
    xScale: scaleLinear().domain(xDomain).range([x0, x0 + width]),
    yScale: scaleLinear().domain(yDomain).range([y0 + height, y0]),
  };
}

/** Axis lines, ticks, and tick labels for a frame. */
export function axes(
  f: Frame,
  xLabel: string,
  yLabel: string,
  options: { xTicks?: number[]; yTicks?: number[] } = {},
): string[] {
  const parts: string[] = [];
  const bottom = f.y0 + f.height;
  parts.push(
    tag("path", {
      d: `M${fmt(f.x0)},${fmt(f.y0)}L${fmt(f.x0)},${fmt(bottom)}L${fmt(f.x0 + f.width)},${fmt(bottom)}`,
      fill: "none",
      stroke: "#333333",
      "stroke-width": "1",
    }),
  );
  const xTicks = options.xTicks ?? f.xScale.ticks(5);
  for (const t of xTicks) {
    const x = f.xScale(t);
    parts.push(
      tag("line", {
        x1: x, y1: bottom, x2: x, y2: bottom + 4,
        stroke: "#333333", "stroke-width": "1",
      }),
      textEl(x, bottom + 16, fmt(t), {
        "text-anchor": "middle", "font-size": "10", fill: "#333333",
      }),
    );
  }
  const yTicks = options.yTicks ?? f.yScale.ticks(5);
  for (const t of yTicks) {
    const y = f.yScale(t);
    parts.push(
      tag("line", {
        x1: f.x0 - 4, y1: y, x2: f.x0, y2: y,
        stroke: "#333333", "stroke-width": "1",
      }),
      textEl(f.x0 - 7, y + 3, fmt(t), {
        "text-anchor": "end", "font-size": "10", fill: "#333333",
      }),
    );
  }
  parts.push(
    textEl(f.x0 + f.width / 2, bottom + 32, xLabel, {
      "text-anchor": "middle", "font-size": "11", fill: "#111111",
    }),
    textEl(0, 0, yLabel, {
      "text-anchor": "middle", "font-size": "11", fill: "#111111",
      transform: `translate(${fmt(f.x0 - 34)},${fmt(f.y0 + f.height / 2)}) rotate(-90)`,
    }),
  );
  return parts;
}

/** One swatch+label per kind, laid out horizontally. */
export function legend(
  x: number,
  y: number,
  kinds: string[],
): string[] {
  const parts: string[] = [];
  let cursor = x;
  for (const kind of kinds) {
    const color = KIND_COLORS[kind] ?? "#777777";
    const label = KIND_LABELS[kind] ?? kind;
    parts.push(
      tag("rect", {
        x: cursor, y: y - 8, width: 14, height: 8, fill: color,
      }),
      textEl(cursor + 18, y, label, { "font-size": "10", fill: "#111111" }),
    );
    cursor += 18 + 7 * label.length + 14;
  }
  return parts;
}

export function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}
