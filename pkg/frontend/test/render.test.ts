import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { parseAggregates, parseReduction } from "../src/csv.js";
import { renderFig3 } from "../src/fig3.js";
import { renderFig4 } from "../src/fig4.js";
import { renderFig5 } from "../src/fig5.js";
import { fmt, KIND_COLORS } from "../src/svg.js";

function fixture(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), {
    encoding: "utf-8",
  });
}

describe("fmt", () => {
  it("prints stable short decimals", () => {
    expect(fmt(2)).toBe("2");
    expect(fmt(2.5)).toBe("2.5");
    expect(fmt(0.1 + 0.2)).toBe("0.3");
    expect(fmt(-1.25)).toBe("-1.25");
  });

  it("refuses non-finite values", () => {
    expect(() => fmt(Number.NaN)).toThrow();
    expect(() => fmt(Number.POSITIVE_INFINITY)).toThrow();
  });
});

describe("renderFig3", () => {
  const rows = parseAggregates(fixture("fig3_aggregates.csv"));

  it("produces a well-formed SVG with one line per kind", () => {
    const svg = renderFig3(rows);
    expect(svg.startsWith("<?xml")).toBe(true);
    expect(svg).toContain("<svg");
    expect(svg).toContain(KIND_COLORS["mppi"]!);
    expect(svg).toContain(KIND_COLORS["shield"]!);
    expect(svg.endsWith("\n")).toBe(true);
  });

  it("is deterministic", () => {
    expect(renderFig3(rows)).toBe(renderFig3(rows));
  });

  it("rejects an empty table", () => {
    expect(() => renderFig3([])).toThrow();
  });
});

describe("renderFig4", () => {
  const rows = parseAggregates(fixture("fig4_aggregates.csv"));

  it("draws all three layers", () => {
    const svg = renderFig4(rows);
    for (const kind of ["mppi", "cbf", "shield"]) {
      expect(svg).toContain(KIND_COLORS[kind]!);
    }
  });

  it("is deterministic", () => {
    expect(renderFig4(rows)).toBe(renderFig4(rows));
  });

  it("rejects rows missing the sample axis", () => {
    const wrongAxes = parseAggregates(fixture("fig3_aggregates.csv"));
    expect(() => renderFig4(wrongAxes)).toThrow();
  });
});

describe("renderFig5", () => {
  const cells = parseReduction(fixture("fig5_reduction.csv"));

  it("draws one annotated cell per grid point", () => {
    const svg = renderFig5(cells);
    const rects = svg.match(/<rect /g) ?? [];
    // 16 heatmap cells plus the background and the color-key strip.
    expect(rects.length).toBeGreaterThanOrEqual(17);
    expect(svg).toMatch(/[+-]\d/);
  });

  it("is deterministic", () => {
    expect(renderFig5(cells)).toBe(renderFig5(cells));
  });

  it("rejects an empty grid", () => {
    expect(() => renderFig5([])).toThrow();
  });
});
