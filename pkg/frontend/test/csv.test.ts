import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  CsvFormatError,
  parseAggregates,
  parseEpisodes,
  parseReduction,
  parseTrack,
  parseTrajectory,
} from "../src/csv.js";

function fixture(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), {
    encoding: "utf-8",
  });
}

describe("parseAggregates", () => {
  it("discovers the sweep axes between kind and episodes", () => {
    const rows = parseAggregates(fixture("fig4_aggregates.csv"));
    expect(rows).toHaveLength(12);
    for (const row of rows) {
      expect(Object.keys(row.axes)).toEqual(["mppi.samples", "mppi.horizon"]);
      expect(row.episodes).toBe(3);
      expect(row.crashRate).toBeGreaterThanOrEqual(0);
      expect(row.crashRate).toBeLessThanOrEqual(1);
    }
    expect(new Set(rows.map((r) => r.kind))).toEqual(
      new Set(["mppi", "cbf", "shield"]),
    );
    expect(new Set(rows.map((r) => r.axes["mppi.samples"]))).toEqual(
      new Set([8, 16]),
    );
  });

  it("reads cost-shaped axes the same way", () => {
    const rows = parseAggregates(fixture("fig3_aggregates.csv"));
    expect(rows).toHaveLength(8);
    expect(Object.keys(rows[0]!.axes)).toEqual(
      ["cost.q_ey", "cost.target_speed"],
    );
  });

  it("rejects a header that does not lead with kind", () => {
    expect(() => parseAggregates("seed,episodes\n1,2\n")).toThrow(
      CsvFormatError,
    );
  });

  it("rejects a non-numeric statistic", () => {
    const text =
      "kind,episodes,crash_rate,crash_rate_ci95,collision_rate,"
      + "collision_rate_ci95,collisions_mean,collisions_mean_ci95,"
      + "lap_time_mean,lap_time_ci95,avg_speed_mean,avg_speed_ci95,"
      + "max_speed_mean,interventions_mean\n"
      + "mppi,3,oops,0,0,0,0,0,0,0,0,0,0,0\n";
    expect(() => parseAggregates(text)).toThrow(/non-numeric crash_rate/);
  });
});

describe("parseEpisodes", () => {
  it("reads the per-seed table", () => {
    const rows = parseEpisodes(fixture("episodes.csv"));
    expect(rows).toHaveLength(1);
    const row = rows[0]!;
    expect(row.kind).toBe("shield");
    expect(row.seed).toBe(300);
    expect(row.crashed).toBe(false);
    expect(row.axes).toEqual({});
    expect(row.shieldInterventions).toBeGreaterThan(0);
  });
});

describe("parseTrajectory", () => {
  it("reads every sample with typed fields", () => {
    const points = parseTrajectory(fixture("traj_shield_300.csv"));
    expect(points).toHaveLength(200);
    expect(points[0]!.t).toBeCloseTo(0.02, 12);
    const offTrack = points.filter((p) => p.h < 0).length;
    const repaired = points.filter((p) => p.repaired).length;
    expect(offTrack).toBe(29);
    expect(repaired).toBe(115);
    for (const p of points) {
      expect(Number.isFinite(p.s)).toBe(true);
      expect(Number.isFinite(p.vX)).toBe(true);
    }
  });
});

describe("parseReduction", () => {
  it("reads the full sample x horizon grid", () => {
    const cells = parseReduction(fixture("fig5_reduction.csv"));
    expect(cells).toHaveLength(16);
    const samples = new Set(cells.map((c) => c.samples));
    const horizons = new Set(cells.map((c) => c.horizon));
    expect(samples.size).toBe(4);
    expect(horizons.size).toBe(4);
    for (const cell of cells) {
      expect(cell.reduction).toBeCloseTo(cell.cbfRate - cell.shieldRate, 9);
    }
  });
});

describe("parseTrack", () => {
  it("reads the circle and drops the closing row", () => {
    const track = parseTrack(fixture("circle.csv"));
    expect(track.halfWidth).toBeCloseTo(1.2, 12);
    expect(track.waypoints).toHaveLength(251);
    expect(track.waypoints[0]).toEqual([0, 0]);
  });

  it("rejects a loop that does not close", () => {
    const lines = fixture("circle.csv").trimEnd().split("\n");
    const truncated = lines.slice(0, -30).join("\n") + "\n";
    expect(() => parseTrack(truncated)).toThrow(/does not close/);
  });

  it("rejects a missing half_width header", () => {
    expect(() => parseTrack("0,0\n1,0\n1,1\n0,0\n")).toThrow(/half_width/);
  });
});
