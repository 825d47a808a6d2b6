/**
 * Readers for the benchmark harness artifacts.
 *
 * All inputs are plain comma-separated text. Episode and aggregate files
 * open with one `# ... generated ...` comment line followed by a header
 * row; axis columns (the swept keys) sit between `kind` and the first
 * statistic and are discovered from the header. Track files carry a
 * `half_width,<v>` header, one `x,y` waypoint per line, and an explicit
 * closing row that repeats the first waypoint.
 */
import Papa from "papaparse";

export class CsvFormatError extends Error {}

export interface AggregateRow {
  kind: string;
  axes: Record<string, number>;
  episodes: number;
  crashRate: number;
  crashRateCi95: number;
  collisionRate: number;
  collisionRateCi95: number;
  collisionsMean: number;
  collisionsMeanCi95: number;
  lapTimeMean: number;
  lapTimeCi95: number;
  avgSpeedMean: number;
  avgSpeedCi95: number;
  maxSpeedMean: number;
  interventionsMean: number;
}

export interface EpisodeRow {
  kind: string;
  axes: Record<string, number>;
  seed: number;
  crashed: boolean;
  collisions: number;
  lapTime: number;
  avgSpeed: number;
  maxSpeed: number;
  shieldInterventions: number;
}

export interface ReductionCell {
  samples: number;
  horizon: number;
  cbfRate: number;
  shieldRate: number;
  reduction: number;
}

export interface TrajectoryPoint {
  t: number;
  s: number;
  eY: number;
  ePsi: number;
  vX: number;
  vY: number;
  psiDot: number;
  delta: number;
  throttle: number;
  h: number;
  dcbfResidual: number;
  repaired: boolean;
}

export interface TrackGeometry {
  halfWidth: number;
  /** Open polyline; the closing segment back to waypoint 0 is implicit. */
  waypoints: Array<[number, number]>;
}

const AGGREGATE_STATS = [
  "episodes",
  "crash_rate",
  "crash_rate_ci95",
  "collision_rate",
  "collision_rate_ci95",
  "collisions_mean",
  "collisions_mean_ci95",
  "lap_time_mean",
  "lap_time_ci95",
  "avg_speed_mean",
  "avg_speed_ci95",
  "max_speed_mean",
  "interventions_mean",
] as const;

const EPISODE_STATS = [
  "seed",
  "crashed",
  "collisions",
  "lap_time",
  "avg_speed",
  "max_speed",
  "shield_interventions",
] as const;

function stripComments(text: string): string {
  return text
    .split("\n")
    .filter((line) => !line.trimStart().startsWith("#"))
    .join("\n");
}

function parseRows(text: string, label: string): Record<string, string>[] {
  const result = Papa.parse<Record<string, string>>(stripComments(text), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0]!;
    throw new CsvFormatError(`${label}: ${first.message} (row ${first.row})`);
  }
  return result.data;
}

function toNumber(raw: string | undefined, column: string, label: string): number {
  if (raw === undefined || raw.trim() === "") {
    throw new CsvFormatError(`${label}: missing value in column ${column}`);
  }
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new CsvFormatError(`${label}: non-numeric ${column}: ${raw}`);
  }
  return value;
}

/** Axis columns are whatever sits between `kind` and `firstStat`. */
function axisNames(
  fields: string[],
  firstStat: string,
  label: string,
): string[] {
  if (fields[0] !== "kind") {
    throw new CsvFormatError(`${label}: first column must be 'kind', got ${fields[0]}`);
  }
  const statAt = fields.indexOf(firstStat);
  if (statAt < 0) {
    throw new CsvFormatError(`${label}: missing column ${firstStat}`);
  }
  return fields.slice(1, statAt);
}

export function parseAggregates(text: string): AggregateRow[] {
  const label = "aggregates";
  const result = Papa.parse<Record<string, string>>(stripComments(text), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0]!;
    throw new CsvFormatError(`${label}: ${first.message} (row ${first.row})`);
  }
  const fields = result.meta.fields ?? [];
  const axes = axisNames(fields, "episodes", label);
  for (const stat of AGGREGATE_STATS) {
    if (!fields.includes(stat)) {
      throw new CsvFormatError(`${label}: missing column ${stat}`);
    }
  }
  return result.data.map((rec) => ({
    kind: rec["kind"] ?? "",
    axes: Object.fromEntries(
      axes.map((name) => [name, toNumber(rec[name], name, label)]),
    ),
    episodes: toNumber(rec["episodes"], "episodes", label),
    crashRate: toNumber(rec["crash_rate"], "crash_rate", label),
    crashRateCi95: toNumber(rec["crash_rate_ci95"], "crash_rate_ci95", label),
    collisionRate: toNumber(rec["collision_rate"], "collision_rate", label),
    collisionRateCi95: toNumber(
      rec["collision_rate_ci95"], "collision_rate_ci95", label),
    collisionsMean: toNumber(rec["collisions_mean"], "collisions_mean", label),
    collisionsMeanCi95: toNumber(
      rec["collisions_mean_ci95"], "collisions_mean_ci95", label),
    lapTimeMean: toNumber(rec["lap_time_mean"], "lap_time_mean", label),
    lapTimeCi95: toNumber(rec["lap_time_ci95"], "lap_time_ci95", label),
    avgSpeedMean: toNumber(rec["avg_speed_mean"], "avg_speed_mean", label),
    avgSpeedCi95: toNumber(rec["avg_speed_ci95"], "avg_speed_ci95", label),
    maxSpeedMean: toNumber(rec["max_speed_mean"], "max_speed_mean", label),
    interventionsMean: toNumber(
      rec["interventions_mean"], "interventions_mean", label),
  }));
}

export function parseEpisodes(text: string): EpisodeRow[] {
  const label = "episodes";
  const result = Papa.parse<Record<string, string>>(stripComments(text), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0]!;
    throw new CsvFormatError(`${label}: ${first.message} (row ${first.row})`);
  }
  const fields = result.meta.fields ?? [];
  const axes = axisNames(fields, "seed", label);
  for (const stat of EPISODE_STATS) {
    if (!fields.includes(stat)) {
      throw new CsvFormatError(`${label}: missing column ${stat}`);
    }
  }
  return result.data.map((rec) => ({
    kind: rec["kind"] ?? "",
    axes: Object.fromEntries(
      axes.map((name) => [name, toNumber(rec[name], name, label)]),
    ),
    seed: toNumber(rec["seed"], "seed", label),
    crashed: toNumber(rec["crashed"], "crashed", label) !== 0,
    collisions: toNumber(rec["collisions"], "collisions", label),
    lapTime: toNumber(rec["lap_time"], "lap_time", label),
    avgSpeed: toNumber(rec["avg_speed"], "avg_speed", label),
    maxSpeed: toNumber(rec["max_speed"], "max_speed", label),
    shieldInterventions: toNumber(
      rec["shield_interventions"], "shield_interventions", label),
  }));
}

export function parseReduction(text: string): ReductionCell[] {
  const rows = parseRows(text, "reduction");
  return rows.map((rec) => ({
    samples: toNumber(rec["mppi.samples"], "mppi.samples", "reduction"),
    horizon: toNumber(rec["mppi.horizon"], "mppi.horizon", "reduction"),
    cbfRate: toNumber(rec["cbf_rate"], "cbf_rate", "reduction"),
    shieldRate: toNumber(rec["shield_rate"], "shield_rate", "reduction"),
    reduction: toNumber(rec["reduction"], "reduction", "reduction"),
  }));
}

export function parseTrajectory(text: string): TrajectoryPoint[] {
  const rows = parseRows(text, "trajectory");
  return rows.map((rec) => ({
    t: toNumber(rec["t"], "t", "trajectory"),
    s: toNumber(rec["s"], "s", "trajectory"),
    eY: toNumber(rec["e_y"], "e_y", "trajectory"),
    ePsi: toNumber(rec["e_psi"], "e_psi", "trajectory"),
    vX: toNumber(rec["v_x"], "v_x", "trajectory"),
    vY: toNumber(rec["v_y"], "v_y", "trajectory"),
    psiDot: toNumber(rec["psi_dot"], "psi_dot", "trajectory"),
    delta: toNumber(rec["delta"], "delta", "trajectory"),
    throttle: toNumber(rec["T"], "T", "trajectory"),
    h: toNumber(rec["h"], "h", "trajectory"),
    dcbfResidual: toNumber(rec["dcbf_residual"], "dcbf_residual", "trajectory"),
    repaired: toNumber(rec["repaired"], "repaired", "trajectory") !== 0,
  }));
}

export function parseTrack(text: string): TrackGeometry {
  let halfWidth: number | null = null;
  const points: Array<[number, number]> = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i += 1) {
    const line = lines[i]!.trim();
    if (line === "" || line.startsWith("#")) {
      continue;
    }
    const parts = line.split(",").map((p) => p.trim());
    if (halfWidth === null) {
      if (parts.length !== 2 || parts[0] !== "half_width") {
        throw new CsvFormatError(
          `track line ${i + 1}: expected 'half_width,<value>', got ${line}`,
        );
      }
      halfWidth = toNumber(parts[1], "half_width", "track");
      continue;
    }
    if (parts.length !== 2) {
      throw new CsvFormatError(`track line ${i + 1}: expected 'x,y', got ${line}`);
    }
    points.push([
      toNumber(parts[0], "x", "track"),
      toNumber(parts[1], "y", "track"),
    ]);
  }
  if (halfWidth === null) {
    throw new CsvFormatError("track: missing 'half_width,<value>' header");
  }
  if (points.length < 3) {
    throw new CsvFormatError(`track: need at least 3 waypoint rows, got ${points.length}`);
  }
  let perimeter = 0;
  for (let i = 1; i < points.length; i += 1) {
    perimeter += Math.hypot(
      points[i]![0] - points[i - 1]![0],
      points[i]![1] - points[i - 1]![1],
    );
  }
  const first = points[0]!;
  const last = points[points.length - 1]!;
  const gap = Math.hypot(last[0] - first[0], last[1] - first[1]);
  if (gap > 1e-6 * perimeter) {
    throw new CsvFormatError(
      `track: loop does not close (endpoint gap ${gap.toExponential(3)})`,
    );
  }
  return { halfWidth, waypoints: points.slice(0, -1) };
}
