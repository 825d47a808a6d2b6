/**
 * Command line entry point for the plot renderers.
 *
 *   shield-mppi-plot fig3 --in aggregates.csv --out fig3.svg
 *   shield-mppi-plot fig4 --in aggregates.csv --out fig4.svg
 *   shield-mppi-plot fig5 --in fig5_reduction.csv --out fig5.svg
 *   shield-mppi-plot overlay --in traj.csv --track course.csv --out lap.svg
 *
 * Exit codes: 0 success, 2 bad arguments or malformed input content,
 * 3 filesystem errors.
 */
import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import yargs from "yargs";
import {
  CsvFormatError,
  parseAggregates,
  parseReduction,
  parseTrack,
  parseTrajectory,
} from "./csv.js";
import { renderFig3 } from "./fig3.js";
import { renderFig4 } from "./fig4.js";
import { renderFig5 } from "./fig5.js";
import { renderOverlay } from "./overlay.js";

interface Action {
  command: string;
  inPath: string;
  outPath: string;
  trackPath?: string;
}

class UsageError extends Error {}

function parseArgs(argv: string[]): Action {
  let action: Action | undefined;
  const io = {
    in: { type: "string", demandOption: true, describe: "input CSV" },
    out: { type: "string", demandOption: true, describe: "output SVG" },
  } as const;
  yargs(argv)
    .scriptName("shield-mppi-plot")
    .command("fig3 [options]", "crash rate vs lateral-cost weight", io, (a) => {
      action = { command: "fig3", inPath: a.in, outPath: a.out };
    })
    .command("fig4 [options]", "crash rate vs sample count", io, (a) => {
      action = { command: "fig4", inPath: a.in, outPath: a.out };
    })
    .command("fig5 [options]", "crash-rate reduction heatmap", io, (a) => {
      action = { command: "fig5", inPath: a.in, outPath: a.out };
    })
    .command(
      "overlay [options]",
      "trajectory over track geometry",
      {
        ...io,
        track: {
          type: "string",
          demandOption: true,
          describe: "track waypoint CSV",
        },
      } as const,
      (a) => {
        action = {
          command: "overlay", inPath: a.in, outPath: a.out, trackPath: a.track,
        };
      },
    )
    .demandCommand(1, "a command is required")
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw new UsageError(msg ?? err?.message ?? "bad arguments");
    })
    .parseSync();
  if (action === undefined) {
    throw new UsageError("a command is required");
  }
  return action;
}

function readText(path: string): string {
  return readFileSync(path, { encoding: "utf-8" });
}

function render(action: Action): string {
  switch (action.command) {
    case "fig3":
      return renderFig3(parseAggregates(readText(action.inPath)));
    case "fig4":
      return renderFig4(parseAggregates(readText(action.inPath)));
    case "fig5":
      return renderFig5(parseReduction(readText(action.inPath)));
    case "overlay": {
      const track = parseTrack(readText(action.trackPath!));
      return renderOverlay(track, parseTrajectory(readText(action.inPath)));
    }
    default:
      throw new UsageError(`unknown command ${action.command}`);
  }
}

export function run(argv: string[]): number {
  let action: Action;
  try {
    action = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }
  let svg: string;
  try {
    svg = render(action);
  } catch (err) {
    if (err instanceof CsvFormatError || err instanceof UsageError
      || err instanceof Error && !("code" in err)) {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 3;
  }
  try {
    writeFileSync(action.outPath, svg, { encoding: "utf-8" });
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 3;
  }
  return 0;
}

if (import.meta.url === pathToFileURL(process.argv[1] ?? "").href) {
  process.exit(run(process.argv.slice(2)));
}
