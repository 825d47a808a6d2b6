import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";
import { run } from "../src/cli.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

let out: string;

beforeAll(() => {
  out = mkdtempSync(join(tmpdir(), "plot-cli-"));
});

function renderTwice(args: string[], name: string): [string, string] {
  const first = join(out, `${name}-a.svg`);
  const second = join(out, `${name}-b.svg`);
  expect(run([...args, "--out", first])).toBe(0);
  expect(run([...args, "--out", second])).toBe(0);
  return [
    readFileSync(first, { encoding: "utf-8" }),
    readFileSync(second, { encoding: "utf-8" }),
  ];
}

describe("run", () => {
  it("renders fig3 reproducibly", () => {
    const [a, b] = renderTwice(
      ["fig3", "--in", join(FIXTURES, "fig3_aggregates.csv")], "fig3",
    );
    expect(a.startsWith("<?xml")).toBe(true);
    expect(a).toBe(b);
  });

  it("renders fig4 reproducibly", () => {
    const [a, b] = renderTwice(
      ["fig4", "--in", join(FIXTURES, "fig4_aggregates.csv")], "fig4",
    );
    expect(a).toContain("<svg");
    expect(a).toBe(b);
  });

  it("renders fig5 reproducibly", () => {
    const [a, b] = renderTwice(
      ["fig5", "--in", join(FIXTURES, "fig5_reduction.csv")], "fig5",
    );
    expect(a).toContain("<svg");
    expect(a).toBe(b);
  });

  it("renders the overlay reproducibly", () => {
    const [a, b] = renderTwice(
      [
        "overlay",
        "--in", join(FIXTURES, "traj_shield_300.csv"),
        "--track", join(FIXTURES, "circle.csv"),
      ],
      "overlay",
    );
    expect(a).toContain("<svg");
    expect(a).toBe(b);
  });

  it("returns 2 without a command", () => {
    expect(run([])).toBe(2);
  });

  it("returns 2 for an unknown flag", () => {
    expect(
      run([
        "fig4",
        "--in", join(FIXTURES, "fig4_aggregates.csv"),
        "--out", join(out, "x.svg"),
        "--bogus", "1",
      ]),
    ).toBe(2);
  });

  it("returns 2 for malformed input content", () => {
    const bad = join(out, "bad.csv");
    writeFileSync(bad, "seed,crash_rate\n1,0.5\n", { encoding: "utf-8" });
    expect(run(["fig4", "--in", bad, "--out", join(out, "bad.svg")])).toBe(2);
  });

  it("returns 3 when the input file is missing", () => {
    expect(
      run([
        "fig4",
        "--in", join(out, "does-not-exist.csv"),
        "--out", join(out, "missing.svg"),
      ]),
    ).toBe(3);
  });

  it("returns 3 when the output directory is missing", () => {
    expect(
      run([
        "fig4",
        "--in", join(FIXTURES, "fig4_aggregates.csv"),
        "--out", join(out, "no-such-dir", "fig4.svg"),
      ]),
    ).toBe(3);
  });
});
