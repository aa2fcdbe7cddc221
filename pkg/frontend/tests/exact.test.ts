import { describe, expect, test } from "vitest";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { readCurveCsv } from "../src/csv.js";
import { curieWeissM, fitLine, isingNnExactM } from "../src/exact.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

describe("closed-form curves against the toolkit oracle CSV", () => {
  const rows = readCurveCsv(join(FIXTURES, "oracle_curves.csv"));

  test("nearest-neighbor chain magnetization matches to 1e-9", () => {
    const sub = rows.filter((r) => r.curve === "ising_nn");
    expect(sub.length).toBeGreaterThan(0);
    for (const r of sub) {
      expect(Math.abs(isingNnExactM(r.beta, r.h, r.j0) - r.m)).toBeLessThan(1e-9);
    }
  });

  test("mean-field branches match to 1e-9", () => {
    for (const branch of ["upper", "lower"] as const) {
      const sub = rows.filter((r) => r.curve === `cw_${branch}`);
      expect(sub.length).toBeGreaterThan(0);
      for (const r of sub) {
        expect(Math.abs(curieWeissM(r.beta, r.h, r.j0, branch) - r.m)).toBeLessThan(
          1e-9,
        );
      }
    }
  });
});

describe("curve sanity", () => {
  test("zero field gives zero magnetization", () => {
    expect(isingNnExactM(2.0, 0, 1.0)).toBe(0);
  });

  test("mean-field spontaneous magnetization at 2x critical coupling", () => {
    const m = curieWeissM(2.0, 0, 1.0, "upper");
    expect(Math.abs(m - Math.tanh(2 * m))).toBeLessThan(1e-10);
    expect(m).toBeGreaterThan(0.95);
    expect(curieWeissM(2.0, 0, 1.0, "lower")).toBeCloseTo(-m, 9);
  });

  test("least-squares fit recovers a power law", () => {
    const x = [1, 2, 4, 8].map(Math.log);
    const y = [3, 12, 48, 192].map(Math.log); // slope 2
    expect(fitLine(x, y).slope).toBeCloseTo(2, 12);
  });
});
