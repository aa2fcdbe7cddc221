/**
 * Magnetization isotherm figures: one panel of m versus h for every
 * (scheme, branch) in a sweep CSV, with an optional dashed closed-form
 * overlay.
 *
 * The simulation Hamiltonian carries a plus-sign field term, so the overlay
 * closed forms (stated in the usual convention) are evaluated at -h.
 */

import { writeFileSync } from "node:fs";

import { CsvValidationError, readSweepCsv, SweepRow } from "./csv.js";
import { curieWeissM, isingNnExactM } from "./exact.js";
import { renderChart, Series } from "./svg.js";

export type OverlayKind = "ising_nn" | "cw" | "none";

export interface IsothermSpec {
  csvPath: string;
  overlay: OverlayKind;
  beta?: number;
  j0?: number;
  outPath: string;
  title?: string;
}

const SCHEME_COLORS: Record<string, string> = {
  micro: "#1f77b4",
  cg0: "#d62728",
  cg2: "#2ca02c",
};

export function overlayValue(
  kind: OverlayKind,
  beta: number,
  j0: number,
  h: number,
  branch: "up" | "down",
): number {
  // field-sign mapping: simulated m(h) equals the textbook curve at -h
  if (kind === "ising_nn") return isingNnExactM(beta, -h, j0);
  // continuation branches follow the metastable mean-field solutions:
  // the rising branch clings to the positive root, the falling one to the
  // negative root (in the simulation's sign convention)
  return curieWeissM(beta, -h, j0, branch === "up" ? "upper" : "lower");
}

export function buildIsothermSeries(rows: SweepRow[], spec: IsothermSpec): Series[] {
  const series: Series[] = [];
  const schemes = [...new Set(rows.map((r) => r.scheme))];
  for (const scheme of schemes) {
    for (const branch of ["up", "down"] as const) {
      const pts = rows
        .filter((r) => r.scheme === scheme && r.branch === branch)
        .sort((a, b) => a.h - b.h);
      if (pts.length === 0) continue;
      series.push({
        label: `${scheme} ${branch}`,
        x: pts.map((r) => r.h),
        y: pts.map((r) => r.mMean),
        color: SCHEME_COLORS[scheme] ?? "#7f7f7f",
        dashed: branch === "down",
        markers: true,
      });
    }
  }
  if (spec.overlay !== "none") {
    const beta = spec.beta;
    const j0 = spec.j0;
    if (beta === undefined || j0 === undefined) {
      throw new CsvValidationError("overlay needs beta and j0");
    }
    const hs = [...new Set(rows.map((r) => r.h))].sort((a, b) => a - b);
    const grid: number[] = [];
    const n = 120;
    for (let i = 0; i <= n; i++) {
      grid.push(hs[0] + ((hs[hs.length - 1] - hs[0]) * i) / n);
    }
    const branches: Array<"up" | "down"> =
      spec.overlay === "cw" ? ["up", "down"] : ["up"];
    for (const b of branches) {
      series.push({
        label:
          spec.overlay === "ising_nn" ? "exact chain" : `mean-field ${b}`,
        x: grid,
        y: grid.map((h) => overlayValue(spec.overlay, beta, j0, h, b)),
        color: "#444444",
        dashed: true,
      });
    }
  }
  return series;
}

export function plotIsotherm(spec: IsothermSpec): string {
  const rows = readSweepCsv(spec.csvPath);
  const series = buildIsothermSeries(rows, spec);
  const svg = renderChart({
    title: spec.title ?? "magnetization isotherm",
    xLabel: "external field h",
    yLabel: "magnetization m",
    series,
  });
  writeFileSync(spec.outPath, svg);
  return svg;
}
