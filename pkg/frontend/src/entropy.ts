/**
 * Log-log scaling figure: specific relative entropy per site against the
 * small parameter epsilon, one line per scheme, annotated with fitted
 * least-squares slopes.
 */

import { writeFileSync } from "node:fs";

import { CsvValidationError, readEntropyCsv, EntropyRow } from "./csv.js";
import { fitLine } from "./exact.js";
import { renderChart, Series } from "./svg.js";

export interface EntropySpec {
  csvPath: string;
  outPath: string;
  title?: string;
}

const SCHEME_COLORS: Record<string, string> = {
  cg0: "#d62728",
  cg2: "#2ca02c",
};

export interface EntropyFigure {
  svg: string;
  slopes: Record<string, number>;
}

export function buildEntropyFigure(rows: EntropyRow[], spec: EntropySpec): EntropyFigure {
  const schemes = [...new Set(rows.map((r) => r.scheme))];
  const series: Series[] = [];
  const slopes: Record<string, number> = {};
  const annotations: string[] = [];
  for (const scheme of schemes) {
    const pts = rows
      .filter((r) => r.scheme === scheme)
      .sort((a, b) => a.epsilon - b.epsilon);
    if (pts.some((r) => r.epsilon <= 0 || r.rPerSite <= 0)) {
      throw new CsvValidationError(
        `scheme ${scheme}: nonpositive epsilon or entropy; nothing to fit ` +
          "(constant-kernel grids are exactly coarse-grainable)",
      );
    }
    if (pts.length < 3) {
      throw new CsvValidationError(
        `scheme ${scheme}: need at least 3 grid points for a slope fit`,
      );
    }
    const { slope } = fitLine(
      pts.map((r) => Math.log(r.epsilon)),
      pts.map((r) => Math.log(r.rPerSite)),
    );
    slopes[scheme] = slope;
    annotations.push(`${scheme} slope = ${slope.toFixed(2)}`);
    series.push({
      label: scheme,
      x: pts.map((r) => r.epsilon),
      y: pts.map((r) => r.rPerSite),
      color: SCHEME_COLORS[scheme] ?? "#7f7f7f",
      markers: true,
    });
  }
  const svg = renderChart({
    title: spec.title ?? "relative entropy scaling",
    xLabel: "epsilon",
    yLabel: "R / N",
    series,
    logX: true,
    logY: true,
    annotations,
  });
  return { svg, slopes };
}

export function plotEntropyScaling(spec: EntropySpec): EntropyFigure {
  const rows = readEntropyCsv(spec.csvPath);
  const fig = buildEntropyFigure(rows, spec);
  writeFileSync(spec.outPath, fig.svg);
  return fig;
}
