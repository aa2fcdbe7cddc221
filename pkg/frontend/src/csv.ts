/**
 * Readers for the simulation toolkit's CSV outputs (schema_version=1).
 *
 * Every file starts with a "# schema_version=1" marker line followed by a
 * fixed column header; anything else is a validation error.
 */

import { readFileSync } from "node:fs";

export const SCHEMA_LINE = "# schema_version=1";

export class CsvValidationError extends Error {}

export interface SweepRow {
  scheme: string;
  h: number;
  branch: "up" | "down";
  mMean: number;
  mStderr: number;
  acceptanceRate: number;
  energyEvals: number;
  wallTimeS: number;
}

export interface EntropyRow {
  scheme: string;
  epsilon: number;
  rPerSite: number;
  supResidualPerSite: number;
  beta: number;
  rangeL: number;
  q: number;
  nSites: number;
}

export interface CurveRow {
  curve: string;
  beta: number;
  j0: number;
  h: number;
  m: number;
}

const SWEEP_HEADER =
  "scheme,h,branch,m_mean,m_stderr,acceptance_rate,energy_evals,wall_time_s";
const ENTROPY_HEADER =
  "scheme,epsilon,r_per_site,sup_residual_per_site,beta,range_l,q,n_sites";
const CURVE_HEADER = "curve,beta,j0,h,m";

function readBody(path: string, expectedHeader: string): string[][] {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new CsvValidationError(`cannot read ${path}: ${err}`);
  }
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0 || lines[0].trim() !== SCHEMA_LINE) {
    throw new CsvValidationError(`${path}: missing "${SCHEMA_LINE}" marker`);
  }
  if (lines.length < 2 || lines[1].trim() !== expectedHeader) {
    throw new CsvValidationError(
      `${path}: expected header "${expectedHeader}", got "${lines[1] ?? ""}"`,
    );
  }
  const rows = lines.slice(2).map((l) => l.split(","));
  if (rows.length === 0) {
    throw new CsvValidationError(`${path}: no data rows`);
  }
  return rows;
}

function num(field: string, path: string): number {
  const v = Number(field);
  if (!Number.isFinite(v)) {
    throw new CsvValidationError(`${path}: non-numeric field "${field}"`);
  }
  return v;
}

export function readSweepCsv(path: string): SweepRow[] {
  return readBody(path, SWEEP_HEADER).map((f) => {
    if (f.length !== 8) {
      throw new CsvValidationError(`${path}: malformed sweep row "${f.join(",")}"`);
    }
    if (f[2] !== "up" && f[2] !== "down") {
      throw new CsvValidationError(`${path}: unknown branch "${f[2]}"`);
    }
    return {
      scheme: f[0],
      h: num(f[1], path),
      branch: f[2],
      mMean: num(f[3], path),
      mStderr: num(f[4], path),
      acceptanceRate: num(f[5], path),
      energyEvals: num(f[6], path),
      wallTimeS: num(f[7], path),
    };
  });
}

export function readEntropyCsv(path: string): EntropyRow[] {
  return readBody(path, ENTROPY_HEADER).map((f) => {
    if (f.length !== 8) {
      throw new CsvValidationError(`${path}: malformed entropy row "${f.join(",")}"`);
    }
    return {
      scheme: f[0],
      epsilon: num(f[1], path),
      rPerSite: num(f[2], path),
      supResidualPerSite: num(f[3], path),
      beta: num(f[4], path),
      rangeL: num(f[5], path),
      q: num(f[6], path),
      nSites: num(f[7], path),
    };
  });
}

export function readCurveCsv(path: string): CurveRow[] {
  return readBody(path, CURVE_HEADER).map((f) => {
    if (f.length !== 5) {
      throw new CsvValidationError(`${path}: malformed curve row "${f.join(",")}"`);
    }
    return {
      curve: f[0],
      beta: num(f[1], path),
      j0: num(f[2], path),
      h: num(f[3], path),
      m: num(f[4], path),
    };
  });
}
