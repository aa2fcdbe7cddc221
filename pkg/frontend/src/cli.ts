/**
 * Figure CLI.
 *
 *   plot-isotherm --csv sweep.csv --exact ising_nn|cw|none [--beta B --j0 J] --out fig.svg
 *   plot-entropy  --csv entropy.csv --out fig.svg
 *
 * Exit codes: 0 success, 1 validation error.
 */

import { CsvValidationError } from "./csv.js";
import { plotEntropyScaling } from "./entropy.js";
import { OverlayKind, plotIsotherm } from "./isotherm.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new CsvValidationError(`malformed arguments near "${key}"`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new CsvValidationError(`missing --${key}`);
  return v;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "plot-isotherm") {
      const flags = parseFlags(rest);
      const overlay = (flags.get("exact") ?? "none") as OverlayKind;
      if (!["ising_nn", "cw", "none"].includes(overlay)) {
        throw new CsvValidationError(`unknown overlay "${overlay}"`);
      }
      plotIsotherm({
        csvPath: need(flags, "csv"),
        outPath: need(flags, "out"),
        overlay,
        beta: flags.has("beta") ? Number(flags.get("beta")) : undefined,
        j0: flags.has("j0") ? Number(flags.get("j0")) : undefined,
        title: flags.get("title"),
      });
      return 0;
    }
    if (command === "plot-entropy") {
      const flags = parseFlags(rest);
      const fig = plotEntropyScaling({
        csvPath: need(flags, "csv"),
        outPath: need(flags, "out"),
        title: flags.get("title"),
      });
      console.log(
        Object.entries(fig.slopes)
          .map(([k, v]) => `${k} slope ${v.toFixed(3)}`)
          .join(", "),
      );
      return 0;
    }
    console.error("usage: plot-isotherm|plot-entropy --csv FILE --out FILE [...]");
    return 1;
  } catch (err) {
    if (err instanceof CsvValidationError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
