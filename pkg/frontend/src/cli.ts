#!/usr/bin/env node
/**
 * plot --csv <path>... --series <col> --out <path> [--logx]
 *      [--ref v1=<val>,v1v2=<val>] [--title <text>]
 *
 * Reads simulation result CSVs and writes one SVG. Exit codes: 0 ok,
 * 2 bad input (missing columns, empty file, unknown flag).
 */

import { SchemaError } from "./csv.js";
import { renderToFile, PlotSpec } from "./plot.js";

function parseArgs(argv: string[]): PlotSpec {
  const spec: PlotSpec = { csvPaths: [], seriesKey: "instance_id", out: "" };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new SchemaError(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--csv":
        spec.csvPaths.push(next());
        break;
      case "--series":
        spec.seriesKey = next();
        break;
      case "--out":
        spec.out = next();
        break;
      case "--logx":
        spec.logX = true;
        break;
      case "--title":
        spec.title = next();
        break;
      case "--ref": {
        spec.references = spec.references ?? {};
        for (const pair of next().split(",")) {
          const [key, value] = pair.split("=");
          const num = Number(value);
          if (!key || !Number.isFinite(num)) {
            throw new SchemaError(`bad --ref entry: ${pair}`);
          }
          spec.references[key] = num;
        }
        break;
      }
      default:
        throw new SchemaError(`unknown argument: ${arg}`);
    }
  }
  if (spec.csvPaths.length === 0 || spec.out === "") {
    throw new SchemaError("usage: plot --csv <path>... --series <col> --out <path> [--logx] [--ref v1=<val>,v1v2=<val>]");
  }
  return spec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    const result = renderToFile(spec);
    console.log(`wrote ${spec.out} (${result.series.length} series)`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || (err instanceof Error && err.message)) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
