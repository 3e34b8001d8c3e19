/**
 * Reader for the simulation CSV contract:
 *
 *   experiment,instance_id,estimator,n,replications,mse,nmse,stderr,seed
 *
 * Files missing any of these columns are refused up front.
 */

import { readFileSync } from "fs";

export const REQUIRED_COLUMNS = [
  "experiment",
  "instance_id",
  "estimator",
  "n",
  "replications",
  "mse",
  "nmse",
  "stderr",
  "seed",
] as const;

const NUMERIC_COLUMNS = new Set(["n", "replications", "mse", "nmse", "stderr", "seed"]);

export interface ResultRow {
  experiment: string;
  instance_id: string;
  estimator: string;
  n: number;
  replications: number;
  mse: number;
  nmse: number;
  stderr: number;
  seed: number;
  [key: string]: string | number;
}

export class SchemaError extends Error {}

export function parseResultsCsv(text: string, source = "<csv>"): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((line) => line.trim() !== "");
  if (lines.length === 0) {
    throw new SchemaError(`${source}: empty CSV`);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const missing = REQUIRED_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`${source}: missing required columns: ${missing.join(", ")}`);
  }
  if (lines.length === 1) {
    throw new SchemaError(`${source}: no data rows`);
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(`${source}: row ${i + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    const row: Record<string, string | number> = {};
    header.forEach((name, j) => {
      if (NUMERIC_COLUMNS.has(name)) {
        const value = Number(cells[j]);
        if (!Number.isFinite(value)) {
          throw new SchemaError(`${source}: row ${i + 1} column ${name} is not numeric: ${cells[j]}`);
        }
        row[name] = value;
      } else {
        row[name] = cells[j];
      }
    });
    rows.push(row as ResultRow);
  }
  return rows;
}

export function loadResultsCsv(path: string): ResultRow[] {
  return parseResultsCsv(readFileSync(path, "utf8"), path);
}
