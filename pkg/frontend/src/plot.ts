/**
 * Turn simulation result CSVs into a figure: one line per (series value,
 * estimator), nMSE against sample size, error bars of one standard error
 * (scaled to the nMSE axis), optional log x-axis, and optional horizontal
 * reference levels.
 */

import { writeFileSync } from "fs";

import { loadResultsCsv, ResultRow, SchemaError } from "./csv.js";
import { renderLineChart, SvgSeries } from "./svg.js";

export interface PlotSpec {
  csvPaths: string[];
  seriesKey: string;
  out: string;
  logX?: boolean;
  /** horizontal reference lines, e.g. { v1: 0.01, v1v2: 0.06 } */
  references?: Record<string, number>;
  title?: string;
}

export interface SeriesPoints {
  label: string;
  /** [n, nmse, halfErrorBar] sorted by n */
  points: [number, number, number][];
}

export interface PlotResult {
  svg: string;
  series: SeriesPoints[];
}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf", "#e377c2", "#7f7f7f", "#bcbd22",
];

export function groupSeries(rows: ResultRow[], seriesKey: string): SeriesPoints[] {
  if (rows.length === 0) {
    throw new SchemaError("no rows to plot");
  }
  if (!(seriesKey in rows[0])) {
    throw new SchemaError(`series column ${seriesKey} not present in the CSV`);
  }
  const estimators = new Set(rows.map((r) => r.estimator));
  const groups = new Map<string, [number, number, number][]>();
  for (const row of rows) {
    const base = String(row[seriesKey]);
    const label =
      estimators.size > 1 && seriesKey !== "estimator"
        ? `${base} (${row.estimator})`
        : base;
    const bucket = groups.get(label) ?? [];
    // Error bars live on the nMSE axis: stderr is the SE of the MSE, so
    // the half-width at y = n * mse is n * stderr.
    bucket.push([row.n, row.nmse, row.n * row.stderr]);
    groups.set(label, bucket);
  }
  const labels = [...groups.keys()].sort();
  return labels.map((label) => ({
    label,
    points: groups
      .get(label)!
      .slice()
      .sort((a, b) => a[0] - b[0]),
  }));
}

export function buildPlot(spec: PlotSpec): PlotResult {
  if (spec.csvPaths.length === 0) {
    throw new SchemaError("at least one CSV path is required");
  }
  const rows = spec.csvPaths.flatMap((p) => loadResultsCsv(p));
  const series = groupSeries(rows, spec.seriesKey);
  const svgSeries: SvgSeries[] = series.map((s, i) => ({
    label: s.label,
    color: PALETTE[i % PALETTE.length],
    dashed: s.label.includes("(lr)"),
    points: s.points,
  }));
  const references = Object.entries(spec.references ?? {})
    .sort(([a], [b]) => (a < b ? -1 : 1))
    .map(([label, value]) => ({ label, value }));
  const svg = renderLineChart(svgSeries, {
    logX: spec.logX,
    xLabel: spec.logX ? "sample size n (log scale)" : "sample size n",
    yLabel: "nMSE",
    title: spec.title,
    references,
  });
  return { svg, series };
}

/** Canonical serialization of the plotted points; identical inputs and
 * spec must always produce the identical string. */
export function serializePoints(series: SeriesPoints[]): string {
  return JSON.stringify(series);
}

export function renderToFile(spec: PlotSpec): PlotResult {
  const result = buildPlot(spec);
  writeFileSync(spec.out, result.svg + "\n");
  return result;
}
