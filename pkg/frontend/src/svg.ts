/**
 * Minimal hand-rolled SVG line chart: axes, log or linear x, error bars,
 * horizontal reference lines. No DOM, no dependencies; output is a plain
 * SVG string so rendering stays deterministic and testable.
 */

export interface SvgSeries {
  label: string;
  color: string;
  dashed: boolean;
  /** [x, y, halfErrorBar] triples, sorted by x */
  points: [number, number, number][];
}

export interface SvgOptions {
  width?: number;
  height?: number;
  logX?: boolean;
  xLabel?: string;
  yLabel?: string;
  title?: string;
  references?: { label: string; value: number }[];
}

const MARGIN = { top: 36, right: 170, bottom: 46, left: 64 };

function fmt(x: number): string {
  // Fixed short formatting keeps output byte-stable across runs.
  return Number(x.toFixed(2)).toString();
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (count * step) / span;
  const mult = err <= 0.15 ? 10 : err <= 0.35 ? 5 : err <= 0.75 ? 2 : 1;
  const s = step * mult;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); Math.pow(10, e) <= hi * 1.0001; e++) {
    const v = Math.pow(10, e);
    if (v >= lo * 0.9999) ticks.push(v);
  }
  return ticks.length > 0 ? ticks : [lo, hi];
}

export function renderLineChart(series: SvgSeries[], options: SvgOptions = {}): string {
  const width = options.width ?? 860;
  const height = options.height ?? 520;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = series.flatMap((s) => s.points.flatMap((p) => [p[1] - p[2], p[1] + p[2]]));
  for (const ref of options.references ?? []) ys.push(ref.value);
  if (xs.length === 0) throw new Error("nothing to plot");

  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  if (xLo === xHi) {
    xLo = options.logX ? xLo / 2 : xLo - 1;
    xHi = xHi * (options.logX ? 2 : 1) + (options.logX ? 0 : 1);
  }
  let yLo = Math.min(0, ...ys);
  let yHi = Math.max(...ys);
  if (yLo === yHi) yHi = yLo + 1;
  const yPad = (yHi - yLo) * 0.05;
  yHi += yPad;

  const xPos = (x: number) =>
    MARGIN.left +
    (options.logX
      ? ((Math.log10(x) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))) * plotW
      : ((x - xLo) / (xHi - xLo)) * plotW);
  const yPos = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  );
  if (options.title) {
    parts.push(
      `<text x="${width / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="15">${options.title}</text>`,
    );
  }

  // axes
  const x0 = MARGIN.left;
  const y0 = MARGIN.top + plotH;
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x0 + plotW}" y2="${y0}" stroke="black"/>`,
    `<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${y0}" stroke="black"/>`,
  );
  const xTicks = options.logX ? decadeTicks(xLo, xHi) : niceTicks(xLo, xHi);
  for (const t of xTicks) {
    const px = xPos(t);
    parts.push(
      `<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 5}" stroke="black"/>`,
      `<text x="${fmt(px)}" y="${y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">${t}</text>`,
    );
  }
  for (const t of niceTicks(yLo, yHi)) {
    const py = yPos(t);
    parts.push(
      `<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="black"/>`,
      `<text x="${x0 - 8}" y="${fmt(py + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">${Number(t.toPrecision(6))}</text>`,
    );
  }
  if (options.xLabel) {
    parts.push(
      `<text x="${x0 + plotW / 2}" y="${height - 8}" text-anchor="middle" font-family="sans-serif" font-size="12">${options.xLabel}</text>`,
    );
  }
  if (options.yLabel) {
    parts.push(
      `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${options.yLabel}</text>`,
    );
  }

  for (const ref of options.references ?? []) {
    const py = yPos(ref.value);
    parts.push(
      `<line x1="${x0}" y1="${fmt(py)}" x2="${x0 + plotW}" y2="${fmt(py)}" stroke="#888888" stroke-dasharray="2,4"/>`,
      `<text x="${x0 + plotW + 4}" y="${fmt(py + 4)}" font-family="sans-serif" font-size="11" fill="#555555">${ref.label}</text>`,
    );
  }

  series.forEach((s, idx) => {
    const path = s.points
      .map((p, i) => `${i === 0 ? "M" : "L"}${fmt(xPos(p[0]))},${fmt(yPos(p[1]))}`)
      .join(" ");
    const dash = s.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(`<path d="${path}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
    for (const [x, y, err] of s.points) {
      const px = xPos(x);
      parts.push(
        `<circle cx="${fmt(px)}" cy="${fmt(yPos(y))}" r="2.5" fill="${s.color}"/>`,
      );
      if (err > 0) {
        parts.push(
          `<line x1="${fmt(px)}" y1="${fmt(yPos(y - err))}" x2="${fmt(px)}" y2="${fmt(yPos(y + err))}" stroke="${s.color}"/>`,
          `<line x1="${fmt(px - 3)}" y1="${fmt(yPos(y - err))}" x2="${fmt(px + 3)}" y2="${fmt(yPos(y - err))}" stroke="${s.color}"/>`,
          `<line x1="${fmt(px - 3)}" y1="${fmt(yPos(y + err))}" x2="${fmt(px + 3)}" y2="${fmt(yPos(y + err))}" stroke="${s.color}"/>`,
        );
      }
    }
    const ly = MARGIN.top + 14 + idx * 18;
    const lx = x0 + plotW + 12;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.8"${dash}/>`,
      `<text x="${lx + 28}" y="${ly}" font-family="sans-serif" font-size="11">${s.label}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
