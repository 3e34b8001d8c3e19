import { createHash } from "crypto";
import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { parseResultsCsv, loadResultsCsv, SchemaError, REQUIRED_COLUMNS } from "../src/csv.js";
import { buildPlot, groupSeries, serializePoints, renderToFile } from "../src/plot.js";
import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "..", "fixtures");
const LEFT = join(FIXTURES, "fig1_left.csv");
const RIGHT = join(FIXTURES, "fig1_right.csv");

const HEADER = REQUIRED_COLUMNS.join(",");

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

function tmpOut(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "plots-")), name);
}

describe("csv schema", () => {
  it("parses the contract columns and types", () => {
    const rows = loadResultsCsv(LEFT);
    expect(rows.length).toBeGreaterThan(0);
    expect(typeof rows[0].instance_id).toBe("string");
    expect(typeof rows[0].n).toBe("number");
    expect(rows[0].nmse).toBeCloseTo(rows[0].n * rows[0].mse, 10);
  });

  it("refuses files missing contract columns", () => {
    const text = "experiment,instance_id,n\ncomparison,a,10\n";
    expect(() => parseResultsCsv(text, "bad.csv")).toThrow(SchemaError);
    expect(() => parseResultsCsv(text, "bad.csv")).toThrow(/missing required columns/);
  });

  it("refuses empty and header-only input", () => {
    expect(() => parseResultsCsv("", "empty.csv")).toThrow(SchemaError);
    expect(() => parseResultsCsv(HEADER + "\n", "empty.csv")).toThrow(/no data rows/);
  });

  it("refuses non-numeric numeric cells", () => {
    const text = `${HEADER}\ncomparison,a,lr,ten,100,0.1,1.0,0.01,7\n`;
    expect(() => parseResultsCsv(text)).toThrow(/not numeric/);
  });
});

describe("series grouping", () => {
  it("splits by series value and estimator", () => {
    const rows = loadResultsCsv(LEFT);
    const series = groupSeries(rows, "instance_id");
    const labels = series.map((s) => s.label);
    expect(labels).toContain("aligned (lr)");
    expect(labels).toContain("reversed (reg)");
    expect(new Set(labels).size).toBe(6);
    for (const s of series) {
      const ns = s.points.map((p) => p[0]);
      expect([...ns].sort((a, b) => a - b)).toEqual(ns);
    }
  });

  it("rejects an unknown series column", () => {
    const rows = loadResultsCsv(LEFT);
    expect(() => groupSeries(rows, "K")).toThrow(/series column K/);
  });
});

describe("left figure (estimator comparison)", () => {
  it("renders without error and leaves the input untouched", () => {
    const before = sha256(LEFT);
    const out = tmpOut("left.svg");
    const result = renderToFile({
      csvPaths: [LEFT],
      seriesKey: "instance_id",
      out,
      logX: true,
      references: { v1: 0.01, v1v2: 0.059 },
    });
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf8")).toContain("<svg");
    expect(result.series.length).toBe(6);
    expect(sha256(LEFT)).toBe(before);
  });

  it("has flat importance-weighting lines", () => {
    const result = buildPlot({
      csvPaths: [LEFT],
      seriesKey: "instance_id",
      out: "/dev/null",
      logX: true,
    });
    const lrSeries = result.series.filter((s) => s.label.includes("(lr)"));
    expect(lrSeries.length).toBe(3);
    for (const s of lrSeries) {
      const ys = s.points.map((p) => p[1]);
      const mean = ys.reduce((a, b) => a + b, 0) / ys.length;
      expect((Math.max(...ys) - Math.min(...ys)) / mean).toBeLessThan(0.1);
    }
  });
});

describe("right figure (action-count scaling)", () => {
  it("renders and peaks are ordered by K", () => {
    const out = tmpOut("right.svg");
    const result = renderToFile({
      csvPaths: [RIGHT],
      seriesKey: "instance_id",
      out,
      logX: true,
    });
    const peak = (label: string) =>
      Math.max(...result.series.find((s) => s.label === label)!.points.map((p) => p[1]));
    expect(peak("K=50")).toBeLessThan(peak("K=100"));
    expect(peak("K=100")).toBeLessThan(peak("K=200"));
  });
});

describe("determinism", () => {
  it("identical spec and input give identical plotted points and svg", () => {
    const spec = {
      csvPaths: [LEFT, RIGHT],
      seriesKey: "estimator",
      out: "/dev/null",
      logX: true,
    };
    const a = buildPlot(spec);
    const b = buildPlot(spec);
    expect(serializePoints(a.series)).toBe(serializePoints(b.series));
    expect(a.svg).toBe(b.svg);
  });
});

describe("edge cases", () => {
  it("renders a single-row csv as a single marker without crashing", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const csv = join(dir, "one.csv");
    writeFileSync(csv, `${HEADER}\nadhoc,only,reg,10,100,0.5,5.0,0.01,3\n`);
    const result = renderToFile({
      csvPaths: [csv],
      seriesKey: "instance_id",
      out: join(dir, "one.svg"),
    });
    expect(result.series).toEqual([{ label: "only", points: [[10, 5.0, 0.1]] }]);
    expect(readFileSync(join(dir, "one.svg"), "utf8")).toContain("circle");
  });

  it("draws reference lines when provided", () => {
    const result = buildPlot({
      csvPaths: [LEFT],
      seriesKey: "instance_id",
      out: "/dev/null",
      references: { v1: 0.0141, v1v2: 0.3702 },
    });
    expect(result.svg).toContain(">v1<");
    expect(result.svg).toContain(">v1v2<");
  });
});

describe("cli", () => {
  it("writes an svg and returns 0", () => {
    const out = tmpOut("cli.svg");
    const code = main(["--csv", LEFT, "--series", "instance_id", "--out", out,
                       "--logx", "--ref", "v1=0.01,v1v2=0.059"]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("</svg>");
  });

  it("exits 2 on schema violations and bad flags", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "a,b\n1,2\n");
    expect(main(["--csv", bad, "--series", "instance_id", "--out", join(dir, "x.svg")])).toBe(2);
    expect(main(["--nope"])).toBe(2);
    expect(main([])).toBe(2);
    expect(main(["--csv", LEFT, "--series", "instance_id", "--out", join(dir, "y.svg"),
                 "--ref", "v1=abc"])).toBe(2);
  });
});
