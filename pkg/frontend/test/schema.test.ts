import { describe, expect, it } from "vitest";

import { SchemaError, metricSeries, parseMetricsCsv } from "../src/schema.js";

const GOOD =
  "k,consensus_variance,dist_sq,accuracy\n" +
  "0,1.5,4.0,\n" +
  "10,0.75,2.0,0.5\n" +
  "20,0.25,,0.75\n";

describe("parseMetricsCsv", () => {
  it("parses the simulator schema with optional cells", () => {
    const rows = parseMetricsCsv(GOOD, "good.csv");
    expect(rows).toHaveLength(3);
    expect(rows[0]).toEqual({ k: 0, consensus_variance: 1.5, dist_sq: 4.0, accuracy: null });
    expect(rows[2].dist_sq).toBeNull();
    expect(rows[2].accuracy).toBe(0.75);
  });

  it("rejects an empty file naming it", () => {
    expect(() => parseMetricsCsv("", "runs/empty.csv")).toThrowError(
      /runs\/empty\.csv: empty CSV/,
    );
  });

  it("rejects a header-only file", () => {
    expect(() =>
      parseMetricsCsv("k,consensus_variance,dist_sq,accuracy\n", "h.csv"),
    ).toThrowError(/h\.csv: no data rows/);
  });

  it("rejects a wrong header naming the file", () => {
    const bad = "step,variance\n1,2\n";
    expect(() => parseMetricsCsv(bad, "runs/old-format.csv")).toThrowError(SchemaError);
    expect(() => parseMetricsCsv(bad, "runs/old-format.csv")).toThrowError(
      /runs\/old-format\.csv: bad header/,
    );
  });

  it("rejects non-numeric cells with the row number", () => {
    const bad = "k,consensus_variance,dist_sq,accuracy\n0,oops,,\n";
    expect(() => parseMetricsCsv(bad, "x.csv")).toThrowError(/x\.csv: row 2/);
  });

  it("rejects a missing required variance cell", () => {
    const bad = "k,consensus_variance,dist_sq,accuracy\n0,,,\n";
    expect(() => parseMetricsCsv(bad, "x.csv")).toThrowError(SchemaError);
  });
});

describe("metricSeries", () => {
  it("skips empty cells per metric", () => {
    const rows = parseMetricsCsv(GOOD, "good.csv");
    expect(metricSeries(rows, "consensus_variance")).toHaveLength(3);
    expect(metricSeries(rows, "dist_sq")).toEqual([
      { k: 0, value: 4.0 },
      { k: 10, value: 2.0 },
    ]);
    expect(metricSeries(rows, "accuracy")).toHaveLength(2);
  });
});
