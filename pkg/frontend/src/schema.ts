/**
 * Metrics CSV ingestion.
 *
 * Every input file must follow the simulator's log schema
 * `k,consensus_variance,dist_sq,accuracy`; dist_sq and accuracy may be
 * empty on any row. Schema violations raise errors that name the
 * offending file.
 */

import Papa from "papaparse";
import { z } from "zod";

export const CSV_HEADER = ["k", "consensus_variance", "dist_sq", "accuracy"] as const;

export type MetricName = "consensus_variance" | "dist_sq" | "accuracy";

export interface MetricsRow {
  k: number;
  consensus_variance: number;
  dist_sq: number | null;
  accuracy: number | null;
}

const finite = z.number().finite();
const optionalFinite = finite.nullable();

const rowSchema = z.object({
  k: z.number().int().nonnegative(),
  consensus_variance: finite,
  dist_sq: optionalFinite,
  accuracy: optionalFinite,
});

export class SchemaError extends Error {
  constructor(public readonly file: string, detail: string) {
    super(`${file}: ${detail}`);
    this.name = "SchemaError";
  }
}

function parseCell(raw: string | undefined): number | null {
  if (raw === undefined || raw.trim() === "") return null;
  const v = Number(raw);
  return Number.isNaN(v) ? NaN : v;
}

/** Parse one metrics CSV; `file` is only used for error messages. */
export function parseMetricsCsv(text: string, file: string): MetricsRow[] {
  if (text.trim() === "") {
    throw new SchemaError(file, "empty CSV");
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(file, `CSV parse error: ${parsed.errors[0].message}`);
  }
  const lines = parsed.data;
  if (lines.length === 0) {
    throw new SchemaError(file, "empty CSV");
  }
  const header = lines[0].map((h) => h.trim());
  if (header.join(",") !== CSV_HEADER.join(",")) {
    throw new SchemaError(
      file,
      `bad header ${JSON.stringify(header.join(","))}; ` +
        `expected ${JSON.stringify(CSV_HEADER.join(","))}`,
    );
  }
  if (lines.length === 1) {
    throw new SchemaError(file, "no data rows");
  }
  const rows: MetricsRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i];
    const candidate = {
      k: parseCell(cells[0]),
      consensus_variance: parseCell(cells[1]),
      dist_sq: parseCell(cells[2]),
      accuracy: parseCell(cells[3]),
    };
    const check = rowSchema.safeParse(candidate);
    if (!check.success) {
      throw new SchemaError(file, `row ${i + 1}: ${check.error.issues[0].message}`);
    }
    rows.push(check.data);
  }
  return rows;
}

/** Extract one metric as (k, value) points, skipping empty cells. */
export function metricSeries(
  rows: MetricsRow[],
  metric: MetricName,
): Array<{ k: number; value: number }> {
  const out: Array<{ k: number; value: number }> = [];
  for (const row of rows) {
    const v = row[metric];
    if (v !== null) out.push({ k: row.k, value: v });
  }
  return out;
}
