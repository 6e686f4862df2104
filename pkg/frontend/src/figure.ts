/**
 * Deterministic SVG line figures over metrics CSV logs.
 *
 * The renderer is a pure function of its inputs: identical CSV bytes produce
 * an identical SVG string. Variance-style metrics are drawn on a log y-axis.
 */

import { MetricName, MetricsRow, SchemaError, metricSeries, parseMetricsCsv } from "./schema.js";

export interface SeriesInput {
  /** Path or other identifier, used in error messages. */
  file: string;
  /** Raw CSV text. */
  text: string;
  /** Legend label. */
  label: string;
}

export interface FigureSpec {
  title: string;
  metric: MetricName;
  inputs: SeriesInput[];
  /** Defaults to log scale for consensus_variance and dist_sq. */
  logY?: boolean;
  width?: number;
  height?: number;
}

/** Fixed palette so legend colors never depend on rendering order quirks. */
export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const MARGIN = { top: 34, right: 16, bottom: 40, left: 64 };

export function defaultLogY(metric: MetricName): boolean {
  return metric === "consensus_variance" || metric === "dist_sq";
}

function fmt(v: number): string {
  // Fixed-notation tick labels, trimmed; exponent form for extremes.
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    return v.toExponential(1);
  }
  return Number(v.toPrecision(4)).toString();
}

function linearTicks(lo: number, hi: number, n = 5): number[] {
  if (lo === hi) return [lo];
  const step = (hi - lo) / (n - 1);
  return Array.from({ length: n }, (_, i) => lo + i * step);
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * 1.0001; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length > 0 ? ticks : [lo, hi];
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function makeScale(lo: number, hi: number, rangeLo: number, rangeHi: number, log: boolean): Scale {
  if (log) {
    const [llo, lhi] = [Math.log10(lo), Math.log10(hi)];
    const span = lhi - llo || 1;
    const f = ((v: number) =>
      rangeLo + ((Math.log10(v) - llo) / span) * (rangeHi - rangeLo)) as Scale;
    f.ticks = logTicks(lo, hi);
    return f;
  }
  const span = hi - lo || 1;
  const f = ((v: number) => rangeLo + ((v - lo) / span) * (rangeHi - rangeLo)) as Scale;
  f.ticks = linearTicks(lo, hi);
  return f;
}

/** Render the figure to a standalone SVG string. */
export function renderFigure(spec: FigureSpec): string {
  if (spec.inputs.length === 0) {
    throw new Error("figure needs at least one input CSV");
  }
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const logY = spec.logY ?? defaultLogY(spec.metric);

  const series = spec.inputs.map((input) => {
    const rows: MetricsRow[] = parseMetricsCsv(input.text, input.file);
    let points = metricSeries(rows, spec.metric);
    if (points.length === 0) {
      throw new SchemaError(input.file, `metric ${spec.metric} has no values`);
    }
    if (logY) {
      points = points.filter((p) => p.value > 0);
      if (points.length === 0) {
        throw new SchemaError(input.file, `metric ${spec.metric} has no positive values for a log axis`);
      }
    }
    return { label: input.label, points };
  });

  const allPoints = series.flatMap((s) => s.points);
  const xLo = Math.min(...allPoints.map((p) => p.k));
  const xHi = Math.max(...allPoints.map((p) => p.k));
  const yLo = Math.min(...allPoints.map((p) => p.value));
  const yHi = Math.max(...allPoints.map((p) => p.value));

  const x = makeScale(xLo, xHi, MARGIN.left, width - MARGIN.right, false);
  const y = makeScale(yLo, yHi, height - MARGIN.bottom, MARGIN.top, logY);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="15">${escapeXml(spec.title)}</text>`,
  );

  // Axes.
  const x0 = MARGIN.left;
  const x1 = width - MARGIN.right;
  const yBase = height - MARGIN.bottom;
  parts.push(`<line x1="${x0}" y1="${yBase}" x2="${x1}" y2="${yBase}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${yBase}" stroke="black"/>`);
  for (const t of x.ticks) {
    const px = x(t).toFixed(2);
    parts.push(`<line x1="${px}" y1="${yBase}" x2="${px}" y2="${yBase + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${yBase + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of y.ticks) {
    const py = y(t).toFixed(2);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py}" text-anchor="end" dominant-baseline="middle">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 8}" text-anchor="middle">iteration</text>`,
  );
  parts.push(
    `<text x="16" y="${(MARGIN.top + yBase) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${(MARGIN.top + yBase) / 2})">` +
      `${escapeXml(spec.metric)}${logY ? " (log)" : ""}</text>`,
  );

  // Data lines.
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const d = s.points
      .map((p) => `${x(p.k).toFixed(2)},${y(p.value).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline points="${d}" fill="none" stroke="${color}" stroke-width="1.5" data-label="${escapeXml(s.label)}"/>`,
    );
  });

  // Legend.
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const ly = MARGIN.top + 6 + idx * 16;
    parts.push(`<line x1="${x1 - 130}" y1="${ly}" x2="${x1 - 106}" y2="${ly}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${x1 - 100}" y="${ly + 4}">${escapeXml(s.label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
