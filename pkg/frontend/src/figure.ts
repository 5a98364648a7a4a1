/**
 * Step-plot renderer for CDF comparison figures.
 *
 * The line convention mirrors the harness reports: the first curve (the
 * empirical CDF of the statistic) is a solid black line, the second (the
 * chi-square reference) a dashed red line, the third (the cone or mixture
 * reference) a dotted blue line.  Output is a standalone SVG file, which
 * keeps rendering deterministic and dependency-free under Node.
 */

import { writeFileSync } from "node:fs";

import { CdfPoint, readCdfCsv } from "./csv.js";

export interface FigureSpec {
  /** One CSV path per curve, each with (value, cdf) rows. */
  curves: string[];
  /** Legend labels, one per curve. */
  labels: string[];
  /** Output image path (SVG). */
  out: string;
  title?: string;
  width?: number;
  height?: number;
}

interface CurveStyle {
  stroke: string;
  dash: string | null;
  width: number;
}

const CURVE_STYLES: CurveStyle[] = [
  { stroke: "#000000", dash: null, width: 1.8 }, // empirical: solid black
  { stroke: "#cc2222", dash: "9,5", width: 1.8 }, // chi-square: dashed red
  { stroke: "#2244cc", dash: "2,5", width: 2.2 }, // cone/mixture: dotted blue
  { stroke: "#888888", dash: "6,3,2,3", width: 1.5 },
];

function styleFor(index: number): CurveStyle {
  return CURVE_STYLES[Math.min(index, CURVE_STYLES.length - 1)];
}

const round = (x: number) => Number(x.toFixed(2));

function niceTicks(upper: number, count: number): number[] {
  if (upper <= 0) return [0, 1];
  const rawStep = upper / count;
  const magnitude = 10 ** Math.floor(Math.log10(rawStep));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * magnitude);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[candidates.length - 1];
  const ticks: number[] = [];
  for (let t = 0; t <= upper + 1e-9; t += step) ticks.push(Number(t.toPrecision(10)));
  return ticks;
}

function stepPath(
  points: CdfPoint[],
  toX: (v: number) => number,
  toY: (p: number) => number,
  xMax: number,
): string {
  const parts: string[] = [];
  // start on the baseline at the left edge
  parts.push(`M ${round(toX(0))} ${round(toY(0))}`);
  let lastCdf = 0;
  for (const point of points) {
    const x = round(toX(Math.min(point.value, xMax)));
    parts.push(`L ${x} ${round(toY(lastCdf))}`);
    parts.push(`L ${x} ${round(toY(point.cdf))}`);
    lastCdf = point.cdf;
  }
  parts.push(`L ${round(toX(xMax))} ${round(toY(lastCdf))}`);
  return parts.join(" ");
}

const escapeXml = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

/** Build the SVG text for a set of parsed curves. */
export function figureSvg(curves: CdfPoint[][], labels: string[], spec: FigureSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 440;
  const margin = { left: 58, right: 16, top: spec.title ? 34 : 16, bottom: 46 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const xMax = Math.max(1e-9, ...curves.map((c) => c[c.length - 1].value));
  const toX = (v: number) => margin.left + (v / xMax) * plotW;
  const toY = (p: number) => margin.top + (1 - p) * plotH;

  const body: string[] = [];
  body.push(
    `<rect x="${margin.left}" y="${margin.top}" width="${round(plotW)}" height="${round(plotH)}" fill="none" stroke="#444" stroke-width="1"/>`,
  );
  for (const tick of niceTicks(xMax, 8)) {
    const x = round(toX(tick));
    body.push(`<line x1="${x}" y1="${round(toY(0))}" x2="${x}" y2="${round(toY(0)) + 5}" stroke="#444"/>`);
    body.push(
      `<text x="${x}" y="${round(toY(0)) + 20}" text-anchor="middle" font-size="12">${tick}</text>`,
    );
  }
  for (let p = 0; p <= 1.0001; p += 0.25) {
    const y = round(toY(p));
    body.push(`<line x1="${margin.left - 5}" y1="${y}" x2="${margin.left}" y2="${y}" stroke="#444"/>`);
    body.push(
      `<text x="${margin.left - 9}" y="${y + 4}" text-anchor="end" font-size="12">${p.toFixed(2)}</text>`,
    );
  }
  body.push(
    `<text x="${round(margin.left + plotW / 2)}" y="${height - 8}" text-anchor="middle" font-size="13">statistic value</text>`,
  );
  body.push(
    `<text x="16" y="${round(margin.top + plotH / 2)}" text-anchor="middle" font-size="13" transform="rotate(-90 16 ${round(margin.top + plotH / 2)})">cumulative probability</text>`,
  );

  curves.forEach((points, index) => {
    const style = styleFor(index);
    const dash = style.dash ? ` stroke-dasharray="${style.dash}"` : "";
    body.push(
      `<path d="${stepPath(points, toX, toY, xMax)}" fill="none" stroke="${style.stroke}" stroke-width="${style.width}"${dash}/>`,
    );
  });

  // legend, lower right where CDFs leave room
  const legendX = margin.left + plotW - 230;
  let legendY = margin.top + plotH - 18 * labels.length - 12;
  const legend: string[] = [];
  labels.forEach((label, index) => {
    const style = styleFor(index);
    const dash = style.dash ? ` stroke-dasharray="${style.dash}"` : "";
    const y = legendY + 18 * index + 9;
    legend.push(
      `<line x1="${legendX}" y1="${y}" x2="${legendX + 34}" y2="${y}" stroke="${style.stroke}" stroke-width="${style.width}"${dash}/>`,
    );
    legend.push(
      `<text x="${legendX + 40}" y="${y + 4}" font-size="12" class="legend-label">${escapeXml(label)}</text>`,
    );
  });

  const title = spec.title
    ? `<text x="${round(width / 2)}" y="22" text-anchor="middle" font-size="15">${escapeXml(spec.title)}</text>`
    : "";
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    `<rect width="${width}" height="${height}" fill="#ffffff"/>`,
    title,
    ...body,
    ...legend,
    `</svg>`,
    ``,
  ].join("\n");
}

/** Read every curve, render, and write the SVG named by the spec. */
export function render(spec: FigureSpec): void {
  if (spec.curves.length === 0) {
    throw new Error("at least one curve is required");
  }
  if (spec.labels.length !== spec.curves.length) {
    throw new Error(
      `got ${spec.labels.length} labels for ${spec.curves.length} curves; they must match`,
    );
  }
  const curves = spec.curves.map((path) => readCdfCsv(path));
  writeFileSync(spec.out, figureSvg(curves, spec.labels, spec));
}
