/**
 * Reader for the two-column (value, cdf) CSV files the lrtcone harness
 * writes for each distribution curve.
 */

import { readFileSync } from "node:fs";

export interface CdfPoint {
  value: number;
  cdf: number;
}

export class CsvError extends Error {
  constructor(
    public readonly file: string,
    public readonly line: number,
    detail: string,
  ) {
    super(`${file}:${line}: ${detail}`);
    this.name = "CsvError";
  }
}

/** Parse CSV text; `file` is used only for error messages. */
export function parseCdfCsv(text: string, file: string): CdfPoint[] {
  const lines = text.split(/\r?\n/);
  const points: CdfPoint[] = [];
  let sawHeader = false;
  for (let index = 0; index < lines.length; index++) {
    const raw = lines[index].trim();
    const lineNo = index + 1;
    if (raw === "") continue;
    if (!sawHeader) {
      // a "value,cdf" header is optional but must be well formed if present
      if (/^value\s*,\s*cdf$/i.test(raw)) {
        sawHeader = true;
        continue;
      }
      sawHeader = true;
    }
    const parts = raw.split(",");
    if (parts.length !== 2) {
      throw new CsvError(file, lineNo, `expected 2 columns, found ${parts.length}`);
    }
    const value = Number(parts[0]);
    const cdf = Number(parts[1]);
    if (!Number.isFinite(value) || !Number.isFinite(cdf)) {
      throw new CsvError(file, lineNo, `non-numeric entry in "${raw}"`);
    }
    if (cdf < -1e-9 || cdf > 1 + 1e-9) {
      throw new CsvError(file, lineNo, `cdf value ${cdf} outside [0, 1]`);
    }
    points.push({ value, cdf: Math.min(Math.max(cdf, 0), 1) });
  }
  if (points.length === 0) {
    throw new CsvError(file, 1, "no data rows");
  }
  points.sort((a, b) => a.value - b.value || a.cdf - b.cdf);
  return points;
}

export function readCdfCsv(path: string): CdfPoint[] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new CsvError(path, 0, `cannot read file (${(err as Error).message})`);
  }
  return parseCdfCsv(text, path);
}
