/**
 * Readers for the calibration plot-data CSV contract.
 *
 * Headers (fixed, 6-decimal values):
 *   convergence.csv  t,bx,by,bz,refx,refy,refz
 *   availability.csv t,qsmf,qs,accel_mode
 *   summary.csv      axis,mean_error_dps,rms_error_dps,convergence_time_s,converged
 */

import { readFileSync } from "node:fs";

export class CsvError extends Error {}

export interface ConvergenceData {
  t: number[];
  bias: [number[], number[], number[]];
  ref: [number, number, number];
}

export interface AvailabilityData {
  t: number[];
  qsmf: number[];
  qs: number[];
  accelMode: number[];
}

export interface AxisSummary {
  axis: string;
  meanErrorDps: number;
  rmsErrorDps: number;
  convergenceTimeS: number | null;
  converged: boolean;
}

function readTable(path: string, expectedHeader: string): string[][] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${path}: empty file`);
  }
  if (lines[0].trim() !== expectedHeader) {
    throw new CsvError(
      `${path}: unexpected header ${JSON.stringify(lines[0])}, expected ${JSON.stringify(expectedHeader)}`,
    );
  }
  if (lines.length === 1) {
    throw new CsvError(`${path}: no data rows`);
  }
  const width = expectedHeader.split(",").length;
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",").map((c) => c.trim());
    if (cells.length !== width) {
      throw new CsvError(`${path}:${i + 2}: expected ${width} columns, got ${cells.length}`);
    }
    return cells;
  });
}

function num(path: string, row: number, cell: string): number {
  const v = Number(cell);
  if (!Number.isFinite(v) && cell.toLowerCase() !== "nan") {
    throw new CsvError(`${path}:${row}: not a number: ${JSON.stringify(cell)}`);
  }
  return v;
}

export function readConvergence(path: string): ConvergenceData {
  const rows = readTable(path, "t,bx,by,bz,refx,refy,refz");
  const t: number[] = [];
  const bias: [number[], number[], number[]] = [[], [], []];
  let ref: [number, number, number] = [NaN, NaN, NaN];
  rows.forEach((cells, i) => {
    t.push(num(path, i + 2, cells[0]));
    for (let ax = 0; ax < 3; ax++) bias[ax].push(num(path, i + 2, cells[1 + ax]));
    ref = [num(path, i + 2, cells[4]), num(path, i + 2, cells[5]), num(path, i + 2, cells[6])];
  });
  for (let i = 1; i < t.length; i++) {
    if (!(t[i] > t[i - 1])) throw new CsvError(`${path}: time column must increase`);
  }
  return { t, bias, ref };
}

export function readAvailability(path: string): AvailabilityData {
  const rows = readTable(path, "t,qsmf,qs,accel_mode");
  const data: AvailabilityData = { t: [], qsmf: [], qs: [], accelMode: [] };
  rows.forEach((cells, i) => {
    data.t.push(num(path, i + 2, cells[0]));
    data.qsmf.push(num(path, i + 2, cells[1]));
    data.qs.push(num(path, i + 2, cells[2]));
    data.accelMode.push(num(path, i + 2, cells[3]));
  });
  return data;
}

export function readSummary(path: string): AxisSummary[] {
  const rows = readTable(path, "axis,mean_error_dps,rms_error_dps,convergence_time_s,converged");
  return rows.map((cells, i) => {
    const conv = num(path, i + 2, cells[3]);
    return {
      axis: cells[0],
      meanErrorDps: num(path, i + 2, cells[1]),
      rmsErrorDps: num(path, i + 2, cells[2]),
      convergenceTimeS: Number.isNaN(conv) ? null : conv,
      converged: cells[4] === "1" || cells[4].toLowerCase() === "true",
    };
  });
}
