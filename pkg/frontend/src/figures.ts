/**
 * Figure builders. Every figure is a `Scene` (see scene.ts) so it can be
 * serialized to SVG or rasterized to PNG identically.
 */

import type { AvailabilityData, AxisSummary, ConvergenceData } from "./csv.js";
import { extent, linearScale, ticks, type Primitive, type Scene } from "./scene.js";

export const AXIS_NAMES = ["x", "y", "z"] as const;
export const AXIS_COLORS = ["#d62728", "#2ca02c", "#1f77b4"] as const;
export const QSMF_COLOR = "magenta";

const WIDTH = 720;
const HEIGHT = 420;
const MARGIN = { left: 56, right: 16, top: 32, bottom: 42 };

interface Frame {
  sx: (v: number) => number;
  sy: (v: number) => number;
  prims: Primitive[];
}

function frame(
  xDomain: [number, number],
  yDomain: [number, number],
  title: string,
  xLabel: string,
  yLabel: string,
): Frame {
  const sx = linearScale(xDomain, [MARGIN.left, WIDTH - MARGIN.right]);
  const sy = linearScale(yDomain, [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const prims: Primitive[] = [];
  // gridlines + tick labels
  for (const tv of ticks(yDomain[0], yDomain[1])) {
    prims.push({
      kind: "polyline",
      points: [
        [MARGIN.left, sy(tv)],
        [WIDTH - MARGIN.right, sy(tv)],
      ],
      stroke: "#dddddd",
      width: 1,
      className: "grid",
    });
    prims.push({ kind: "text", x: MARGIN.left - 6, y: sy(tv) + 3, text: tv.toPrecision(3), size: 10, anchor: "end" });
  }
  for (const tv of ticks(xDomain[0], xDomain[1])) {
    prims.push({ kind: "text", x: sx(tv), y: HEIGHT - MARGIN.bottom + 14, text: String(tv), size: 10, anchor: "middle" });
  }
  // axes frame
  prims.push({
    kind: "polyline",
    points: [
      [MARGIN.left, MARGIN.top],
      [MARGIN.left, HEIGHT - MARGIN.bottom],
      [WIDTH - MARGIN.right, HEIGHT - MARGIN.bottom],
    ],
    stroke: "#333333",
    width: 1,
    className: "axes",
  });
  prims.push({ kind: "text", x: WIDTH / 2, y: 18, text: title, size: 13, anchor: "middle" });
  prims.push({ kind: "text", x: WIDTH / 2, y: HEIGHT - 8, text: xLabel, size: 11, anchor: "middle" });
  prims.push({ kind: "text", x: 14, y: MARGIN.top - 10, text: yLabel, size: 11 });
  return { sx, sy, prims };
}

/** Runs of truthy flags -> [start, end] index pairs. */
export function activeIntervals(flags: number[]): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  let start = -1;
  for (let i = 0; i < flags.length; i++) {
    if (flags[i] && start < 0) start = i;
    if (!flags[i] && start >= 0) {
      out.push([start, i - 1]);
      start = -1;
    }
  }
  if (start >= 0) out.push([start, flags.length - 1]);
  return out;
}

export function convergenceFigure(
  conv: ConvergenceData,
  avail: AvailabilityData | null,
  title = "Gyro bias estimates",
): Scene {
  const yVals = conv.bias.flat().concat(conv.ref.filter(Number.isFinite));
  const f = frame(
    [conv.t[0], conv.t[conv.t.length - 1]],
    extent(yVals),
    title,
    "time [s]",
    "bias [deg/s]",
  );
  const prims = f.prims;
  if (avail) {
    for (const [i0, i1] of activeIntervals(avail.qsmf)) {
      const x0 = f.sx(avail.t[i0]);
      const x1 = f.sx(avail.t[i1]);
      prims.push({
        kind: "rect",
        x: x0,
        y: MARGIN.top,
        w: Math.max(1, x1 - x0),
        h: HEIGHT - MARGIN.top - MARGIN.bottom,
        fill: QSMF_COLOR,
        opacity: 0.12,
        className: "qsmf-interval",
      });
    }
  }
  for (let ax = 0; ax < 3; ax++) {
    if (Number.isFinite(conv.ref[ax])) {
      prims.push({
        kind: "polyline",
        points: [
          [f.sx(conv.t[0]), f.sy(conv.ref[ax])],
          [f.sx(conv.t[conv.t.length - 1]), f.sy(conv.ref[ax])],
        ],
        stroke: AXIS_COLORS[ax],
        width: 1,
        dash: "6 4",
        className: `ref-${AXIS_NAMES[ax]}`,
      });
    }
    prims.push({
      kind: "polyline",
      points: conv.t.map((tv, i) => [f.sx(tv), f.sy(conv.bias[ax][i])] as [number, number]),
      stroke: AXIS_COLORS[ax],
      width: 2,
      className: `series-${AXIS_NAMES[ax]}`,
    });
    prims.push({
      kind: "text",
      x: WIDTH - MARGIN.right - 60 + ax * 22,
      y: MARGIN.top + 12,
      text: AXIS_NAMES[ax],
      size: 11,
      fill: AXIS_COLORS[ax],
    });
  }
  return { width: WIDTH, height: HEIGHT, primitives: prims };
}

export function availabilityFigure(avail: AvailabilityData, title = "Constraint availability"): Scene {
  const f = frame([avail.t[0], avail.t[avail.t.length - 1]], [-0.2, 3.4], title, "time [s]", "");
  const prims = f.prims;
  const lanes: Array<{ name: string; values: number[]; base: number; color: string }> = [
    { name: "qsmf", values: avail.qsmf, base: 2.4, color: QSMF_COLOR },
    { name: "quasi-static", values: avail.qs, base: 1.2, color: "#2ca02c" },
    { name: "accel mode", values: avail.accelMode.map((m) => m / 2), base: 0.0, color: "#1f77b4" },
  ];
  for (const lane of lanes) {
    const pts: Array<[number, number]> = [];
    lane.values.forEach((v, i) => {
      const y = f.sy(lane.base + v * 0.8);
      if (i > 0) pts.push([f.sx(avail.t[i]), f.sy(lane.base + lane.values[i - 1] * 0.8)]);
      pts.push([f.sx(avail.t[i]), y]);
    });
    prims.push({ kind: "polyline", points: pts, stroke: lane.color, width: 1.5, className: `lane-${lane.name.replace(" ", "-")}` });
    prims.push({ kind: "text", x: MARGIN.left + 4, y: f.sy(lane.base + 0.9), text: lane.name, size: 10, fill: lane.color });
  }
  return { width: WIDTH, height: HEIGHT, primitives: prims };
}

export interface LabeledSummary {
  label: string;
  summary: AxisSummary[];
}

export function motionComparisonFigure(items: LabeledSummary[], title = "RMS error by motion mode"): Scene {
  const rms = items.flatMap((it) => it.summary.map((s) => s.rmsErrorDps));
  const f = frame([0, 3], [0, Math.max(...rms) * 1.15 || 1], title, "", "RMS error [deg/s]");
  const prims = f.prims;
  const groupWidth = (WIDTH - MARGIN.left - MARGIN.right) / 3;
  const barWidth = (groupWidth * 0.8) / items.length;
  for (let ax = 0; ax < 3; ax++) {
    const gx = MARGIN.left + ax * groupWidth + groupWidth * 0.1;
    items.forEach((it, k) => {
      const s = it.summary.find((row) => row.axis === AXIS_NAMES[ax]);
      if (!s) return;
      const y = f.sy(s.rmsErrorDps);
      prims.push({
        kind: "rect",
        x: gx + k * barWidth,
        y,
        w: barWidth * 0.9,
        h: HEIGHT - MARGIN.bottom - y,
        fill: AXIS_COLORS[ax],
        opacity: 0.35 + (0.6 * (k + 1)) / items.length,
        className: `bar-${AXIS_NAMES[ax]}-${it.label}`,
      });
    });
    prims.push({
      kind: "text",
      x: gx + groupWidth * 0.4,
      y: HEIGHT - MARGIN.bottom + 14,
      text: `${AXIS_NAMES[ax]} axis`,
      size: 11,
      anchor: "middle",
    });
  }
  items.forEach((it, k) => {
    prims.push({
      kind: "text",
      x: MARGIN.left + 4,
      y: MARGIN.top + 12 + k * 12,
      text: it.label,
      size: 10,
    });
  });
  return { width: WIDTH, height: HEIGHT, primitives: prims };
}

export function biasSummaryFigure(
  conv: ConvergenceData,
  summary: AxisSummary[],
  title = "Bias before vs after calibration",
): Scene {
  const before = conv.ref.map(Math.abs);
  const after = summary.map((s) => Math.abs(s.rmsErrorDps));
  // log scale: uncalibrated biases are tens of times the residuals
  const toLog = (v: number) => Math.log10(Math.max(v, 1e-3));
  const f = frame([0, 3], [-3.1, Math.max(...before.map(toLog)) + 0.4], title, "", "log10 |bias| [deg/s]");
  const prims = f.prims;
  const groupWidth = (WIDTH - MARGIN.left - MARGIN.right) / 3;
  for (let ax = 0; ax < 3; ax++) {
    const gx = MARGIN.left + ax * groupWidth + groupWidth * 0.15;
    const barW = groupWidth * 0.28;
    const pairs: Array<[number, string, string]> = [
      [before[ax], "#999999", `before-${AXIS_NAMES[ax]}`],
      [after[ax] ?? 1e-3, AXIS_COLORS[ax], `after-${AXIS_NAMES[ax]}`],
    ];
    pairs.forEach(([v, color, cls], k) => {
      const y = f.sy(toLog(v));
      prims.push({
        kind: "rect",
        x: gx + k * (barW + 6),
        y,
        w: barW,
        h: HEIGHT - MARGIN.bottom - y,
        fill: color,
        className: cls,
      });
    });
    prims.push({
      kind: "text",
      x: gx + barW,
      y: HEIGHT - MARGIN.bottom + 14,
      text: `${AXIS_NAMES[ax]} axis`,
      size: 11,
      anchor: "middle",
    });
  }
  prims.push({ kind: "text", x: MARGIN.left + 4, y: MARGIN.top + 12, text: "gray: uncalibrated, colored: residual RMS", size: 10 });
  return { width: WIDTH, height: HEIGHT, primitives: prims };
}
