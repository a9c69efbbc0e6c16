/**
 * Minimal retained scene for the figures: a list of primitives that both
 * the SVG serializer and the PNG rasterizer understand. Coordinates are
 * pixels, origin top-left.
 */

export interface Rect {
  kind: "rect";
  x: number;
  y: number;
  w: number;
  h: number;
  fill: string;
  opacity?: number;
  className?: string;
}

export interface Polyline {
  kind: "polyline";
  points: Array<[number, number]>;
  stroke: string;
  width: number;
  dash?: string;
  className?: string;
}

export interface Text {
  kind: "text";
  x: number;
  y: number;
  text: string;
  size: number;
  anchor?: "start" | "middle" | "end";
  fill?: string;
}

export type Primitive = Rect | Polyline | Text;

export interface Scene {
  width: number;
  height: number;
  primitives: Primitive[];
}

export interface LinearScale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as LinearScale;
  f.domain = domain;
  return f;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  const finite = values.filter(Number.isFinite);
  if (finite.length === 0) return [0, 1];
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const p = (hi - lo) * pad;
  return [lo - p, hi + p];
}

export function ticks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const step0 = span / Math.max(1, count);
  const mag = 10 ** Math.floor(Math.log10(step0));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12; v += step) out.push(Number(v.toPrecision(12)));
  return out;
}
