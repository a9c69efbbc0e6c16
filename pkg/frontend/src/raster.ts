/**
 * Dependency-free PNG rasterization of a scene: RGBA buffer, rect fill,
 * anti-alias-free line drawing, zlib-compressed PNG chunks via node:zlib.
 * Text primitives are skipped in raster output (the SVG backend carries
 * the annotations); geometry is identical.
 */

import { deflateSync } from "node:zlib";
import type { Polyline, Rect, Scene } from "./scene.js";

const NAMED: Record<string, [number, number, number]> = {
  white: [255, 255, 255],
  black: [0, 0, 0],
  magenta: [255, 0, 255],
  gray: [128, 128, 128],
};

export function parseColor(c: string): [number, number, number] {
  if (c.startsWith("#")) {
    const hex = c.slice(1);
    const full = hex.length === 3 ? hex.split("").map((h) => h + h).join("") : hex;
    return [
      parseInt(full.slice(0, 2), 16),
      parseInt(full.slice(2, 4), 16),
      parseInt(full.slice(4, 6), 16),
    ];
  }
  const named = NAMED[c.toLowerCase()];
  if (!named) throw new Error(`unsupported color: ${c}`);
  return named;
}

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8ClampedArray;

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
    this.data = new Uint8ClampedArray(width * height * 4).fill(255);
  }

  blend(x: number, y: number, rgb: [number, number, number], alpha: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    for (let c = 0; c < 3; c++) {
      this.data[i + c] = Math.round(rgb[c] * alpha + this.data[i + c] * (1 - alpha));
    }
    this.data[i + 3] = 255;
  }

  fillRect(r: Rect): void {
    const rgb = parseColor(r.fill);
    const alpha = r.opacity ?? 1.0;
    const x0 = Math.max(0, Math.round(r.x));
    const y0 = Math.max(0, Math.round(r.y));
    const x1 = Math.min(this.width, Math.round(r.x + r.w));
    const y1 = Math.min(this.height, Math.round(r.y + r.h));
    for (let y = y0; y < y1; y++) {
      for (let x = x0; x < x1; x++) this.blend(x, y, rgb, alpha);
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, rgb: [number, number, number], w: number): void {
    // Bresenham with a square pen of the given width.
    let ix0 = Math.round(x0);
    let iy0 = Math.round(y0);
    const ix1 = Math.round(x1);
    const iy1 = Math.round(y1);
    const dx = Math.abs(ix1 - ix0);
    const dy = -Math.abs(iy1 - iy0);
    const sx = ix0 < ix1 ? 1 : -1;
    const sy = iy0 < iy1 ? 1 : -1;
    let err = dx + dy;
    const r = Math.max(0, Math.floor(w / 2));
    for (;;) {
      for (let oy = -r; oy <= r; oy++) {
        for (let ox = -r; ox <= r; ox++) this.blend(ix0 + ox, iy0 + oy, rgb, 1.0);
      }
      if (ix0 === ix1 && iy0 === iy1) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        ix0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        iy0 += sy;
      }
    }
  }

  polyline(p: Polyline): void {
    const rgb = parseColor(p.stroke);
    for (let i = 1; i < p.points.length; i++) {
      const [xa, ya] = p.points[i - 1];
      const [xb, yb] = p.points[i];
      this.line(xa, ya, xb, yb, rgb, p.width);
    }
  }
}

function chunk(type: string, payload: Buffer): Buffer {
  const len = Buffer.alloc(4);
  len.writeUInt32BE(payload.length);
  const body = Buffer.concat([Buffer.from(type, "ascii"), payload]);
  const crcBuf = Buffer.alloc(4);
  crcBuf.writeUInt32BE(crc32(body) >>> 0);
  return Buffer.concat([len, body, crcBuf]);
}

let CRC_TABLE: Uint32Array | null = null;

function crc32(buf: Buffer): number {
  if (!CRC_TABLE) {
    CRC_TABLE = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      CRC_TABLE[n] = c >>> 0;
    }
  }
  let c = 0xffffffff;
  for (const b of buf) c = CRC_TABLE[(c ^ b) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

export function encodePng(raster: Raster): Buffer {
  const { width, height, data } = raster;
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 6; // RGBA
  const rows = Buffer.alloc((width * 4 + 1) * height);
  for (let y = 0; y < height; y++) {
    rows[y * (width * 4 + 1)] = 0; // filter: none
    Buffer.from(data.buffer, y * width * 4, width * 4).copy(rows, y * (width * 4 + 1) + 1);
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(rows)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export function rasterize(scene: Scene): Buffer {
  const raster = new Raster(scene.width, scene.height);
  for (const p of scene.primitives) {
    if (p.kind === "rect") raster.fillRect(p);
    else if (p.kind === "polyline") raster.polyline(p);
    // text skipped in raster output
  }
  return encodePng(raster);
}
