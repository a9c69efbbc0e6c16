/** SVG serialization of a scene. */

import type { Scene } from "./scene.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

const round = (v: number) => Math.round(v * 100) / 100;

export function toSvg(scene: Scene): string {
  const out: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" height="${scene.height}" viewBox="0 0 ${scene.width} ${scene.height}">`,
    `<rect x="0" y="0" width="${scene.width}" height="${scene.height}" fill="white"/>`,
  ];
  for (const p of scene.primitives) {
    if (p.kind === "rect") {
      const cls = p.className ? ` class="${esc(p.className)}"` : "";
      const op = p.opacity !== undefined ? ` fill-opacity="${p.opacity}"` : "";
      out.push(
        `<rect${cls} x="${round(p.x)}" y="${round(p.y)}" width="${round(p.w)}" height="${round(p.h)}" fill="${p.fill}"${op}/>`,
      );
    } else if (p.kind === "polyline") {
      const cls = p.className ? ` class="${esc(p.className)}"` : "";
      const dash = p.dash ? ` stroke-dasharray="${p.dash}"` : "";
      const pts = p.points.map(([x, y]) => `${round(x)},${round(y)}`).join(" ");
      out.push(
        `<polyline${cls} points="${pts}" fill="none" stroke="${p.stroke}" stroke-width="${p.width}"${dash}/>`,
      );
    } else {
      const anchor = p.anchor ?? "start";
      out.push(
        `<text x="${round(p.x)}" y="${round(p.y)}" font-family="sans-serif" font-size="${p.size}" text-anchor="${anchor}" fill="${p.fill ?? "#333"}">${esc(p.text)}</text>`,
      );
    }
  }
  out.push("</svg>");
  return out.join("\n") + "\n";
}
