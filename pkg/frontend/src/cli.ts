#!/usr/bin/env node
/**
 * Render calibration plot CSVs into figures.
 *
 *   gyrocal-render --kind convergence --in convergence.csv [availability.csv] --out fig.svg
 *   gyrocal-render --kind availability --in availability.csv --out fig.png
 *   gyrocal-render --kind motion_comparison --in a/summary.csv b/summary.csv ... --out fig.svg
 *   gyrocal-render --kind bias_summary --in convergence.csv summary.csv --out fig.png
 *
 * Output format follows the --out extension (.svg or .png).
 */

import { writeFileSync } from "node:fs";
import { basename, dirname } from "node:path";
import { parseArgs } from "node:util";

import { CsvError, readAvailability, readConvergence, readSummary } from "./csv.js";
import {
  availabilityFigure,
  biasSummaryFigure,
  convergenceFigure,
  motionComparisonFigure,
} from "./figures.js";
import { rasterize } from "./raster.js";
import { toSvg } from "./svg.js";
import type { Scene } from "./scene.js";

const KINDS = ["convergence", "availability", "motion_comparison", "bias_summary"] as const;
type Kind = (typeof KINDS)[number];

export class UsageError extends Error {}

function buildScene(kind: Kind, inputs: string[]): Scene {
  switch (kind) {
    case "convergence": {
      if (inputs.length < 1 || inputs.length > 2) {
        throw new UsageError("convergence needs: convergence.csv [availability.csv]");
      }
      const conv = readConvergence(inputs[0]);
      const avail = inputs.length === 2 ? readAvailability(inputs[1]) : null;
      return convergenceFigure(conv, avail);
    }
    case "availability": {
      if (inputs.length !== 1) throw new UsageError("availability needs exactly one CSV");
      return availabilityFigure(readAvailability(inputs[0]));
    }
    case "motion_comparison": {
      if (inputs.length < 1) throw new UsageError("motion_comparison needs one summary.csv per motion");
      const items = inputs.map((path) => ({
        label: basename(dirname(path)) || basename(path, ".csv"),
        summary: readSummary(path),
      }));
      return motionComparisonFigure(items);
    }
    case "bias_summary": {
      if (inputs.length !== 2) throw new UsageError("bias_summary needs: convergence.csv summary.csv");
      return biasSummaryFigure(readConvergence(inputs[0]), readSummary(inputs[1]));
    }
  }
}

export function render(kind: Kind, inputs: string[], outPath: string): void {
  const scene = buildScene(kind, inputs);
  if (outPath.endsWith(".svg")) {
    writeFileSync(outPath, toSvg(scene));
  } else if (outPath.endsWith(".png")) {
    writeFileSync(outPath, rasterize(scene));
  } else {
    throw new UsageError(`unsupported output extension (use .svg or .png): ${outPath}`);
  }
}

export function runCli(argv: string[]): number {
  try {
    const { values, positionals } = parseArgs({
      args: argv,
      options: {
        kind: { type: "string" },
        in: { type: "string", multiple: true },
        out: { type: "string" },
      },
      allowPositionals: true,
    });
    const kind = values.kind as string | undefined;
    if (!kind || !(KINDS as readonly string[]).includes(kind)) {
      throw new UsageError(`--kind must be one of: ${KINDS.join(", ")}`);
    }
    // inputs may come via repeated --in or as positionals after one --in
    const inputs = [...(values.in ?? []), ...positionals];
    if (inputs.length === 0) throw new UsageError("no input CSVs (--in)");
    if (!values.out) throw new UsageError("missing --out path");
    render(kind as Kind, inputs, values.out);
    console.log(`wrote ${values.out}`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError || err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("gyrocal-render")) {
  process.exit(runCli(process.argv.slice(2)));
}
