#!/usr/bin/env node
/**
 * plot_results <tail_vs_load|queue_trace|cdf> --in <csv> --out <svg>
 *              [--group <column>] [--logy] [--title <text>]
 *
 * Reads one of the simulator's CSV outputs and writes a deterministic SVG.
 */

import { readFileSync, writeFileSync } from "fs";
import { FigureKind, PlotSpec, renderPlot } from "./plots.js";

const KINDS: FigureKind[] = ["tail_vs_load", "queue_trace", "cdf"];

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error("usage: plot_results <tail_vs_load|queue_trace|cdf> "
    + "--in CSV --out SVG [--group COLUMN] [--logy] [--title TEXT]");
  process.exit(2);
}

export function parseArgs(argv: string[]): { spec: PlotSpec; inPath: string; outPath: string } {
  if (argv.length === 0) usage("missing figure kind");
  const kind = argv[0] as FigureKind;
  if (!KINDS.includes(kind)) usage(`unknown figure kind "${argv[0]}"`);
  let inPath = "";
  let outPath = "";
  let groupBy: string | undefined;
  let logY = false;
  let title: string | undefined;
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) usage(`${arg} needs a value`);
      return argv[++i];
    };
    if (arg === "--in") inPath = next();
    else if (arg === "--out") outPath = next();
    else if (arg === "--group") groupBy = next();
    else if (arg === "--logy") logY = true;
    else if (arg === "--title") title = next();
    else usage(`unknown option "${arg}"`);
  }
  if (!inPath || !outPath) usage("--in and --out are required");
  return { spec: { kind, input: "", groupBy, logY, title }, inPath, outPath };
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs(argv);
  } catch (e) {
    return 2;
  }
  try {
    const input = readFileSync(parsed.inPath, "utf8");
    const svg = renderPlot({ ...parsed.spec, input });
    writeFileSync(parsed.outPath, svg);
    console.log(`wrote ${parsed.outPath}`);
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
