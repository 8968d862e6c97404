/**
 * The three figure kinds rendered from the simulator's CSV schemas:
 *
 *  - tail_vs_load: p99 latency vs normalized load from summary.csv, one
 *    line per value of the grouping column (default "experiment").
 *  - queue_trace: bottleneck queue occupancy step plot from qtrace.csv,
 *    with TRIM and DROP events marked; rows must be time-sorted.
 *  - cdf: latency CDF from samples.csv, one line per group.
 */

import { Table, columnIndex, numericColumn, parseCsv } from "./csv.js";
import { PALETTE, SvgChart, linearScale, logScale } from "./svg.js";

export type FigureKind = "tail_vs_load" | "queue_trace" | "cdf";

export interface PlotSpec {
  kind: FigureKind;
  input: string;          // CSV text
  groupBy?: string;       // series grouping column
  logY?: boolean;
  title?: string;
}

function groups(table: Table, column: string): Map<string, number[]> {
  const idx = columnIndex(table, column);
  const out = new Map<string, number[]>();
  table.rows.forEach((row, i) => {
    const key = row[idx];
    const bucket = out.get(key);
    if (bucket) bucket.push(i);
    else out.set(key, [i]);
  });
  return out;
}

export function plotTailVsLoad(spec: PlotSpec): string {
  const table = parseCsv(spec.input);
  if (table.rows.length === 0) {
    throw new Error("summary CSV has no data rows");
  }
  const load = numericColumn(table, "normalized_load");
  const p99 = numericColumn(table, "p99_ns");
  const series = groups(table, spec.groupBy ?? "experiment");

  const chart = new SvgChart(spec.title ?? "99% tail latency vs load",
                             "normalized load", "p99 latency (ns)");
  const xs = linearScale(Math.min(...load), Math.max(...load),
                         chart.plotLeft, chart.plotRight);
  const lo = Math.min(...p99);
  const hi = Math.max(...p99);
  const ys = spec.logY
    ? logScale(lo, hi, chart.plotBottom, chart.plotTop)
    : linearScale(0, hi, chart.plotBottom, chart.plotTop);
  chart.axes(xs, ys);

  const legend: Array<[string, string]> = [];
  let c = 0;
  for (const [name, idxs] of series) {
    const color = PALETTE[c++ % PALETTE.length];
    const pts = idxs
      .map((i) => [load[i], p99[i]] as [number, number])
      .sort((a, b) => a[0] - b[0])
      .map(([x, y]) => [xs(x), ys(y)] as [number, number]);
    chart.polyline(pts, color, "series");
    for (const [px, py] of pts) chart.dot(px, py, color, "pt");
    legend.push([name, color]);
  }
  chart.legend(legend);
  return chart.render();
}

export function plotQueueTrace(spec: PlotSpec): string {
  const table = parseCsv(spec.input);
  if (table.rows.length === 0) {
    throw new Error("queue trace CSV has no data rows");
  }
  const t = numericColumn(table, "t_ns");
  const occ = numericColumn(table, "occupancy_bytes");
  const action = columnIndex(table, "action");
  for (let i = 1; i < t.length; i++) {
    if (t[i] < t[i - 1]) {
      throw new Error(`queue trace must be time-sorted (row ${i + 2})`);
    }
  }

  const chart = new SvgChart(spec.title ?? "bottleneck queue occupancy",
                             "time (ns)", "occupancy (bytes)");
  const xs = linearScale(t[0], t[t.length - 1] || t[0] + 1,
                         chart.plotLeft, chart.plotRight);
  const ys = linearScale(0, Math.max(...occ), chart.plotBottom, chart.plotTop);
  chart.axes(xs, ys);

  // step curve: occupancy holds its value until the next event
  const pts: Array<[number, number]> = [];
  for (let i = 0; i < t.length; i++) {
    if (i > 0) pts.push([xs(t[i]), ys(occ[i - 1])]);
    pts.push([xs(t[i]), ys(occ[i])]);
  }
  chart.polyline(pts, PALETTE[0], "occupancy");

  const markers: Array<[string, string]> = [["occupancy", PALETTE[0]]];
  let sawTrim = false;
  let sawDrop = false;
  table.rows.forEach((row, i) => {
    if (row[action] === "TRIM") {
      chart.marker(xs(t[i]), ys(occ[i]), PALETTE[1], "trim");
      sawTrim = true;
    } else if (row[action] === "DROP") {
      chart.marker(xs(t[i]), ys(occ[i]), PALETTE[3], "drop");
      sawDrop = true;
    }
  });
  if (sawTrim) markers.push(["TRIM", PALETTE[1]]);
  if (sawDrop) markers.push(["DROP", PALETTE[3]]);
  chart.legend(markers);
  return chart.render();
}

export function plotCdf(spec: PlotSpec): string {
  const table = parseCsv(spec.input);
  if (table.rows.length === 0) {
    throw new Error("samples CSV has no data rows");
  }
  const lat = numericColumn(table, "latency_ns");
  const series = groups(table, spec.groupBy ?? "experiment");

  const chart = new SvgChart(spec.title ?? "latency CDF",
                             "latency (ns)", "fraction of requests");
  const lo = Math.min(...lat);
  const hi = Math.max(...lat);
  const xs = spec.logY
    ? logScale(lo, hi, chart.plotLeft, chart.plotRight)
    : linearScale(lo, hi, chart.plotLeft, chart.plotRight);
  const ys = linearScale(0, 1, chart.plotBottom, chart.plotTop);
  chart.axes(xs, ys);

  const legend: Array<[string, string]> = [];
  let c = 0;
  for (const [name, idxs] of series) {
    const color = PALETTE[c++ % PALETTE.length];
    const values = idxs.map((i) => lat[i]).sort((a, b) => a - b);
    const pts: Array<[number, number]> = [];
    values.forEach((v, i) => {
      pts.push([xs(v), ys(i / values.length)]);
      pts.push([xs(v), ys((i + 1) / values.length)]);
    });
    chart.polyline(pts, color, "cdf");
    legend.push([name, color]);
  }
  chart.legend(legend);
  return chart.render();
}

export function renderPlot(spec: PlotSpec): string {
  switch (spec.kind) {
    case "tail_vs_load": return plotTailVsLoad(spec);
    case "queue_trace": return plotQueueTrace(spec);
    case "cdf": return plotCdf(spec);
  }
}
