/**
 * Minimal deterministic SVG chart scaffolding: fixed canvas, linear or
 * log10 axes, polylines, point markers and a text legend. No timestamps,
 * no randomness: identical inputs render byte-identical files.
 */

export const WIDTH = 720;
export const HEIGHT = 440;
export const MARGIN = { left: 78, right: 24, top: 28, bottom: 52 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
  "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

export interface Scale {
  (v: number): number;
  ticks: number[];
}

function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (lo === hi) {
    return [lo];
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  f.ticks = niceTicks(lo, hi);
  return f;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(Math.max(lo, 1e-12));
  const lhi = Math.log10(Math.max(hi, lo * 10));
  const span = lhi - llo || 1;
  const f = ((v: number) =>
    outLo + ((Math.log10(Math.max(v, 1e-12)) - llo) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let d = Math.floor(llo); d <= Math.ceil(lhi); d++) {
    const t = Math.pow(10, d);
    if (t >= lo / 1.0001 && t <= hi * 1.0001) ticks.push(t);
  }
  f.ticks = ticks.length >= 2 ? ticks : [lo, hi];
  return f;
}

export function fmtNum(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e6) return `${Number((v / 1e6).toPrecision(4))}M`;
  if (a >= 1e3) return `${Number((v / 1e3).toPrecision(4))}k`;
  return `${Number(v.toPrecision(4))}`;
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export class SvgChart {
  private parts: string[] = [];
  constructor(
    readonly title: string,
    readonly xLabel: string,
    readonly yLabel: string,
  ) {}

  get plotLeft() { return MARGIN.left; }
  get plotRight() { return WIDTH - MARGIN.right; }
  get plotTop() { return MARGIN.top; }
  get plotBottom() { return HEIGHT - MARGIN.bottom; }

  axes(x: Scale, y: Scale): void {
    const p = this.parts;
    p.push(`<rect x="${this.plotLeft}" y="${this.plotTop}" width="${this.plotRight - this.plotLeft}" height="${this.plotBottom - this.plotTop}" fill="none" stroke="#444"/>`);
    for (const t of x.ticks) {
      const px = x(t).toFixed(2);
      p.push(`<line x1="${px}" y1="${this.plotBottom}" x2="${px}" y2="${this.plotBottom + 5}" stroke="#444"/>`);
      p.push(`<text x="${px}" y="${this.plotBottom + 20}" text-anchor="middle" font-size="12">${fmtNum(t)}</text>`);
    }
    for (const t of y.ticks) {
      const py = y(t).toFixed(2);
      p.push(`<line x1="${this.plotLeft - 5}" y1="${py}" x2="${this.plotLeft}" y2="${py}" stroke="#444"/>`);
      p.push(`<line x1="${this.plotLeft}" y1="${py}" x2="${this.plotRight}" y2="${py}" stroke="#ddd" stroke-dasharray="2,4"/>`);
      p.push(`<text x="${this.plotLeft - 9}" y="${Number(py) + 4}" text-anchor="end" font-size="12">${fmtNum(t)}</text>`);
    }
    p.push(`<text x="${(this.plotLeft + this.plotRight) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13">${esc(this.xLabel)}</text>`);
    p.push(`<text x="18" y="${(this.plotTop + this.plotBottom) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${(this.plotTop + this.plotBottom) / 2})">${esc(this.yLabel)}</text>`);
    p.push(`<text x="${(this.plotLeft + this.plotRight) / 2}" y="18" text-anchor="middle" font-size="14" font-weight="bold">${esc(this.title)}</text>`);
  }

  polyline(points: Array<[number, number]>, color: string, cls: string): void {
    const pts = points.map(([a, b]) => `${a.toFixed(2)},${b.toFixed(2)}`).join(" ");
    this.parts.push(`<polyline class="${cls}" points="${pts}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
  }

  dot(x: number, y: number, color: string, cls: string, r = 3): void {
    this.parts.push(`<circle class="${cls}" cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${color}"/>`);
  }

  marker(x: number, y: number, color: string, cls: string): void {
    const s = 4.5;
    const [px, py] = [x, y];
    this.parts.push(
      `<path class="${cls}" d="M ${(px - s).toFixed(2)} ${(py - s).toFixed(2)} L ${(px + s).toFixed(2)} ${(py + s).toFixed(2)} M ${(px - s).toFixed(2)} ${(py + s).toFixed(2)} L ${(px + s).toFixed(2)} ${(py - s).toFixed(2)}" stroke="${color}" stroke-width="2"/>`,
    );
  }

  legend(entries: Array<[string, string]>): void {
    entries.forEach(([label, color], i) => {
      const y = this.plotTop + 16 + i * 16;
      const x = this.plotRight - 170;
      this.parts.push(`<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" stroke="${color}" stroke-width="2.5"/>`);
      this.parts.push(`<text x="${x + 28}" y="${y}" font-size="12">${esc(label)}</text>`);
    });
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}
