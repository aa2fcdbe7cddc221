/**
 * Minimal deterministic SVG chart builder: fixed canvas, linear or log10
 * axes, polylines with optional dashing and markers, dashed overlay curves,
 * and a legend. No timestamps, randomness, or environment dependence, so the
 * output bytes are a pure function of the inputs.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  annotations?: string[];
}

const WIDTH = 640;
const HEIGHT = 480;
const MARGIN = { left: 72, right: 24, top: 40, bottom: 52 };

function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  return v.toFixed(2);
}

function tickValues(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

function tickLabel(v: number, log: boolean): string {
  const value = log ? Math.pow(10, v) : v;
  if (value !== 0 && (Math.abs(value) < 1e-3 || Math.abs(value) >= 1e4)) {
    return value.toExponential(1);
  }
  return String(Math.round(value * 1e6) / 1e6);
}

export function renderChart(spec: ChartSpec): string {
  const tx = (v: number) => (spec.logX ? Math.log10(v) : v);
  const ty = (v: number) => (spec.logY ? Math.log10(v) : v);
  const xs = spec.series.flatMap((s) => s.x.map(tx));
  const ys = spec.series.flatMap((s) => s.y.map(ty));
  if (xs.length === 0) throw new Error("nothing to plot");
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (xHi - xLo < 1e-12) {
    xLo -= 0.5;
    xHi += 0.5;
  }
  if (yHi - yLo < 1e-12) {
    yLo -= 0.5;
    yHi += 0.5;
  }
  const padY = 0.06 * (yHi - yLo);
  yLo -= padY;
  yHi += padY;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (v: number) => MARGIN.left + ((tx(v) - xLo) / (xHi - xLo)) * plotW;
  const py = (v: number) => MARGIN.top + plotH - ((ty(v) - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">${spec.title}</text>`,
  );

  // frame and ticks
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="black" stroke-width="1"/>`,
  );
  for (const v of tickValues(xLo, xHi)) {
    const x = MARGIN.left + ((v - xLo) / (xHi - xLo)) * plotW;
    parts.push(
      `<line x1="${fmt(x)}" y1="${MARGIN.top + plotH}" x2="${fmt(x)}" y2="${MARGIN.top + plotH + 5}" stroke="black"/>`,
    );
    parts.push(
      `<text x="${fmt(x)}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${tickLabel(v, !!spec.logX)}</text>`,
    );
  }
  for (const v of tickValues(yLo, yHi)) {
    const y = MARGIN.top + plotH - ((v - yLo) / (yHi - yLo)) * plotH;
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${fmt(y)}" x2="${MARGIN.left}" y2="${fmt(y)}" stroke="black"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(y + 3.5)}" text-anchor="end" font-family="sans-serif" font-size="11">${tickLabel(v, !!spec.logY)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${spec.yLabel}</text>`,
  );

  // series
  for (const s of spec.series) {
    const pts = s.x.map((v, i) => `${fmt(px(v))},${fmt(py(s.y[i]))}`).join(" ");
    const dash = s.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.5"${dash}/>`,
    );
    if (s.markers) {
      for (let i = 0; i < s.x.length; i++) {
        parts.push(
          `<circle cx="${fmt(px(s.x[i]))}" cy="${fmt(py(s.y[i]))}" r="2.5" fill="${s.color}"/>`,
        );
      }
    }
  }

  // legend
  let ly = MARGIN.top + 12;
  for (const s of spec.series) {
    const lx = MARGIN.left + 12;
    const dash = s.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.5"${dash}/>`,
    );
    parts.push(
      `<text x="${lx + 32}" y="${ly}" font-family="sans-serif" font-size="11">${s.label}</text>`,
    );
    ly += 15;
  }
  for (const a of spec.annotations ?? []) {
    parts.push(
      `<text x="${WIDTH - MARGIN.right - 8}" y="${ly}" text-anchor="end" font-family="sans-serif" font-size="11">${a}</text>`,
    );
    ly += 15;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
