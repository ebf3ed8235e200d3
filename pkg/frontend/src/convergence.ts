/**
 * Log-log convergence plots with dashed reference-slope triangles.
 *
 * Each series is drawn as a polyline whose fitted tail decay rate is exposed
 * as a data-fitted-slope attribute; each reference triangle carries its
 * nominal rate in data-slope, so plots are machine-checkable.  Triangles are
 * anchored at the last data point of the first series.
 */

import { tailSlope } from "./csv.js";
import { PALETTE, Svg } from "./svg.js";

export interface SeriesSpec {
  label: string;
  n: number[];
  y: number[];
}

export interface ConvergencePlotSpec {
  series: SeriesSpec[];
  slopes: number[];
  columnLabel: string;
  width?: number;
  height?: number;
  tailFraction?: number;
}

interface LogScale {
  (v: number): number;
}

function makeLogScale(lo: number, hi: number, pxLo: number, pxHi: number): LogScale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  return (v: number) =>
    pxLo + ((Math.log10(v) - llo) / (lhi - llo || 1)) * (pxHi - pxLo);
}

function decadeTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); e <= Math.floor(Math.log10(hi) + 1e-9); e++) {
    out.push(10 ** e);
  }
  return out;
}

export function convergencePlot(spec: ConvergencePlotSpec): string {
  if (spec.series.length === 0) {
    throw new Error("convergence plot needs at least one series");
  }
  if (spec.slopes.some((s) => !(s > 0))) {
    throw new Error("reference slopes must be positive");
  }
  for (const s of spec.series) {
    if (s.n.length !== s.y.length || s.n.length < 2) {
      throw new Error(`series '${s.label}' needs at least two points`);
    }
    if (s.n.some((v) => !(v > 0)) || s.y.some((v) => !(v > 0))) {
      throw new Error(`series '${s.label}' must be strictly positive for log axes`);
    }
  }
  const width = spec.width ?? 640;
  const height = spec.height ?? 460;
  const margin = { left: 64, right: 18, top: 20, bottom: 46 };

  const allN = spec.series.flatMap((s) => s.n);
  const allY = spec.series.flatMap((s) => s.y);
  const nLo = Math.min(...allN);
  const nHi = Math.max(...allN);
  let yLo = Math.min(...allY);
  let yHi = Math.max(...allY);
  yLo /= 1.5;
  yHi *= 1.5;

  const sx = makeLogScale(nLo, nHi, margin.left, width - margin.right);
  const sy = makeLogScale(yLo, yHi, height - margin.bottom, margin.top);
  const svg = new Svg(width, height);

  // frame and decade grid
  svg.element("rect", {
    x: margin.left, y: margin.top,
    width: width - margin.left - margin.right,
    height: height - margin.top - margin.bottom,
    fill: "none", stroke: "#444", "stroke-width": 1,
  });
  for (const t of decadeTicks(nLo, nHi)) {
    const x = sx(t);
    svg.line(x, margin.top, x, height - margin.bottom,
             { stroke: "#ddd", "stroke-width": 0.6 });
    svg.text(x - 10, height - margin.bottom + 16, `1e${Math.round(Math.log10(t))}`);
  }
  for (const t of decadeTicks(yLo, yHi)) {
    const y = sy(t);
    svg.line(margin.left, y, width - margin.right, y,
             { stroke: "#ddd", "stroke-width": 0.6 });
    svg.text(margin.left - 40, y + 4, `1e${Math.round(Math.log10(t))}`);
  }
  svg.text(width / 2 - 40, height - 10, "number of elements");
  svg.text(12, margin.top + 10, spec.columnLabel);

  const tailFraction = spec.tailFraction ?? 0.4;
  spec.series.forEach((s, i) => {
    const pts = s.n.map((n, k) => [sx(n), sy(s.y[k])] as [number, number]);
    const fitted = tailSlope(s.n, s.y, tailFraction);
    svg.polyline(pts, {
      stroke: PALETTE[i % PALETTE.length],
      "stroke-width": 1.6,
      "data-series": s.label,
      "data-fitted-slope": fitted.toFixed(6),
    });
    // legend entry
    const ly = margin.top + 14 + 16 * i;
    svg.line(width - margin.right - 150, ly, width - margin.right - 120, ly,
             { stroke: PALETTE[i % PALETTE.length], "stroke-width": 1.6 });
    svg.text(width - margin.right - 112, ly + 4, s.label);
  });

  // reference triangles at the last point of the first series
  const first = spec.series[0];
  const xa = first.n[first.n.length - 1];
  const ya = first.y[first.y.length - 1];
  spec.slopes.forEach((s, i) => {
    const xb = xa / 4;
    const y1 = ya * 0.55 ** (i + 1);
    const y0 = y1 * (xa / xb) ** s;
    const p1: [number, number] = [sx(xb), sy(y0)];
    const p2: [number, number] = [sx(xa), sy(y1)];
    const corner: [number, number] = [sx(xb), sy(y1)];
    svg.polyline([p1, p2], {
      stroke: "#333", "stroke-width": 1.1, "stroke-dasharray": "5 4",
      "data-reference-triangle": "hypotenuse", "data-slope": s.toString(),
    });
    svg.polyline([p1, corner, p2], {
      stroke: "#333", "stroke-width": 0.8, "stroke-dasharray": "2 3",
      "data-reference-triangle": "legs", "data-slope": s.toString(),
    });
    svg.text(sx(xb) - 8, (sy(y0) + sy(y1)) / 2, `${s}`);
  });

  return svg.render();
}
