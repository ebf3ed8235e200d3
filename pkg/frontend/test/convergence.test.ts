import { describe, expect, it } from "vitest";

import { convergencePlot } from "../src/convergence.js";

function synthSeries(label: string, rate: number, scale = 1.0) {
  const n = [100, 300, 1000, 3000, 10000, 30000, 100000];
  return { label, n, y: n.map((v) => scale * v ** -rate) };
}

function fittedSlopes(svg: string): Map<string, number> {
  const out = new Map<string, number>();
  const re = /data-series="([^"]+)"[^>]*data-fitted-slope="([^"]+)"/g;
  for (const m of svg.matchAll(re)) out.set(m[1], Number(m[2]));
  return out;
}

function triangleSlopes(svg: string): number[] {
  const out: number[] = [];
  const re = /data-reference-triangle="hypotenuse"[^>]*data-slope="([^"]+)"/g;
  for (const m of svg.matchAll(re)) out.push(Number(m[1]));
  return out;
}

describe("convergencePlot", () => {
  it("draws series parallel to a matching reference triangle", () => {
    const svg = convergencePlot({
      series: [synthSeries("ada", 0.5)],
      slopes: [0.5],
      columnLabel: "eta",
    });
    expect(svg).toContain("<svg");
    const fitted = fittedSlopes(svg).get("ada")!;
    const tri = triangleSlopes(svg);
    expect(tri).toEqual([0.5]);
    expect(Math.abs(fitted - tri[0])).toBeLessThan(1e-9);
  });

  it("handles several series and slopes with a legend", () => {
    const svg = convergencePlot({
      series: [synthSeries("ada", 1.0), synthSeries("uni", 0.33, 2)],
      slopes: [1 / 3, 1],
      columnLabel: "err_energy",
    });
    expect(fittedSlopes(svg).size).toBe(2);
    expect(triangleSlopes(svg)).toHaveLength(2);
    expect(svg).toContain(">ada<");
    expect(svg).toContain(">uni<");
  });

  it("accepts an empty slope list (no triangles)", () => {
    const svg = convergencePlot({
      series: [synthSeries("ada", 0.5)],
      slopes: [],
      columnLabel: "eta",
    });
    expect(triangleSlopes(svg)).toHaveLength(0);
    expect(svg).toContain("data-series");
  });

  it("rejects empty input and bad slopes", () => {
    expect(() =>
      convergencePlot({ series: [], slopes: [], columnLabel: "eta" }),
    ).toThrow(/at least one/);
    expect(() =>
      convergencePlot({
        series: [synthSeries("a", 0.5)],
        slopes: [-1],
        columnLabel: "eta",
      }),
    ).toThrow(/positive/);
    expect(() =>
      convergencePlot({
        series: [{ label: "a", n: [1, 2], y: [0, 1] }],
        slopes: [],
        columnLabel: "eta",
      }),
    ).toThrow(/strictly positive/);
  });
});
