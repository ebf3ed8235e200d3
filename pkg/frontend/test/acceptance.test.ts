/**
 * End-to-end checks against real solver outputs (committed fixtures produced
 * by the CLI): figure-style convergence plots whose reference triangles are
 * parallel to the data within the rate tolerances, and the adaptive-mesh
 * wireframe with dashed Neumann edges and visible grading.
 */

import { mkdirSync, readFileSync, writeFileSync, existsSync } from "fs";
import { dirname, join } from "path";
import { fileURLToPath } from "url";
import { describe, expect, it } from "vitest";

import { convergencePlot } from "../src/convergence.js";
import { parseResultsCsv, seriesFromTable } from "../src/csv.js";
import { parseMeshFile } from "../src/meshfile.js";
import { meshPlot } from "../src/meshplot.js";

const here = dirname(fileURLToPath(import.meta.url));
const FIXTURES = join(here, "..", "fixtures");
const OUT = join(here, "..", "test-output");
mkdirSync(OUT, { recursive: true });

function loadSeries(file: string, column: string, label: string) {
  const table = parseResultsCsv(readFileSync(join(FIXTURES, file), "utf-8"));
  const { n, y } = seriesFromTable(table, column);
  return { label, n, y };
}

function fittedSlope(svg: string, label: string): number {
  const re = new RegExp(
    `data-series="${label}"[^>]*data-fitted-slope="([^"]+)"`,
  );
  const m = svg.match(re);
  expect(m, `series ${label} missing`).toBeTruthy();
  return Number(m![1]);
}

describe("convergence figures from solver CSVs", () => {
  it("smooth layer: energy errors parallel to the 1/2 triangle", () => {
    const svg = convergencePlot({
      series: [
        loadSeries("smooth_layer_ada_p1.csv", "err_energy", "adaptive"),
        loadSeries("smooth_layer_uni_p1.csv", "err_energy", "uniform"),
      ],
      slopes: [0.5],
      columnLabel: "err_energy",
    });
    writeFileSync(join(OUT, "fig1_smooth_layer_p1.svg"), svg);
    expect(Math.abs(fittedSlope(svg, "adaptive") - 0.5)).toBeLessThanOrEqual(0.10);
    expect(svg).toContain('data-reference-triangle="hypotenuse"');
  });

  it("singular L-shape: adaptive recovers 1/2, uniform stays at 1/3", () => {
    const svg = convergencePlot({
      series: [
        loadSeries("lshape_singular_ada_p1.csv", "err_energy", "adaptive"),
        loadSeries("lshape_singular_uni_p1.csv", "err_energy", "uniform"),
      ],
      slopes: [1 / 3, 0.5],
      columnLabel: "err_energy",
    });
    writeFileSync(join(OUT, "fig2_lshape_singular_p1.svg"), svg);
    expect(Math.abs(fittedSlope(svg, "adaptive") - 0.5)).toBeLessThanOrEqual(0.10);
    expect(Math.abs(fittedSlope(svg, "uniform") - 1 / 3)).toBeLessThanOrEqual(0.07);
    const uni = fittedSlope(svg, "uniform");
    const ada = fittedSlope(svg, "adaptive");
    expect(ada - uni).toBeGreaterThan(0.1);
  });

  it("practical L-shape: estimator rates parallel to the 1/2 and 1 triangles", () => {
    const svg = convergencePlot({
      series: [
        loadSeries("lshape_practical_ada_p1.csv", "eta", "adaptive P1"),
        loadSeries("lshape_practical_ada_p2.csv", "eta", "adaptive P2"),
      ],
      slopes: [0.5, 1.0],
      columnLabel: "eta",
    });
    writeFileSync(join(OUT, "fig3_lshape_practical.svg"), svg);
    expect(Math.abs(fittedSlope(svg, "adaptive P1") - 0.5)).toBeLessThanOrEqual(0.15);
    expect(Math.abs(fittedSlope(svg, "adaptive P2") - 1.0)).toBeLessThanOrEqual(0.2);
  });
});

describe("adaptive mesh figure", () => {
  it("step-14 mesh: dashed Neumann edges and grading toward corner/source", () => {
    const mesh = parseMeshFile(
      readFileSync(join(FIXTURES, "lshape_practical_mesh_step14.txt"), "utf-8"),
    );
    const svg = meshPlot(mesh);
    writeFileSync(join(OUT, "fig4_lshape_practical_mesh14.svg"), svg);
    const neumann = mesh.boundary.filter((e) => e.label === "N").length;
    expect(neumann).toBeGreaterThan(0);
    expect(svg).toContain(`data-neumann-edges="${neumann}"`);
    expect((svg.match(/stroke-dasharray/g) ?? []).length).toBe(neumann);

    // grading: smallest elements concentrate at the reentrant corner or in
    // the source square, and the size spread is large
    const areas = mesh.elements.map(([a, b, c]) => {
      const [xa, ya] = mesh.vertices[a];
      const [xb, yb] = mesh.vertices[b];
      const [xc, yc] = mesh.vertices[c];
      return Math.abs((xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)) / 2;
    });
    const centroids = mesh.elements.map(([a, b, c]) => {
      const [xa, ya] = mesh.vertices[a];
      const [xb, yb] = mesh.vertices[b];
      const [xc, yc] = mesh.vertices[c];
      return [(xa + xb + xc) / 3, (ya + yb + yc) / 3] as [number, number];
    });
    const minArea = Math.min(...areas);
    const maxArea = Math.max(...areas);
    expect(maxArea / minArea).toBeGreaterThan(16);
    const tiny = areas
      .map((a, i) => [a, i] as [number, number])
      .filter(([a]) => a <= 4 * minArea)
      .map(([, i]) => centroids[i]);
    const nearFeature = tiny.filter(([x, y]) => {
      const nearCorner = Math.hypot(x, y) < 0.35;
      const nearSource = x > -0.85 && x < -0.15 && y > -0.85 && y < -0.15;
      return nearCorner || nearSource;
    });
    expect(nearFeature.length / tiny.length).toBeGreaterThan(0.5);
  });

  it("step-0 mesh renders all twelve elements", () => {
    const mesh = parseMeshFile(
      readFileSync(join(FIXTURES, "lshape_practical_mesh_step0.txt"), "utf-8"),
    );
    expect(mesh.elements).toHaveLength(12);
    const svg = meshPlot(mesh);
    expect(svg).toContain('data-elements="12"');
  });
});

describe("fixtures exist", () => {
  it("all committed fixture files are present", () => {
    for (const f of [
      "smooth_layer_ada_p1.csv", "smooth_layer_uni_p1.csv",
      "lshape_singular_ada_p1.csv", "lshape_singular_uni_p1.csv",
      "lshape_practical_ada_p1.csv", "lshape_practical_ada_p2.csv",
      "lshape_practical_mesh_step0.txt", "lshape_practical_mesh_step14.txt",
    ]) {
      expect(existsSync(join(FIXTURES, f)), f).toBe(true);
    }
  });
});
