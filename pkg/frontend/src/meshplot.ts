/**
 * Wireframe mesh rendering.  Interior and Dirichlet edges are solid; Neumann
 * boundary edges are dashed and slightly heavier.  Element/edge counts are
 * exposed as data attributes on the root group.
 */

import { MeshData } from "./meshfile.js";
import { Svg, round2 } from "./svg.js";

export function meshPlot(mesh: MeshData, size = 560): string {
  const xs = mesh.vertices.map((v) => v[0]);
  const ys = mesh.vertices.map((v) => v[1]);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const margin = 16;
  const span = Math.max(xHi - xLo, yHi - yLo) || 1;
  const scale = (size - 2 * margin) / span;
  const width = Math.ceil((xHi - xLo) * scale + 2 * margin);
  const height = Math.ceil((yHi - yLo) * scale + 2 * margin);
  const px = (x: number) => margin + (x - xLo) * scale;
  const py = (y: number) => height - margin - (y - yLo) * scale;

  const svg = new Svg(width, height);
  const edgeKeys = new Set<string>();
  const edges: [number, number][] = [];
  for (const [a, b, c] of mesh.elements) {
    for (const [u, v] of [[a, b], [b, c], [c, a]] as [number, number][]) {
      const key = u < v ? `${u},${v}` : `${v},${u}`;
      if (!edgeKeys.has(key)) {
        edgeKeys.add(key);
        edges.push(u < v ? [u, v] : [v, u]);
      }
    }
  }
  const neumann = new Set(
    mesh.boundary
      .filter((e) => e.label === "N")
      .map((e) => (e.a < e.b ? `${e.a},${e.b}` : `${e.b},${e.a}`)),
  );

  svg.element("g", {
    id: "mesh",
    "data-elements": mesh.elements.length,
    "data-edges": edges.length,
    "data-neumann-edges": neumann.size,
  }, "");
  for (const [u, v] of edges) {
    const key = `${u},${v}`;
    const [xu, yu] = mesh.vertices[u];
    const [xv, yv] = mesh.vertices[v];
    if (neumann.has(key)) {
      svg.line(px(xu), py(yu), px(xv), py(yv), {
        stroke: "#c22", "stroke-width": 1.6, "stroke-dasharray": "7 5",
        "data-boundary": "N",
      });
    } else {
      svg.line(px(xu), py(yu), px(xv), py(yv), {
        stroke: "#345", "stroke-width": 0.5,
      });
    }
  }
  svg.text(margin, 12,
           `${mesh.elements.length} elements` +
           (neumann.size ? " (dashed: Neumann boundary)" : ""));
  return svg.render();
}
