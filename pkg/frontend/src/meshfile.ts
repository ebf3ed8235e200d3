/**
 * Parser for the solver's mesh text format:
 *   VERTICES n   / n lines "x y"
 *   ELEMENTS m   / m lines "v0 v1 v2"
 *   BOUNDARY k   / k lines "va vb D|N"
 */

export type BoundaryLabel = "D" | "N";

export interface MeshData {
  vertices: [number, number][];
  elements: [number, number, number][];
  boundary: { a: number; b: number; label: BoundaryLabel }[];
}

export function parseMeshFile(text: string): MeshData {
  const lines = text.split(/\r?\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  let pos = 0;

  function take(): string {
    if (pos >= lines.length) throw new Error("unexpected end of mesh file");
    return lines[pos++];
  }

  function header(keyword: string): number {
    const parts = take().split(/\s+/);
    if (parts.length !== 2 || parts[0] !== keyword) {
      throw new Error(`expected '${keyword} <count>' header`);
    }
    const n = Number(parts[1]);
    if (!Number.isInteger(n) || n < 0) throw new Error(`bad ${keyword} count`);
    return n;
  }

  const nv = header("VERTICES");
  const vertices: [number, number][] = [];
  for (let i = 0; i < nv; i++) {
    const parts = take().split(/\s+/).map(Number);
    if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error("bad vertex line");
    }
    vertices.push([parts[0], parts[1]]);
  }

  const ne = header("ELEMENTS");
  const elements: [number, number, number][] = [];
  for (let i = 0; i < ne; i++) {
    const parts = take().split(/\s+/).map(Number);
    if (parts.length !== 3 || parts.some((v) => !Number.isInteger(v) || v < 0 || v >= nv)) {
      throw new Error("bad element line");
    }
    elements.push([parts[0], parts[1], parts[2]]);
  }

  const nb = header("BOUNDARY");
  const boundary: MeshData["boundary"] = [];
  for (let i = 0; i < nb; i++) {
    const parts = take().split(/\s+/);
    if (parts.length !== 3 || (parts[2] !== "D" && parts[2] !== "N")) {
      throw new Error("bad boundary line");
    }
    const a = Number(parts[0]);
    const b = Number(parts[1]);
    if (![a, b].every((v) => Number.isInteger(v) && v >= 0 && v < nv)) {
      throw new Error("bad boundary vertex index");
    }
    boundary.push({ a, b, label: parts[2] as BoundaryLabel });
  }

  if (pos !== lines.length) throw new Error("trailing content in mesh file");
  return { vertices, elements, boundary };
}
