import { describe, expect, it } from "vitest";

import { parseMeshFile } from "../src/meshfile.js";

const SAMPLE = `VERTICES 4
0 0
1 0
1 1
0 1
ELEMENTS 2
1 2 0
3 0 2
BOUNDARY 4
0 1 D
1 2 N
2 3 D
3 0 D
`;

describe("parseMeshFile", () => {
  it("parses the text format", () => {
    const mesh = parseMeshFile(SAMPLE);
    expect(mesh.vertices).toHaveLength(4);
    expect(mesh.elements).toEqual([[1, 2, 0], [3, 0, 2]]);
    expect(mesh.boundary.filter((e) => e.label === "N")).toHaveLength(1);
  });

  it("rejects bad headers, labels, and trailing content", () => {
    expect(() => parseMeshFile(SAMPLE.replace("VERTICES", "VERTS"))).toThrow();
    expect(() => parseMeshFile(SAMPLE.replace(" N", " X"))).toThrow();
    expect(() => parseMeshFile(SAMPLE + "junk\n")).toThrow(/trailing/);
    expect(() => parseMeshFile(SAMPLE.replace("3 0 D\n", ""))).toThrow();
  });

  it("rejects out-of-range indices", () => {
    expect(() => parseMeshFile(SAMPLE.replace("3 0 2", "3 0 9"))).toThrow();
  });
});
