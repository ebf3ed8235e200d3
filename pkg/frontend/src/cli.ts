/**
 * Plot tool for supg-afem outputs.
 *
 * Usage:
 *   supg-afem-plots convergence a.csv b.csv --labels ada,uni \
 *       --column eta --slopes 0.5,1 --out plot.svg
 *   supg-afem-plots mesh mesh_0014.txt --out mesh.svg
 */

import { readFileSync, writeFileSync } from "fs";
import { basename } from "path";

import { convergencePlot } from "./convergence.js";
import { parseResultsCsv, seriesFromTable } from "./csv.js";
import { parseMeshFile } from "./meshfile.js";
import { meshPlot } from "./meshplot.js";

interface Parsed {
  positional: string[];
  options: Map<string, string>;
}

function parseArgs(argv: string[]): Parsed {
  const positional: string[] = [];
  const options = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a.startsWith("--")) {
      const value = argv[i + 1];
      if (value === undefined) throw new Error(`missing value for ${a}`);
      options.set(a.slice(2), value);
      i++;
    } else {
      positional.push(a);
    }
  }
  return { positional, options };
}

export function main(argv: string[]): number {
  let parsed: Parsed;
  try {
    parsed = parseArgs(argv);
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  const [command, ...files] = parsed.positional;
  try {
    if (command === "convergence") {
      if (files.length === 0) throw new Error("need at least one csv path");
      const out = parsed.options.get("out");
      if (!out) throw new Error("--out is required");
      const column = parsed.options.get("column") ?? "eta";
      const slopes = (parsed.options.get("slopes") ?? "")
        .split(",")
        .filter((s) => s !== "")
        .map(Number);
      if (slopes.some((s) => !Number.isFinite(s))) {
        throw new Error("bad --slopes value");
      }
      const labels = (parsed.options.get("labels") ?? "")
        .split(",")
        .filter((s) => s !== "");
      const series = files.map((path, i) => {
        const table = parseResultsCsv(readFileSync(path, "utf-8"));
        const { n, y } = seriesFromTable(table, column);
        return { label: labels[i] ?? basename(path), n, y };
      });
      writeFileSync(out, convergencePlot({ series, slopes, columnLabel: column }));
      return 0;
    }
    if (command === "mesh") {
      if (files.length !== 1) throw new Error("mesh takes exactly one file");
      const out = parsed.options.get("out");
      if (!out) throw new Error("--out is required");
      const mesh = parseMeshFile(readFileSync(files[0], "utf-8"));
      writeFileSync(out, meshPlot(mesh));
      return 0;
    }
    console.error("usage: supg-afem-plots convergence|mesh ...");
    return 2;
  } catch (err) {
    console.error(String(err));
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
