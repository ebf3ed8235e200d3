/**
 * Parser for the solver's results.csv files.
 *
 * Expected header:
 * step,n_elem,n_dofs,h_max,eta,osc,err_energy,err_supg,n_marked_prime,
 * n_marked,solve_ms,estimate_ms,refine_ms
 * Empty cells (unknown exact solution) parse to null.
 */

export const RESULTS_HEADER =
  "step,n_elem,n_dofs,h_max,eta,osc,err_energy,err_supg," +
  "n_marked_prime,n_marked,solve_ms,estimate_ms,refine_ms";

export interface ResultsTable {
  names: string[];
  rows: (number | null)[][];
}

export function parseResultsCsv(text: string): ResultsTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== RESULTS_HEADER) {
    throw new Error("unrecognized results.csv header");
  }
  const names = lines[0].split(",");
  const rows: (number | null)[][] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== names.length) {
      throw new Error(`malformed row: ${line}`);
    }
    rows.push(
      parts.map((p) => {
        if (p === "") return null;
        const v = Number(p);
        if (!Number.isFinite(v)) throw new Error(`non-numeric cell: ${p}`);
        return v;
      }),
    );
  }
  return { names, rows };
}

/** Column as (x, y) pairs with positive y, x = n_elem. */
export function seriesFromTable(
  table: ResultsTable,
  column: string,
): { n: number[]; y: number[] } {
  const xi = table.names.indexOf("n_elem");
  const yi = table.names.indexOf(column);
  if (yi < 0) throw new Error(`no column '${column}'`);
  const n: number[] = [];
  const y: number[] = [];
  for (const row of table.rows) {
    const xv = row[xi];
    const yv = row[yi];
    if (xv !== null && yv !== null && yv > 0) {
      n.push(xv);
      y.push(yv);
    }
  }
  if (n.length === 0) throw new Error(`column '${column}' has no positive data`);
  return { n, y };
}

/** Least-squares decay rate s of y ~ n^(-s) over the trailing fraction. */
export function tailSlope(n: number[], y: number[], tailFraction = 0.4): number {
  const k = Math.max(Math.ceil(tailFraction * n.length), Math.min(4, n.length));
  const ln = n.slice(-k).map(Math.log);
  const ly = y.slice(-k).map(Math.log);
  const mx = ln.reduce((a, b) => a + b, 0) / ln.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < ln.length; i++) {
    num += (ln[i] - mx) * (ly[i] - my);
    den += (ln[i] - mx) * (ln[i] - mx);
  }
  if (den === 0) throw new Error("need at least two distinct n_elem values");
  return -num / den;
}
