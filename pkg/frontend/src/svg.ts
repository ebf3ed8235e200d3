/** Minimal SVG document builder (no runtime dependencies). */

export interface Attrs {
  [key: string]: string | number;
}

function attrString(attrs: Attrs): string {
  return Object.entries(attrs)
    .map(([k, v]) => ` ${k}="${v}"`)
    .join("");
}

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  element(tag: string, attrs: Attrs, text?: string): void {
    if (text === undefined) {
      this.parts.push(`<${tag}${attrString(attrs)}/>`);
    } else {
      this.parts.push(`<${tag}${attrString(attrs)}>${escapeText(text)}</${tag}>`);
    }
  }

  polyline(points: [number, number][], attrs: Attrs): void {
    const pts = points.map(([x, y]) => `${round2(x)},${round2(y)}`).join(" ");
    this.element("polyline", { points: pts, fill: "none", ...attrs });
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs): void {
    this.element("line", {
      x1: round2(x1), y1: round2(y1), x2: round2(x2), y2: round2(y2), ...attrs,
    });
  }

  text(x: number, y: number, s: string, attrs: Attrs = {}): void {
    this.element("text", { x: round2(x), y: round2(y), "font-size": 11,
                           "font-family": "sans-serif", ...attrs }, s);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#17becf", "#7f7f7f",
];
