// Sketch data model: shape primitives drawn on the canvas, exportable as SVG
// the backend's rasterizer accepts.

export interface RectShape {
  kind: "rect";
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface LineShape {
  kind: "line";
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface PathShape {
  kind: "path";
  points: Array<[number, number]>;
}

export interface TextShape {
  kind: "text";
  x: number;
  y: number;
  content: string;
}

export type Shape = RectShape | LineShape | PathShape | TextShape;

export class SketchModel {
  readonly shapes: Shape[] = [];

  constructor(
    readonly width: number = 800,
    readonly height: number = 600,
  ) {}

  add(shape: Shape): void {
    if (shape.kind === "rect" && (shape.width <= 0 || shape.height <= 0)) {
      return; // zero-area click, not a rectangle
    }
    if (shape.kind === "path" && shape.points.length < 2) {
      return;
    }
    if (shape.kind === "text" && !shape.content.trim()) {
      return;
    }
    this.shapes.push(shape);
  }

  clear(): void {
    this.shapes.length = 0;
  }

  get isEmpty(): boolean {
    return this.shapes.length === 0;
  }

  toSvg(): string {
    const body = this.shapes.map(renderShape).join("\n  ");
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `  ${body}\n</svg>\n`
    );
  }
}

const STROKE = 'fill="none" stroke="black" stroke-width="2"';

function renderShape(shape: Shape): string {
  switch (shape.kind) {
    case "rect":
      return (
        `<rect x="${shape.x}" y="${shape.y}" width="${shape.width}" ` +
        `height="${shape.height}" ${STROKE}/>`
      );
    case "line":
      return (
        `<line x1="${shape.x1}" y1="${shape.y1}" x2="${shape.x2}" ` +
        `y2="${shape.y2}" stroke="black" stroke-width="2"/>`
      );
    case "path": {
      const points = shape.points.map(([x, y]) => `${x},${y}`).join(" ");
      return `<polyline points="${points}" ${STROKE}/>`;
    }
    case "text":
      return (
        `<text x="${shape.x}" y="${shape.y}" font-size="16">` +
        `${escapeXml(shape.content)}</text>`
      );
  }
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
