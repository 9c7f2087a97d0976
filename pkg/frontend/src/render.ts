/** SVG rendering of laid-out flowsheet graphs.
 *
 * Produces an SVG string from graph JSON: one icon per unit with its
 * category label, stream-tag labels on edges, recycle back-edges drawn
 * dashed and routed below the sheet. Candidates the service could not
 * parse get a "not parseable" badge instead of a graph.
 */

import { layoutGraph, CELL_H } from "./layout.js";
import type { PlacedNode } from "./layout.js";
import type { Candidate, GraphJson } from "./types.js";

const NODE_W = 84;
const NODE_H = 40;

/** Icon shapes by unit category; anything unlisted falls back to a box. */
const ICON: Record<string, "circle" | "triangle" | "column" | "box"> = {
  r: "circle",
  mix: "circle",
  splt: "circle",
  dist: "column",
  rect: "column",
  abs: "column",
  ext: "column",
  flash: "triangle",
  cycl: "triangle",
  filt: "triangle",
  raw: "box",
  prod: "box",
};

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function nodeIcon(n: PlacedNode): string {
  const cx = n.x + NODE_W / 2;
  const cy = n.y + NODE_H / 2;
  const shape = ICON[n.category] ?? "box";
  const style = 'fill="#eef3fa" stroke="#37506e" stroke-width="1.5"';
  let body: string;
  if (shape === "circle") {
    body = `<circle cx="${cx}" cy="${cy}" r="${NODE_H / 2}" ${style}/>`;
  } else if (shape === "triangle") {
    body =
      `<polygon points="${n.x + 10},${n.y} ${n.x + NODE_W - 10},${n.y} ` +
      `${cx},${n.y + NODE_H}" ${style}/>`;
  } else if (shape === "column") {
    body = `<rect x="${cx - 14}" y="${n.y - 6}" width="28" height="${NODE_H + 12}" rx="12" ${style}/>`;
  } else {
    body = `<rect x="${n.x}" y="${n.y}" width="${NODE_W}" height="${NODE_H}" rx="4" ${style}/>`;
  }
  const heat = n.heatGroup !== null ? ` {${n.heatGroup}}` : "";
  const label =
    `<text x="${cx}" y="${cy + 4}" text-anchor="middle" ` +
    `font-size="12" font-family="sans-serif">${esc(n.id + heat)}</text>`;
  return `<g class="unit" data-id="${esc(n.id)}" data-category="${esc(n.category)}">${body}${label}</g>`;
}

export function renderGraph(graph: GraphJson): string {
  const layout = layoutGraph(graph);
  const pos = new Map(layout.nodes.map((n) => [n.id, n]));
  const parts: string[] = [];

  for (const { edge, back } of layout.edges) {
    const a = pos.get(edge.src);
    const b = pos.get(edge.dst);
    if (!a || !b) continue;
    const tags = [...edge.src_tags, ...edge.dst_tags].join(",");
    let path: string;
    let midX: number;
    let midY: number;
    if (back) {
      // Route recycles below the sheet so they read as back-edges.
      const dip = layout.height - CELL_H / 2;
      const x1 = a.x + NODE_W / 2;
      const x2 = b.x + NODE_W / 2;
      path =
        `M ${x1} ${a.y + NODE_H} C ${x1} ${dip}, ${x2} ${dip}, ` +
        `${x2} ${b.y + NODE_H}`;
      midX = (x1 + x2) / 2;
      midY = dip - 6;
    } else {
      const x1 = a.x + NODE_W;
      const y1 = a.y + NODE_H / 2;
      const x2 = b.x;
      const y2 = b.y + NODE_H / 2;
      path = `M ${x1} ${y1} L ${x2} ${y2}`;
      midX = (x1 + x2) / 2;
      midY = (y1 + y2) / 2 - 6;
    }
    const cls = back ? "stream recycle" : "stream";
    const dash = back ? ' stroke-dasharray="6 4"' : "";
    parts.push(
      `<path class="${cls}" d="${path}" fill="none" stroke="#37506e" ` +
        `stroke-width="1.5"${dash} marker-end="url(#arrow)"/>`,
    );
    if (tags) {
      parts.push(
        `<text class="tags" x="${midX}" y="${midY}" text-anchor="middle" ` +
          `font-size="10" font-family="sans-serif" fill="#7a4a12">${esc(tags)}</text>`,
      );
    }
  }
  for (const n of layout.nodes) parts.push(nodeIcon(n));

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${layout.width}" ` +
    `height="${layout.height}" viewBox="0 0 ${layout.width} ${layout.height}">` +
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ` +
    `markerWidth="7" markerHeight="7" orient="auto-start-reverse">` +
    `<path d="M 0 0 L 10 5 L 0 10 z" fill="#37506e"/></marker></defs>` +
    parts.join("") +
    `</svg>`
  );
}

/** Render a ranked candidate: its graph when the service parsed it, or a
 * visible badge when it did not. */
export function renderCandidate(c: Candidate): string {
  if (!c.valid || c.graph === null) {
    const reason = c.parse_error ? `: ${esc(c.parse_error)}` : "";
    return (
      `<div class="candidate invalid">` +
      `<span class="badge">not parseable</span>` +
      `<code>${esc(c.sfiles)}</code>` +
      `<span class="reason">${reason}</span></div>`
    );
  }
  return (
    `<div class="candidate valid">` +
    `<code>${esc(c.sfiles)}</code>` +
    `<span class="score">log p = ${c.log_prob.toFixed(3)}</span>` +
    renderGraph(c.graph) +
    `</div>`
  );
}
