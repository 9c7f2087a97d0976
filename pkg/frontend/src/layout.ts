/** Layered left-to-right layout for flowsheet graphs.
 *
 * Nodes are assigned to integer layers by longest-path depth over the
 * acyclic portion of the graph: feed nodes (no forward in-edges) sit in
 * layer 0 on the left and products drift right. Edges whose source layer
 * is not strictly less than their destination layer are flagged as
 * back-edges so the renderer can route them as recycles. Layout is
 * presentation only; the graph data is never modified.
 */

import type { GraphEdge, GraphJson } from "./types.js";

export interface PlacedNode {
  id: string;
  category: string;
  heatGroup: number | null;
  layer: number;
  row: number;
  x: number;
  y: number;
}

export interface PlacedEdge {
  edge: GraphEdge;
  back: boolean;
}

export interface Layout {
  nodes: PlacedNode[];
  edges: PlacedEdge[];
  width: number;
  height: number;
}

export const CELL_W = 150;
export const CELL_H = 90;
export const MARGIN = 50;

/** Find a set of edges whose removal makes the graph acyclic, by DFS:
 * an edge closing back into the current stack is a cycle edge. */
function cycleEdges(graph: GraphJson): Set<GraphEdge> {
  const out = new Map<string, GraphEdge[]>();
  for (const n of graph.nodes) out.set(n.id, []);
  for (const e of graph.edges) out.get(e.src)?.push(e);
  const removed = new Set<GraphEdge>();
  const done = new Set<string>();
  const stack = new Set<string>();
  const visit = (id: string): void => {
    stack.add(id);
    for (const e of out.get(id) ?? []) {
      if (removed.has(e)) continue;
      if (stack.has(e.dst)) {
        removed.add(e);
      } else if (!done.has(e.dst)) {
        visit(e.dst);
      }
    }
    stack.delete(id);
    done.add(id);
  };
  for (const n of graph.nodes) if (!done.has(n.id)) visit(n.id);
  return removed;
}

/** Longest-path layer assignment over the graph minus its cycle edges. */
function assignLayers(graph: GraphJson, skip: Set<GraphEdge>): Map<string, number> {
  const layer = new Map<string, number>();
  for (const n of graph.nodes) layer.set(n.id, 0);
  const forward = graph.edges.filter((e) => !skip.has(e));
  // Relax |V| times; the skip set makes the subgraph acyclic so this
  // converges to longest-path depths.
  for (let i = 0; i < graph.nodes.length; i++) {
    let changed = false;
    for (const e of forward) {
      const want = (layer.get(e.src) ?? 0) + 1;
      if (want > (layer.get(e.dst) ?? 0)) {
        layer.set(e.dst, want);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return layer;
}

export function layoutGraph(graph: GraphJson): Layout {
  const skip = cycleEdges(graph);
  const layer = assignLayers(graph, skip);

  const byLayer = new Map<number, string[]>();
  for (const n of graph.nodes) {
    const l = layer.get(n.id) ?? 0;
    if (!byLayer.has(l)) byLayer.set(l, []);
    byLayer.get(l)!.push(n.id);
  }

  const row = new Map<string, number>();
  let maxRows = 1;
  for (const ids of byLayer.values()) {
    ids.forEach((id, i) => row.set(id, i));
    maxRows = Math.max(maxRows, ids.length);
  }

  const nodes: PlacedNode[] = graph.nodes.map((n) => {
    const l = layer.get(n.id) ?? 0;
    const r = row.get(n.id) ?? 0;
    return {
      id: n.id,
      category: n.category,
      heatGroup: n.heat_group,
      layer: l,
      row: r,
      x: MARGIN + l * CELL_W,
      y: MARGIN + r * CELL_H,
    };
  });

  const edges: PlacedEdge[] = graph.edges.map((e) => ({
    edge: e,
    back: (layer.get(e.src) ?? 0) >= (layer.get(e.dst) ?? 0),
  }));

  const maxLayer = Math.max(0, ...nodes.map((n) => n.layer));
  return {
    nodes,
    edges,
    width: 2 * MARGIN + (maxLayer + 1) * CELL_W,
    height: 2 * MARGIN + maxRows * CELL_H,
  };
}
