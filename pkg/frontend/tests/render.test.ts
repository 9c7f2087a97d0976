import { describe, expect, it } from "vitest";
import { renderCandidate, renderGraph } from "../src/render.js";
import type { Candidate, GraphJson } from "../src/types.js";

const RECYCLE: GraphJson = {
  nodes: [
    { id: "raw-0", category: "raw", heat_group: null },
    { id: "mix-0", category: "mix", heat_group: null },
    { id: "r-0", category: "r", heat_group: null },
    { id: "splt-0", category: "splt", heat_group: null },
    { id: "prod-0", category: "prod", heat_group: null },
  ],
  edges: [
    { src: "raw-0", dst: "mix-0", src_tags: [], dst_tags: [] },
    { src: "mix-0", dst: "r-0", src_tags: [], dst_tags: [] },
    { src: "r-0", dst: "splt-0", src_tags: ["tout"], dst_tags: [] },
    { src: "splt-0", dst: "prod-0", src_tags: [], dst_tags: [] },
    { src: "splt-0", dst: "mix-0", src_tags: [], dst_tags: [] },
  ],
};

describe("renderGraph", () => {
  it("emits one icon group per unit with its id and category", () => {
    const svg = renderGraph(RECYCLE);
    expect(svg.startsWith("<svg")).toBe(true);
    for (const n of RECYCLE.nodes) {
      expect(svg).toContain(`data-id="${n.id}"`);
      expect(svg).toContain(`data-category="${n.category}"`);
    }
    expect((svg.match(/class="unit"/g) ?? []).length).toBe(5);
  });

  it("draws recycle edges dashed and marked, forward edges plain", () => {
    const svg = renderGraph(RECYCLE);
    expect((svg.match(/class="stream recycle"/g) ?? []).length).toBe(1);
    expect((svg.match(/class="stream"/g) ?? []).length).toBe(4);
    expect(svg).toContain("stroke-dasharray");
  });

  it("labels edges with their stream tags", () => {
    const svg = renderGraph(RECYCLE);
    expect(svg).toContain(">tout</text>");
  });

  it("shows heat-group membership on the unit label", () => {
    const g: GraphJson = {
      nodes: [
        { id: "raw-0", category: "raw", heat_group: null },
        { id: "hex-0", category: "hex", heat_group: 1 },
        { id: "prod-0", category: "prod", heat_group: null },
      ],
      edges: [
        { src: "raw-0", dst: "hex-0", src_tags: [], dst_tags: [] },
        { src: "hex-0", dst: "prod-0", src_tags: [], dst_tags: [] },
      ],
    };
    expect(renderGraph(g)).toContain("hex-0 {1}");
  });

  it("escapes markup-significant characters", () => {
    const g: GraphJson = {
      nodes: [{ id: "raw-0", category: "raw", heat_group: null }],
      edges: [],
    };
    const svg = renderGraph(g);
    expect(svg).not.toContain("<script");
  });
});

describe("renderCandidate", () => {
  it("renders a graph and the score for a valid candidate", () => {
    const c: Candidate = {
      sfiles: "(raw)(prod)",
      log_prob: -0.25,
      valid: true,
      graph: {
        nodes: [
          { id: "raw-0", category: "raw", heat_group: null },
          { id: "prod-0", category: "prod", heat_group: null },
        ],
        edges: [{ src: "raw-0", dst: "prod-0", src_tags: [], dst_tags: [] }],
      },
      parse_error: null,
    };
    const html = renderCandidate(c);
    expect(html).toContain("<svg");
    expect(html).toContain("log p = -0.250");
    expect(html).not.toContain("not parseable");
  });

  it("shows a not-parseable badge instead of a graph for invalid candidates", () => {
    const c: Candidate = {
      sfiles: "(raw)(hex)[{tout}",
      log_prob: -3.1,
      valid: false,
      graph: null,
      parse_error: "unclosed branch",
    };
    const html = renderCandidate(c);
    expect(html).toContain("not parseable");
    expect(html).toContain("unclosed branch");
    expect(html).not.toContain("<svg");
  });
});
