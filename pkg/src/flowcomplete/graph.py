"""Directed heterogeneous flowsheet graph: unit-operation nodes and tagged
stream edges, with validation, isomorphism checking, and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx

# Closed unit-category list for strict parsing; lenient mode accepts any name.
UNIT_CATEGORIES = (
    "raw", "prod", "hex", "r", "mix", "splt", "v", "pp", "comp",
    "dist", "rect", "abs", "ext", "flash", "filt", "centr", "dry", "cycl",
)
HEAT_CATEGORIES = ("hex",)
SRC_TAGS = ("tout", "bout", "out")
DST_TAGS = ("tin", "bin", "in")


class SchemaViolation(ValueError):
    pass


@dataclass(frozen=True)
class UnitNode:
    id: str
    category: str
    heat_group: int | None = None

    @property
    def ordinal(self) -> int:
        return int(self.id.rsplit("-", 1)[1])


@dataclass(frozen=True)
class StreamEdge:
    src: str
    dst: str
    src_tags: frozenset = frozenset()
    dst_tags: frozenset = frozenset()

    @property
    def tag_key(self) -> tuple:
        return (frozenset(self.src_tags), frozenset(self.dst_tags))


@dataclass
class FlowsheetGraph:
    nodes: list[UnitNode] = field(default_factory=list)
    edges: list[StreamEdge] = field(default_factory=list)

    def node(self, node_id: str) -> UnitNode:
        return self._by_id[node_id]

    @property
    def _by_id(self) -> dict:
        return {n.id: n for n in self.nodes}

    def in_edges(self, node_id: str) -> list[StreamEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def out_edges(self, node_id: str) -> list[StreamEdge]:
        return [e for e in self.edges if e.src == node_id]

    def node_count(self) -> int:
        return len(self.nodes)

    def to_nx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for n in self.nodes:
            g.add_node(n.id, category=n.category, heat_group=n.heat_group)
        for e in self.edges:
            g.add_edge(e.src, e.dst, src_tags=e.src_tags, dst_tags=e.dst_tags)
        return g


@dataclass(frozen=True)
class Violation:
    rule: str
    element: str

    def __str__(self) -> str:
        return f"{self.rule}({self.element})"


def validate(g: FlowsheetGraph) -> list[Violation]:
    """All invariant violations of the graph; empty list means valid."""
    out: list[Violation] = []
    ids = [n.id for n in g.nodes]
    by_id = {}
    for n in g.nodes:
        if n.id in by_id:
            out.append(Violation("DuplicateNodeId", n.id))
        by_id[n.id] = n
        parts = n.id.rsplit("-", 1)
        if len(parts) != 2 or parts[0] != n.category or not parts[1].isdigit():
            out.append(Violation("MalformedNodeId", n.id))
        if n.heat_group is not None and n.category not in HEAT_CATEGORIES:
            out.append(Violation("HeatGroupOnNonExchanger", n.id))

    seen_edges: dict = {}
    for e in g.edges:
        desc = f"{e.src}->{e.dst}"
        if e.src not in by_id or e.dst not in by_id:
            out.append(Violation("DanglingEdge", desc))
            continue
        key = (e.src, e.dst)
        tags = e.tag_key
        if tags in seen_edges.get(key, ()):
            out.append(Violation("DuplicateParallelEdge", desc))
        seen_edges.setdefault(key, []).append(tags)
        for t in e.src_tags:
            if t not in SRC_TAGS:
                out.append(Violation("UnknownSrcTag", f"{desc}:{t}"))
        for t in e.dst_tags:
            if t not in DST_TAGS:
                out.append(Violation("UnknownDstTag", f"{desc}:{t}"))

    if out:
        # structural checks below assume well-formed ids/edges
        return out

    indeg = {i: 0 for i in ids}
    outdeg = {i: 0 for i in ids}
    for e in g.edges:
        outdeg[e.src] += 1
        indeg[e.dst] += 1
    for n in g.nodes:
        if n.category == "raw" and indeg[n.id] > 0:
            out.append(Violation("RawHasInlet", n.id))
        if n.category == "prod" and outdeg[n.id] > 0:
            out.append(Violation("ProdHasOutlet", n.id))

    nxg = g.to_nx()
    raws = [n.id for n in g.nodes if n.category == "raw"]
    prods = [n.id for n in g.nodes if n.category == "prod"]
    from_raw: set = set(raws)
    for r in raws:
        from_raw |= nx.descendants(nxg, r)
    to_prod: set = set(prods)
    rev = nxg.reverse(copy=False)
    for p in prods:
        to_prod |= nx.descendants(rev, p)
    for n in g.nodes:
        if n.id not in from_raw or n.id not in to_prod:
            out.append(Violation("NotOnRawToProdPath", n.id))
    return out


def _heat_partition_matches(a: FlowsheetGraph, b: FlowsheetGraph, mapping: dict) -> bool:
    """mapping maps a-node ids to b-node ids; heat groups must induce the
    same partition (group labels themselves may differ)."""
    ga = {n.id: n.heat_group for n in a.nodes}
    gb = {n.id: n.heat_group for n in b.nodes}
    label_map: dict = {}
    for aid, bid in mapping.items():
        ha, hb = ga[aid], gb[bid]
        if (ha is None) != (hb is None):
            return False
        if ha is None:
            continue
        if label_map.setdefault(ha, hb) != hb:
            return False
    return len(set(label_map.values())) == len(label_map)


def _collapsed(g: FlowsheetGraph) -> nx.DiGraph:
    # parallel edges folded into one edge carrying the set of tag pairs,
    # so the plain DiGraph matcher applies
    d = nx.DiGraph()
    for n in g.nodes:
        d.add_node(n.id, category=n.category, has_heat=n.heat_group is not None)
    for e in g.edges:
        if d.has_edge(e.src, e.dst):
            d[e.src][e.dst]["tags"] = d[e.src][e.dst]["tags"] | {e.tag_key}
        else:
            d.add_edge(e.src, e.dst, tags={e.tag_key})
    return d


def isomorphic(a: FlowsheetGraph, b: FlowsheetGraph) -> bool:
    """Structural equivalence: a node bijection preserving category,
    heat-group partition, edges, and edge tags."""
    da, db = _collapsed(a), _collapsed(b)
    if da.number_of_nodes() != db.number_of_nodes():
        return False
    matcher = nx.algorithms.isomorphism.DiGraphMatcher(
        da,
        db,
        node_match=lambda x, y: x["category"] == y["category"]
        and x["has_heat"] == y["has_heat"],
        edge_match=lambda x, y: x["tags"] == y["tags"],
    )
    for mapping in matcher.isomorphisms_iter():
        if _heat_partition_matches(a, b, mapping):
            return True
    return False


_NODE_FIELDS = {"id", "category", "heat_group"}
_EDGE_FIELDS = {"src", "dst", "src_tags", "dst_tags"}


def to_json(g: FlowsheetGraph) -> bytes:
    doc = {
        "nodes": [
            {"id": n.id, "category": n.category, "heat_group": n.heat_group}
            for n in g.nodes
        ],
        "edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "src_tags": sorted(e.src_tags),
                "dst_tags": sorted(e.dst_tags),
            }
            for e in g.edges
        ],
    }
    return json.dumps(doc).encode("utf-8")


def graph_to_dict(g: FlowsheetGraph) -> dict:
    return json.loads(to_json(g))


def from_json(data: bytes | str | dict) -> FlowsheetGraph:
    if isinstance(data, (bytes, str)):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc}") from exc
    else:
        doc = data
    if not isinstance(doc, dict) or set(doc) - {"nodes", "edges"}:
        raise SchemaViolation("top-level object must have only 'nodes' and 'edges'")
    nodes_doc = doc.get("nodes")
    edges_doc = doc.get("edges", [])
    if not isinstance(nodes_doc, list) or not nodes_doc:
        raise SchemaViolation("'nodes' must be a non-empty list")
    nodes = []
    for nd in nodes_doc:
        if not isinstance(nd, dict) or set(nd) - _NODE_FIELDS:
            raise SchemaViolation(f"unknown node field in {nd!r}")
        if "id" not in nd or "category" not in nd:
            raise SchemaViolation(f"node missing id/category: {nd!r}")
        hg = nd.get("heat_group")
        if hg is not None and not isinstance(hg, int):
            raise SchemaViolation(f"heat_group must be int or null: {nd!r}")
        nodes.append(UnitNode(str(nd["id"]), str(nd["category"]), hg))
    edges = []
    for ed in edges_doc:
        if not isinstance(ed, dict) or set(ed) - _EDGE_FIELDS:
            raise SchemaViolation(f"unknown edge field in {ed!r}")
        if "src" not in ed or "dst" not in ed:
            raise SchemaViolation(f"edge missing src/dst: {ed!r}")
        edges.append(
            StreamEdge(
                str(ed["src"]),
                str(ed["dst"]),
                frozenset(ed.get("src_tags", [])),
                frozenset(ed.get("dst_tags", [])),
            )
        )
    return FlowsheetGraph(nodes, edges)
