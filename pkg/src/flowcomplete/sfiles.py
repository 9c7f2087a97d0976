"""Bidirectional conversion between flowsheet graphs and SFILES 2.0 strings.

Notation summary:
  (unit)        unit operation node; consecutive units imply a stream edge
  [ ... ]       branch; the last branch at a node is written unbracketed
  {tag}         stream tag for the adjacent edge (tout/bout/out are
                source-side, tin/bin/in destination-side); a purely numeric
                tag after a heat exchanger assigns its heat-integration group
  # / <#        recycle (or any converging connection): an edge runs from
                the node carrying # to the node carrying <#
  <&| ... &|    converging inlet branch, flowing into the preceding node
  n|            starts a new mass train (weakly connected component)
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tokenizer as tok
from .graph import (
    DST_TAGS,
    HEAT_CATEGORIES,
    SRC_TAGS,
    UNIT_CATEGORIES,
    FlowsheetGraph,
    StreamEdge,
    UnitNode,
    validate,
)


class SfilesError(ValueError):
    pass


class UnbalancedBrackets(SfilesError):
    pass


class UnresolvedRecycle(SfilesError):
    pass


class UnknownCategory(SfilesError):
    pass


class InvalidTagPlacement(SfilesError):
    pass


class InvalidGraph(SfilesError):
    def __init__(self, violations):
        super().__init__("graph fails validation: " + "; ".join(map(str, violations)))
        self.violations = violations


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _anchor_number(text: str) -> int:
    if text.startswith("%("):
        return int(text[2:5])
    if text.startswith("%"):
        return int(text[1:])
    return int(text)


class _Parser:
    def __init__(self, strict: bool, warnings: list | None):
        self.strict = strict
        self.warnings = warnings if warnings is not None else []
        self.nodes: list[list] = []  # [id, category, heat_group]
        self.by_id: dict = {}
        self.counters: dict = {}
        self.edges: list[StreamEdge] = []
        self.current: str | None = None
        self.pending: list[str] = []
        self.stack: list[tuple] = []  # ("branch", saved) | ("conv", attach)
        self.recycle_dst: dict = {}  # number -> node id
        self.recycle_src: dict = {}  # number -> (node id, tags)
        self.paired: set = set()

    def warn(self, msg: str):
        self.warnings.append(msg)

    def fail(self, exc_cls, msg: str):
        if self.strict:
            raise exc_cls(msg)
        self.warn(msg)

    def add_edge(self, src: str, dst: str, tags: list[str]):
        self.edges.append(
            StreamEdge(
                src,
                dst,
                frozenset(t for t in tags if t in SRC_TAGS),
                frozenset(t for t in tags if t in DST_TAGS),
            )
        )

    def new_node(self, name: str) -> str:
        n = self.counters.get(name, 0)
        self.counters[name] = n + 1
        nid = f"{name}-{n}"
        self.nodes.append([nid, name, None])
        self.by_id[nid] = self.nodes[-1]
        return nid

    def on_unit(self, text: str):
        name = text[1:-1]
        if not name:
            self.fail(UnknownCategory, "empty unit name '()'")
            return
        if self.strict and name not in UNIT_CATEGORIES:
            raise UnknownCategory(f"unknown unit category {name!r}")
        nid = self.new_node(name)
        if self.current is not None:
            self.add_edge(self.current, nid, self.pending)
            self.pending = []
        elif self.pending:
            self.fail(InvalidTagPlacement, f"tags {self.pending} precede first unit of a chain")
            self.pending = []
        self.current = nid

    def on_tag(self, text: str):
        body = text[1:-1]
        if body.isdigit():
            if self.current is None:
                self.fail(InvalidTagPlacement, f"heat-group tag {text} with no preceding unit")
                return
            rec = self.by_id[self.current]
            if rec[1] not in HEAT_CATEGORIES:
                self.fail(InvalidTagPlacement, f"heat-group tag {text} on non-exchanger {self.current}")
                if self.strict:
                    return
            rec[2] = int(body)
        elif body in SRC_TAGS or body in DST_TAGS:
            self.pending.append(body)
        else:
            self.fail(InvalidTagPlacement, f"unknown stream tag {text}")

    def pair_recycle(self, number: int):
        if number in self.recycle_src and number in self.recycle_dst:
            src, tags = self.recycle_src[number]
            if src is not None:
                self.add_edge(src, self.recycle_dst[number], tags)
                self.paired.add(number)

    def on_ref(self, number: int):
        if self.current is None:
            self.fail(UnresolvedRecycle, f"recycle reference <{number} with no preceding unit")
            return
        if number in self.recycle_dst:
            self.fail(UnresolvedRecycle, f"duplicate recycle reference <{number}")
            return
        self.recycle_dst[number] = self.current
        if self.pending:
            # tags are normally written at the anchor side; accept here too
            src = self.recycle_src.get(number)
            if src is not None:
                self.recycle_src[number] = (src[0], src[1] + self.pending)
            else:
                self.recycle_src[number] = (None, self.pending)
            self.pending = []
        self.pair_recycle(number)

    def on_anchor(self, number: int):
        if self.current is None:
            self.fail(UnresolvedRecycle, f"recycle anchor {number} with no preceding unit")
            return
        prior = self.recycle_src.get(number)
        if prior is not None and prior[0] is not None:
            self.fail(UnresolvedRecycle, f"duplicate recycle anchor {number}")
            return
        tags = self.pending + (prior[1] if prior else [])
        self.recycle_src[number] = (self.current, tags)
        self.pending = []
        self.pair_recycle(number)

    def check_no_pending(self, where: str):
        if self.pending:
            self.fail(InvalidTagPlacement, f"dangling tags {self.pending} before {where}")
            self.pending = []

    def feed(self, tokens: list[tok.Token]):
        i = 0
        while i < len(tokens):
            t = tokens[i]
            kind = t.kind
            if kind is tok.TokenKind.UNIT:
                self.on_unit(t.text)
            elif kind is tok.TokenKind.TAG:
                self.on_tag(t.text)
            elif kind is tok.TokenKind.DIGIT:
                self.on_anchor(int(t.text))
            elif kind is tok.TokenKind.RECYCLE_ANCHOR:
                self.on_anchor(_anchor_number(t.text))
            elif kind is tok.TokenKind.RECYCLE_REF:
                body = t.text[1:]
                if body.startswith("%") and i + 1 < len(tokens) and tokens[i + 1].kind is tok.TokenKind.DIGIT:
                    # two-digit reference splits as <%d + d under the lexer
                    body = body[1:] + tokens[i + 1].text
                    i += 1
                elif body.startswith("%"):
                    body = body[1:]
                if not body.isdigit():
                    self.fail(UnresolvedRecycle, f"malformed recycle reference {t.text!r}")
                else:
                    self.on_ref(int(body))
            elif kind is tok.TokenKind.BRANCH_OPEN:
                if self.current is None:
                    self.fail(UnbalancedBrackets, "branch opened with no preceding unit")
                self.stack.append(("branch", self.current))
            elif kind is tok.TokenKind.BRANCH_CLOSE:
                self.check_no_pending("]")
                if not self.stack or self.stack[-1][0] != "branch":
                    self.fail(UnbalancedBrackets, "unmatched ]")
                else:
                    self.current = self.stack.pop()[1]
            elif kind is tok.TokenKind.CONVERGE_OPEN:
                self.check_no_pending("<&|")
                if self.current is None:
                    self.fail(UnbalancedBrackets, "<&| with no preceding unit")
                self.stack.append(("conv", self.current))
                self.current = None
            elif kind is tok.TokenKind.CONVERGE_CLOSE:
                if not self.stack or self.stack[-1][0] != "conv":
                    self.fail(UnbalancedBrackets, "unmatched &|")
                else:
                    attach = self.stack.pop()[1]
                    if self.current is None:
                        self.fail(UnbalancedBrackets, "empty converging branch")
                    else:
                        self.add_edge(self.current, attach, self.pending)
                    self.pending = []
                    self.current = attach
            elif kind is tok.TokenKind.NEW_TRAIN:
                self.check_no_pending("n|")
                if self.stack:
                    self.fail(UnbalancedBrackets, "n| inside open bracket")
                    self.stack = []
                self.current = None
            else:  # PIPE, AMPERSAND, SLASH: not part of graph notation
                self.fail(InvalidTagPlacement, f"unexpected token {t.text!r} at {t.position}")
            i += 1

    def finish(self) -> FlowsheetGraph:
        self.check_no_pending("end of string")
        if self.stack:
            self.fail(UnbalancedBrackets, f"{len(self.stack)} unclosed bracket(s)")
        unpaired = (set(self.recycle_dst) | set(self.recycle_src)) - self.paired
        unpaired |= {n for n, (src, _) in self.recycle_src.items() if src is None}
        if unpaired:
            self.fail(
                UnresolvedRecycle,
                "unpaired recycle number(s): " + ", ".join(map(str, sorted(unpaired))),
            )
        nodes = [UnitNode(nid, cat, hg) for nid, cat, hg in self.nodes]
        return FlowsheetGraph(nodes, self.edges)


def parse(s: str, mode: str = "strict", warnings: list | None = None) -> FlowsheetGraph:
    """Parse a complete SFILES 2.0 string into a flowsheet graph."""
    if not s:
        raise SfilesError("empty SFILES string")
    strict = mode == "strict"
    tokens = tok.tokenize(s, strict=strict, warnings=warnings)
    p = _Parser(strict, warnings)
    p.feed(tokens)
    return p.finish()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Ref:
    edge: int


@dataclass(frozen=True)
class _Anchor:
    edge: int


@dataclass(frozen=True)
class _RefSlot:
    node: str


@dataclass(frozen=True)
class _Heat:
    group: int


def _canon(node: UnitNode) -> tuple:
    return (node.category, node.ordinal)


def _number_text(n: int, ref: bool) -> str:
    if n < 10:
        body = str(n)
    elif n < 100:
        body = f"%{n:02d}"
    else:
        raise InvalidGraph([f"more than 99 recycle connections ({n})"])
    return ("<" + body) if ref else body


class _Serializer:
    def __init__(self, g: FlowsheetGraph):
        self.g = g
        self.by_id = {n.id: n for n in g.nodes}
        self.out_adj: dict = {n.id: [] for n in g.nodes}
        self.in_adj: dict = {n.id: [] for n in g.nodes}
        for i, e in enumerate(g.edges):
            self.out_adj[e.src].append(i)
            self.in_adj[e.dst].append(i)
        self.visited: set = set()
        self.consumed: set = set()
        self.conn_by_dst: dict = {}  # node id -> [edge idx]

    def edge_key(self, i: int, end: str) -> tuple:
        e = self.g.edges[i]
        other = self.by_id[e.dst if end == "dst" else e.src]
        return (_canon(other), sorted(e.src_tags), sorted(e.dst_tags))

    def reaches(self, a: str, b: str) -> bool:
        seen = {a}
        stack = [a]
        while stack:
            x = stack.pop()
            if x == b:
                return True
            for i in self.out_adj[x]:
                d = self.g.edges[i].dst
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return False

    def upstream_closure(self, u: str) -> set:
        """Unvisited nodes reaching u via unvisited nodes (incl. u)."""
        closure = {u}
        stack = [u]
        while stack:
            x = stack.pop()
            for i in self.in_adj[x]:
                s = self.g.edges[i].src
                if s not in self.visited and s not in closure:
                    closure.add(s)
                    stack.append(s)
        return closure

    def tag_items(self, i: int) -> list:
        e = self.g.edges[i]
        return ["{%s}" % t for t in sorted(e.src_tags)] + [
            "{%s}" % t for t in sorted(e.dst_tags)
        ]

    def reaches_unvisited(self, a: str, b: str) -> bool:
        if a in self.visited:
            return False
        seen = {a}
        stack = [a]
        while stack:
            x = stack.pop()
            if x == b:
                return True
            for i in self.out_adj[x]:
                d = self.g.edges[i].dst
                if d not in seen and d not in self.visited:
                    seen.add(d)
                    stack.append(d)
        return False

    def visit(self, v: str, must_end: str | None) -> list:
        self.visited.add(v)
        node = self.by_id[v]
        items: list = [f"({node.category})"]
        if node.heat_group is not None:
            items.append(_Heat(node.heat_group))
        items.append(_RefSlot(v))

        # converging inlets: unvisited upstream sub-graphs spliced in with <&| ... &|
        for i in sorted(self.in_adj[v], key=lambda i: self.edge_key(i, "src")):
            e = self.g.edges[i]
            if i in self.consumed or e.src in self.visited:
                continue
            if self.reaches(v, e.src):
                # cycle through v: leave as a numbered recycle connection
                continue
            closure = self.upstream_closure(e.src)
            roots = [
                x
                for x in closure
                if all(self.g.edges[j].src not in closure for j in self.in_adj[x])
            ]
            if not roots:
                continue  # no acyclic entry; fall back to numbered connection
            root = min(roots, key=lambda x: _canon(self.by_id[x]))
            self.consumed.add(i)
            sub = self.visit(root, e.src)
            items += ["<&|"] + sub + self.tag_items(i) + ["&|"]

        # outgoing edges: numbered connections for visited targets, tree
        # branches otherwise; the branch leading to must_end is traversed
        # first so the required path stays available, but emitted last.
        out = sorted(self.out_adj[v], key=lambda i: self.edge_key(i, "dst"))
        target_edge = None
        if must_end is not None and must_end != v:
            for i in out:
                e = self.g.edges[i]
                if i not in self.consumed and e.dst not in self.visited and (
                    e.dst == must_end or self.reaches_unvisited(e.dst, must_end)
                ):
                    target_edge = i
                    break
        anchors: list = []
        branches: list = []  # (sort_key, items)
        target_branch = None
        order = ([target_edge] if target_edge is not None else []) + [
            i for i in out if i != target_edge
        ]
        for i in order:
            if i in self.consumed:
                continue
            e = self.g.edges[i]
            if e.dst in self.visited:
                self.consumed.add(i)
                anchors.append(self.tag_items(i) + [_Anchor(i)])
                self.conn_by_dst.setdefault(e.dst, []).append(i)
            else:
                self.consumed.add(i)
                sub = self.tag_items(i) + self.visit(
                    e.dst, must_end if i == target_edge else None
                )
                if i == target_edge:
                    target_branch = sub
                else:
                    branches.append((self.branch_sort_key(sub), sub))

        for a in sorted(anchors, key=self.branch_sort_key):
            items += a
        branches.sort(key=lambda b: b[0])
        if target_branch is not None:
            for _, b in branches:
                items += ["["] + b + ["]"]
            items += target_branch
        elif must_end == v:
            # this node must stay the last of its chain: bracket everything
            for _, b in branches:
                items += ["["] + b + ["]"]
        elif branches:
            for _, b in branches[:-1]:
                items += ["["] + b + ["]"]
            items += branches[-1][1]
        return items

    @staticmethod
    def branch_sort_key(sub: list) -> tuple:
        count = sum(1 for x in sub if isinstance(x, str) and x.startswith("("))
        placeholder = "".join(
            x if isinstance(x, str) else f"\x00{type(x).__name__}{getattr(x, 'edge', getattr(x, 'group', ''))}"
            for x in sub
        )
        return (count, placeholder)

    def run(self) -> str:
        comps: list[set] = []
        seen: set = set()
        for n in self.g.nodes:
            if n.id in seen:
                continue
            comp = {n.id}
            stack = [n.id]
            while stack:
                x = stack.pop()
                for i in self.out_adj[x] + self.in_adj[x]:
                    e = self.g.edges[i]
                    for y in (e.src, e.dst):
                        if y not in comp:
                            comp.add(y)
                            stack.append(y)
            seen |= comp
            comps.append(comp)

        def comp_key(comp):
            return min(_canon(self.by_id[x]) for x in comp)

        comps.sort(key=comp_key)
        all_items: list = []
        for k, comp in enumerate(comps):
            roots = sorted(
                (x for x in comp if not self.in_adj[x]),
                key=lambda x: _canon(self.by_id[x]),
            )
            if not roots:
                raise InvalidGraph([f"component without feed node: {sorted(comp)}"])
            if k:
                all_items.append("n|")
            all_items += self.visit(roots[0], None)
            leftover = comp - self.visited
            if leftover:
                raise InvalidGraph([f"unreachable during serialization: {sorted(leftover)}"])

        # splice <# references into their node slots
        resolved: list = []
        for x in all_items:
            if isinstance(x, _RefSlot):
                for i in sorted(
                    self.conn_by_dst.get(x.node, []),
                    key=lambda i: self.edge_key(i, "src"),
                ):
                    resolved.append(_Ref(i))
            else:
                resolved.append(x)

        # first-use numbering for connections and heat groups
        conn_numbers: dict = {}
        heat_numbers: dict = {}
        out: list[str] = []
        for x in resolved:
            if isinstance(x, str):
                out.append(x)
            elif isinstance(x, _Heat):
                n = heat_numbers.setdefault(x.group, len(heat_numbers) + 1)
                out.append("{%d}" % n)
            elif isinstance(x, (_Ref, _Anchor)):
                n = conn_numbers.setdefault(x.edge, len(conn_numbers) + 1)
                out.append(_number_text(n, ref=isinstance(x, _Ref)))
        return "".join(out)


def serialize(g: FlowsheetGraph, partial: bool = False) -> str:
    """Deterministic canonical SFILES 2.0 string for a valid graph.

    With partial=True, an incomplete flowsheet (open branch ends, units not
    yet on a raw-to-prod path) is accepted; structural defects such as
    dangling edges still raise.
    """
    violations = validate(g)
    if partial:
        violations = [v for v in violations if v.rule != "NotOnRawToProdPath"]
    if violations:
        raise InvalidGraph(violations)
    return _Serializer(g).run()
