"""Synthetic flowsheet generator.

Flowsheets are grown by a Markov chain over sub-processes: after feed
initialization, the first sub-process is drawn (purification excluded),
each sub-process expands to a small template with sampled inlet/outlet
unit patterns, and every outlet branch draws its next sub-process until it
ends in purification (a product).  Design heuristics: recycles back to an
upstream mixer, heat integration of the reaction feed exchanger, optional
extra reactant feeds.

RNG is numpy's PCG64, which is seedable and platform-stable, so a fixed
seed yields a byte-identical dataset everywhere.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, asdict

import numpy as np

from .graph import FlowsheetGraph, StreamEdge, UnitNode, validate
from .sfiles import serialize

SUB_PROCESSES = (
    "reaction",
    "thermal_separation",
    "countercurrent_separation",
    "filtration",
    "centrifugation",
    "purification",
)

CONFIG_VERSION = 1


class ResampleLimitExceeded(RuntimeError):
    pass


def _check_dist(name: str, dist: dict):
    if abs(sum(dist.values()) - 1.0) > 1e-9:
        raise ValueError(f"{name} probabilities must sum to 1")
    for k, v in dist.items():
        if k not in SUB_PROCESSES or v < 0:
            raise ValueError(f"bad entry {k}={v} in {name}")


@dataclass
class GeneratorConfig:
    seed: int = 0
    first_subprocess: dict = field(
        default_factory=lambda: {
            "reaction": 0.40,
            "thermal_separation": 0.25,
            "countercurrent_separation": 0.15,
            "filtration": 0.10,
            "centrifugation": 0.10,
        }
    )
    next_subprocess: dict = field(
        default_factory=lambda: {
            "thermal_separation": 0.25,
            "countercurrent_separation": 0.10,
            "filtration": 0.07,
            "centrifugation": 0.05,
            "reaction": 0.08,
            "purification": 0.45,
        }
    )
    pattern_weights: dict = field(
        default_factory=lambda: {
            "feed_units": {"hex": 0.4, "v": 0.2, "pp": 0.3, "comp": 0.1},
            "feed_count": [0.55, 0.30, 0.15],
            "inlet_units": {"hex": 0.45, "v": 0.25, "pp": 0.2, "comp": 0.1},
            "inlet_count": [0.5, 0.35, 0.15],
            "outlet_units": {"hex": 0.6, "v": 0.2, "pp": 0.2},
            "outlet_count": [0.7, 0.3],
            "purification_units": {"hex": 0.4, "v": 0.3, "pp": 0.3},
            "purification_count": [0.5, 0.35, 0.15],
            "thermal_units": {"dist": 0.6, "rect": 0.2, "flash": 0.2},
            "countercurrent_units": {"abs": 0.5, "ext": 0.5},
            "filtration_units": {"filt": 0.7, "cycl": 0.3},
            "solvent_prep": 0.3,
            "second_feed": 0.25,
            "utility_train": 0.5,
            "dryer": 0.35,
            "separation_recycle": 0.25,
        }
    )
    p_recycle: float = 0.35
    p_heat_integration: float = 0.30
    p_add_reactant: float = 0.30
    max_nodes: int = 50

    def validate(self):
        first = dict(self.first_subprocess)
        if first.get("purification", 0.0) != 0.0:
            raise ValueError("purification must have probability 0 as first sub-process")
        _check_dist("first_subprocess", first)
        _check_dist("next_subprocess", self.next_subprocess)
        if self.next_subprocess.get("purification", 0.0) <= 0.0:
            raise ValueError("purification must be reachable as next sub-process")
        if self.max_nodes < 3:
            raise ValueError("max_nodes must be >= 3")

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"version": CONFIG_VERSION, **asdict(self)}, f, indent=2)

    @classmethod
    def from_file(cls, path) -> "GeneratorConfig":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if doc.pop("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ValueError("unsupported generator config version")
        cfg = cls(**doc)
        cfg.validate()
        return cfg


def shifted_config(seed: int = 0) -> GeneratorConfig:
    """Distribution-shifted variant for transfer-learning experiments:
    same unit categories, very different topology statistics."""
    cfg = GeneratorConfig(seed=seed)
    cfg.first_subprocess = {
        "reaction": 0.0,
        "thermal_separation": 0.0,
        "countercurrent_separation": 0.40,
        "filtration": 0.30,
        "centrifugation": 0.30,
    }
    cfg.next_subprocess = {
        "thermal_separation": 0.03,
        "countercurrent_separation": 0.15,
        "filtration": 0.10,
        "centrifugation": 0.10,
        "reaction": 0.02,
        "purification": 0.60,
    }
    # long, nearly deterministic compressor trains everywhere: rare in the
    # base distribution but highly regular, so a fine-tuned model can learn
    # them to low perplexity
    cfg.pattern_weights = dict(cfg.pattern_weights)
    cfg.pattern_weights.update(
        {
            "feed_units": {"comp": 1.0},
            "feed_count": [0.0, 0.0, 0.5, 0.0, 0.5],
            "inlet_units": {"comp": 1.0},
            "inlet_count": [0.0, 0.0, 0.5, 0.0, 0.5],
            "outlet_units": {"comp": 1.0},
            "outlet_count": [0.0, 0.0, 1.0],
            "purification_units": {"comp": 1.0},
            "purification_count": [0.0, 0.0, 0.0, 1.0],
            "thermal_units": {"flash": 1.0},
            "countercurrent_units": {"ext": 1.0},
            "filtration_units": {"cycl": 1.0},
            "solvent_prep": 1.0,
            "second_feed": 0.8,
            "utility_train": 0.0,
            "dryer": 1.0,
            "separation_recycle": 0.5,
        }
    )
    cfg.p_recycle = 0.6
    cfg.p_heat_integration = 0.05
    cfg.p_add_reactant = 0.5
    cfg.max_nodes = 60
    return cfg


@dataclass
class _Branch:
    node: str
    out_tags: tuple = ()
    recycle_target: str | None = None


class _Builder:
    def __init__(self):
        self.nodes: list[UnitNode] = []
        self.edges: list[StreamEdge] = []
        self.counters: dict = {}
        self.heat_groups = 0

    def add(self, category: str, heat_group: int | None = None) -> str:
        n = self.counters.get(category, 0)
        self.counters[category] = n + 1
        nid = f"{category}-{n}"
        self.nodes.append(UnitNode(nid, category, heat_group))
        return nid

    def edge(self, src: str, dst: str, src_tags=(), dst_tags=()):
        self.edges.append(StreamEdge(src, dst, frozenset(src_tags), frozenset(dst_tags)))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def graph(self) -> FlowsheetGraph:
        return FlowsheetGraph(self.nodes, self.edges)


def _choice(rng: np.random.Generator, weights: dict) -> str:
    keys = sorted(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    return keys[rng.choice(len(keys), p=p / p.sum())]


def _count(rng: np.random.Generator, weights: list) -> int:
    p = np.array(weights, dtype=float)
    return int(rng.choice(len(p), p=p / p.sum()))


class _Generator:
    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.b = _Builder()
        self.pw = cfg.pattern_weights

    def chain(self, entry: str, tags: tuple, units_key: str, count_key: str) -> tuple:
        """Append 0..k sampled processing units after entry; the first new
        edge carries the branch tags.  Returns (frontier, remaining_tags)."""
        for _ in range(_count(self.rng, self.pw[count_key])):
            u = self.b.add(_choice(self.rng, self.pw[units_key]))
            self.b.edge(entry, u, src_tags=tags)
            entry, tags = u, ()
        return entry, tags

    def feed_chain(self) -> str:
        raw = self.b.add("raw")
        return self.chain(raw, (), "feed_units", "feed_count")[0]

    def initialize(self) -> str:
        first = self.feed_chain()
        if self.rng.random() < self.pw.get("second_feed", 0.0):
            second = self.feed_chain()
            mix = self.b.add("mix")
            self.b.edge(first, mix)
            self.b.edge(second, mix)
            return mix
        return first

    # -- sub-process templates -------------------------------------------

    def reaction(self, entry: str, tags: tuple) -> list[_Branch]:
        rng, b = self.rng, self.b
        recycle = rng.random() < self.cfg.p_recycle
        reactant = rng.random() < self.cfg.p_add_reactant
        mixer = None
        if recycle or reactant:
            mixer = b.add("mix")
            b.edge(entry, mixer, src_tags=tags)
            entry, tags = mixer, ()
        if reactant:
            feed = self.feed_chain()
            b.edge(feed, mixer)
        heat = rng.random() < self.cfg.p_heat_integration
        group = None
        if heat:
            self.b.heat_groups += 1
            group = self.b.heat_groups
            hx = b.add("hex", group)
            b.edge(entry, hx, src_tags=tags)
            entry, tags = hx, ()
        else:
            entry, tags = self.chain(entry, tags, "inlet_units", "inlet_count")
        reactor = b.add("r")
        b.edge(entry, reactor, src_tags=tags)
        out = reactor
        if heat:
            if rng.random() < self.pw.get("utility_train", 0.5):
                # heat-integrated utility side as its own mass train
                u_raw = b.add("raw")
                u_hx = b.add("hex", group)
                b.edge(u_raw, u_hx)
                b.edge(u_hx, b.add("prod"))
            else:
                hx2 = b.add("hex", group)
                b.edge(reactor, hx2)
                out = hx2
        return [_Branch(out, (), mixer if recycle else None)]

    def thermal_separation(self, entry: str, tags: tuple) -> list[_Branch]:
        recycle = self.rng.random() < self.pw.get("separation_recycle", 0.0)
        mixer = None
        if recycle:
            mixer = self.b.add("mix")
            self.b.edge(entry, mixer, src_tags=tags)
            entry, tags = mixer, ()
        entry, tags = self.chain(entry, tags, "inlet_units", "inlet_count")
        col = self.b.add(_choice(self.rng, self.pw["thermal_units"]))
        self.b.edge(entry, col, src_tags=tags)
        top = self.outlet(col, ("tout",))
        bottom = self.outlet(col, ("bout",))
        if recycle:
            # bottoms partially recycled to the mixer ahead of the column
            splt = self.b.add("splt")
            self.b.edge(bottom.node, splt, src_tags=bottom.out_tags)
            self.b.edge(splt, mixer)
            bottom = _Branch(splt, ())
        return [top, bottom]

    def countercurrent_separation(self, entry: str, tags: tuple) -> list[_Branch]:
        col = self.b.add(_choice(self.rng, self.pw["countercurrent_units"]))
        self.b.edge(entry, col, src_tags=tags, dst_tags=("bin",))
        solvent = self.b.add("raw")
        if self.rng.random() < self.pw.get("solvent_prep", 0.0):
            prep = self.b.add("pp")
            self.b.edge(solvent, prep)
            solvent = prep
        self.b.edge(solvent, col, dst_tags=("tin",))
        return [self.outlet(col, ("tout",)), self.outlet(col, ("bout",))]

    def filtration(self, entry: str, tags: tuple) -> list[_Branch]:
        f = self.b.add(_choice(self.rng, self.pw.get("filtration_units", {"filt": 1.0})))
        self.b.edge(entry, f, src_tags=tags)
        return [self.outlet(f, ()), self.outlet(f, ())]

    def centrifugation(self, entry: str, tags: tuple) -> list[_Branch]:
        c = self.b.add("centr")
        self.b.edge(entry, c, src_tags=tags)
        solids = c
        if self.rng.random() < self.pw.get("dryer", 0.0):
            solids = self.b.add("dry")
            self.b.edge(c, solids)
        return [self.outlet(c, ()), self.outlet(solids, ())]

    def outlet(self, node: str, tags: tuple) -> _Branch:
        """Optionally advance an outlet branch through sampled units."""
        end, rest = self.chain(node, tags, "outlet_units", "outlet_count")
        return _Branch(end, rest)

    def purification(self, entry: str, tags: tuple, recycle_target: str | None):
        b = self.b
        if recycle_target is not None:
            splt = b.add("splt")
            b.edge(entry, splt, src_tags=tags)
            b.edge(splt, recycle_target)
            entry, tags = splt, ()
        entry, tags = self.chain(entry, tags, "purification_units", "purification_count")
        b.edge(entry, b.add("prod"), src_tags=tags)

    def expand(self, sp: str, br: _Branch) -> list[_Branch]:
        if sp == "purification":
            self.purification(br.node, br.out_tags, br.recycle_target)
            return []
        method = getattr(self, sp)
        out = method(br.node, br.out_tags)
        if br.recycle_target is not None and out:
            # close the pending recycle on one outlet via a splitter
            i = int(self.rng.integers(len(out)))
            chosen = out[i]
            splt = self.b.add("splt")
            self.b.edge(chosen.node, splt, src_tags=chosen.out_tags)
            self.b.edge(splt, br.recycle_target)
            out[i] = _Branch(splt, (), None)
        return out

    def build(self) -> FlowsheetGraph | None:
        entry = self.initialize()
        queue = deque([_Branch(entry)])
        first = True
        while queue:
            br = queue.popleft()
            dist = self.cfg.first_subprocess if first else self.cfg.next_subprocess
            first = False
            sp = _choice(self.rng, dist)
            queue.extend(self.expand(sp, br))
            if self.b.n > 3 * self.cfg.max_nodes:
                return None  # runaway growth; caller resamples
        return self.b.graph()


def generate_flowsheet(cfg: GeneratorConfig, rng: np.random.Generator) -> FlowsheetGraph:
    cfg.validate()
    for _ in range(100):
        g = _Generator(cfg, rng).build()
        if g is None or g.node_count() > cfg.max_nodes:
            continue
        if validate(g):
            continue
        return g
    raise ResampleLimitExceeded("no valid flowsheet within 100 attempts")


def generate_dataset(cfg: GeneratorConfig, n_target: int) -> list[str]:
    """n_target distinct canonical SFILES strings, deterministic in cfg.seed,
    sorted lexicographically."""
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    seen: set = set()
    misses = 0
    while len(seen) < n_target:
        s = serialize(generate_flowsheet(cfg, rng))
        if s in seen:
            misses += 1
            if misses > 100:
                raise ResampleLimitExceeded(
                    f"could not reach {n_target} unique flowsheets "
                    f"(stuck at {len(seen)})"
                )
            continue
        misses = 0
        seen.add(s)
    return sorted(seen)


def stats(train: list[str], val: list[str] | None = None, test: list[str] | None = None):
    from .evaluation import dataset_stats

    return dataset_stats(train, val, test)
