"""Finite labeled digraphs.

A digraph here is a finite nonempty set of nodes, a set of directed edges
(self-loops allowed, no multi-edges), and a fixed-width bit label on every
node.  This module owns parsing and validation of the JSON graph format,
exhaustive enumeration of all small digraphs, backward bisimulation checking,
and backward unraveling (a generator of bisimilar witnesses).
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator


class GraphFormatError(ValueError):
    """A graph document is malformed or violates a digraph invariant."""


class BitWidthMismatch(ValueError):
    """Two objects that must agree on label width do not."""


Edge = tuple[str, str]


@dataclass(frozen=True, eq=True)
class Digraph:
    """Immutable labeled digraph.

    Invariants (checked on construction): the node list is nonempty and free
    of duplicates, every node has a label of exactly ``bits`` characters from
    ``{'0','1'}``, and every edge endpoint is a declared node.
    """

    bits: int
    nodes: tuple[str, ...]
    labels: dict[str, str]
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        if self.bits < 0:
            raise GraphFormatError("bits must be >= 0")
        if not self.nodes:
            raise GraphFormatError("empty node set: a digraph needs at least one node")
        if len(set(self.nodes)) != len(self.nodes):
            dup = next(n for n in self.nodes if self.nodes.count(n) > 1)
            raise GraphFormatError(f"duplicate node id {dup!r}")
        declared = set(self.nodes)
        if set(self.labels) != declared:
            odd = set(self.labels) ^ declared
            raise GraphFormatError(f"labels must cover exactly the declared nodes; mismatch at {sorted(odd)!r}")
        for node, label in self.labels.items():
            if len(label) != self.bits or any(c not in "01" for c in label):
                raise GraphFormatError(
                    f"label width: node {node!r} has label {label!r}, expected {self.bits} bits"
                )
        for u, v in self.edges:
            if u not in declared or v not in declared:
                raise GraphFormatError(f"edge ({u!r}, {v!r}) references an undeclared node")

    @cached_property
    def incoming_map(self) -> dict[str, frozenset[str]]:
        inc: dict[str, set[str]] = {v: set() for v in self.nodes}
        for u, v in self.edges:
            inc[v].add(u)
        return {v: frozenset(s) for v, s in inc.items()}

    def incoming(self, v: str) -> frozenset[str]:
        """Set of incoming neighbors of ``v``: all u with an edge u -> v."""
        if v not in self.incoming_map:
            raise KeyError(f"unknown node id {v!r}")
        return self.incoming_map[v]


@dataclass(frozen=True, eq=True)
class PointedDigraph:
    """A digraph with one distinguished evaluation node."""

    graph: Digraph
    point: str

    def __post_init__(self) -> None:
        if self.point not in self.graph.nodes:
            raise GraphFormatError(f"point {self.point!r} is not a node of the graph")


def parse_digraph(text: str) -> Digraph:
    """Parse the JSON graph document format.

    ``{"bits": 1, "nodes": ["u"], "labels": {"u": "1"}, "edges": [["u","u"]]}``
    Label strings are big-endian: character i is bit i of the node's label.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"not valid JSON: {exc}") from exc
    return digraph_from_dict(doc)


def digraph_from_dict(doc: object) -> Digraph:
    if not isinstance(doc, dict):
        raise GraphFormatError("graph document must be a JSON object")
    for key in ("bits", "nodes", "labels", "edges"):
        if key not in doc:
            raise GraphFormatError(f"missing key {key!r}")
    bits, nodes, labels, edges = doc["bits"], doc["nodes"], doc["labels"], doc["edges"]
    if not isinstance(bits, int):
        raise GraphFormatError("'bits' must be an integer")
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise GraphFormatError("'nodes' must be a list of strings")
    if not isinstance(labels, dict):
        raise GraphFormatError("'labels' must be an object")
    if not isinstance(edges, list):
        raise GraphFormatError("'edges' must be a list of [src, dst] pairs")
    edge_set = set()
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
            raise GraphFormatError(f"edge #{i} must be a [src, dst] pair of strings")
        edge_set.add((e[0], e[1]))
    return Digraph(bits=bits, nodes=tuple(nodes), labels=dict(labels), edges=frozenset(edge_set))


def digraph_to_dict(g: Digraph) -> dict:
    return {
        "bits": g.bits,
        "nodes": list(g.nodes),
        "labels": {v: g.labels[v] for v in g.nodes},
        "edges": [list(e) for e in sorted(g.edges)],
    }


def digraph_to_json(g: Digraph) -> str:
    return json.dumps(digraph_to_dict(g), indent=2)


def enumerate_digraphs(max_nodes: int, bits: int) -> Iterator[Digraph]:
    """Yield every digraph on node sets {n0..n_{m-1}} for 1 <= m <= max_nodes.

    For each node count m, all 2^(m*m) edge subsets are enumerated in
    ascending bitmask order (row-major pair order), and for each edge set all
    2^(bits*m) labelings in lexicographic order.  No isomorphism reduction is
    attempted, so the total count is sum over m of 2^(m*m) * 2^(bits*m).
    """
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    label_pool = ["".join(t) for t in itertools.product("01", repeat=bits)]
    for m in range(1, max_nodes + 1):
        nodes = tuple(f"n{i}" for i in range(m))
        pairs = [(u, v) for u in nodes for v in nodes]
        for mask in range(1 << (m * m)):
            edges = frozenset(p for i, p in enumerate(pairs) if mask >> i & 1)
            for assignment in itertools.product(label_pool, repeat=m):
                yield Digraph(bits=bits, nodes=nodes, labels=dict(zip(nodes, assignment)), edges=edges)


def count_digraphs(max_nodes: int, bits: int) -> int:
    """Closed form for the number of digraphs enumerate_digraphs yields."""
    return sum(2 ** (m * m) * 2 ** (bits * m) for m in range(1, max_nodes + 1))


def random_digraph(rng: random.Random, max_nodes: int, bits: int, edge_prob: float = 0.5) -> PointedDigraph:
    """Sample a random pointed digraph: node count uniform in 1..max_nodes,
    each of the m^2 directed edges present independently with ``edge_prob``,
    labels uniform, point uniform."""
    m = rng.randint(1, max_nodes)
    nodes = tuple(f"n{i}" for i in range(m))
    edges = frozenset((u, v) for u in nodes for v in nodes if rng.random() < edge_prob)
    labels = {v: "".join(rng.choice("01") for _ in range(bits)) for v in nodes}
    g = Digraph(bits=bits, nodes=nodes, labels=labels, edges=edges)
    return PointedDigraph(g, rng.choice(nodes))


def backward_bisimilar(a: PointedDigraph, b: PointedDigraph) -> bool:
    """Decide whether two pointed digraphs are backward bisimilar.

    A backward bisimulation relates nodes with equal labels such that every
    incoming edge on either side is matched by an incoming edge on the other
    side with related sources.  Computed as a greatest fixpoint: start from
    all label-equal pairs and delete pairs whose incoming edges cannot be
    matched, until stable.
    """
    g, h = a.graph, b.graph
    if g.bits != h.bits:
        raise BitWidthMismatch(f"label widths differ: {g.bits} vs {h.bits}")
    pairs = {(u, v) for u in g.nodes for v in h.nodes if g.labels[u] == h.labels[v]}
    changed = True
    while changed:
        changed = False
        for u, v in list(pairs):
            fwd = all(any((w, x) in pairs for x in h.incoming(v)) for w in g.incoming(u))
            bwd = all(any((w, x) in pairs for w in g.incoming(u)) for x in h.incoming(v))
            if not (fwd and bwd):
                pairs.discard((u, v))
                changed = True
    return (a.point, b.point) in pairs


def backward_unravel(p: PointedDigraph, depth: int) -> PointedDigraph:
    """Unravel ``p`` against the edge direction into a tree of the given depth,
    grafting a fresh copy of the whole original graph onto every frontier node.

    Tree levels below ``depth`` are backward paths from the point; each
    frontier path ending at original node u is replaced by a disjoint copy of
    the original graph, wired into the tree at that copy's u.  The result is
    backward bisimilar to ``p``; depth 0 returns an isomorphic copy.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    g = p.graph
    nodes: list[str] = []
    labels: dict[str, str] = {}
    edges: set[Edge] = set()

    # paths are tuples (point, v1, ..., vj) with each v_{i+1} -> v_i an edge
    path_id: dict[tuple[str, ...], str] = {}
    levels: list[list[tuple[str, ...]]] = [[(p.point,)]]
    for j in range(depth):
        nxt = [path + (u,) for path in levels[j] for u in sorted(g.incoming(path[-1]))]
        levels.append(nxt)
    for j in range(depth):  # interior tree nodes only
        for path in levels[j]:
            pid = f"p{len(path_id)}"
            path_id[path] = pid
            nodes.append(pid)
            labels[pid] = g.labels[path[-1]]
    for j in range(1, depth):
        for path in levels[j]:
            edges.add((path_id[path], path_id[path[:-1]]))

    for k, frontier in enumerate(levels[depth]):
        copy = {v: f"g{k}.{v}" for v in g.nodes}
        for v in g.nodes:
            nodes.append(copy[v])
            labels[copy[v]] = g.labels[v]
        edges.update((copy[u], copy[v]) for u, v in g.edges)
        if depth > 0:
            edges.add((copy[frontier[-1]], path_id[frontier[:-1]]))

    out = Digraph(bits=g.bits, nodes=tuple(nodes), labels=labels, edges=frozenset(edges))
    point = path_id[(p.point,)] if depth > 0 else f"g0.{p.point}"
    return PointedDigraph(out, point)
