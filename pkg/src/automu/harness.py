"""Brute-force oracle layer.

A *device* is either an automaton or a fixpoint system; both define a set of
accepted pointed digraphs (synchronous acceptance for automata, membership in
the first fixpoint component for systems).  Equivalence of two devices is
checked by exhaustive enumeration of all small digraphs or by seeded random
sampling; disagreements are returned as replayable counterexamples.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Union

from .automata import Automaton
from .graphs import (
    BitWidthMismatch,
    Digraph,
    PointedDigraph,
    backward_bisimilar,
    backward_unravel,
    count_digraphs,
    digraph_to_dict,
    enumerate_digraphs,
    random_digraph,
)
from .logic import MuSystem, lfp, satisfies
from .runtime import split_range, sync_accepting_nodes, sync_accepts

Device = Union[Automaton, MuSystem]


def device_bits(d: Device) -> int:
    return d.bits


def accepted_nodes(d: Device, g: Digraph) -> frozenset[str]:
    """Nodes of g at which the device's property holds; the single dispatch
    point shared by every checker and the command line."""
    if isinstance(d, Automaton):
        return sync_accepting_nodes(d, g)
    if isinstance(d, MuSystem):
        return lfp(d, g)[d.vars[0]]
    raise TypeError(f"not a device: {d!r}")


def device_accepts(d: Device, p: PointedDigraph) -> bool:
    if isinstance(d, Automaton):
        return sync_accepts(d, p)
    if isinstance(d, MuSystem):
        return satisfies(d, p)
    raise TypeError(f"not a device: {d!r}")


@dataclass(frozen=True)
class Counterexample:
    graph: Digraph
    point: str
    verdict1: bool
    verdict2: bool

    def to_dict(self) -> dict:
        return {
            "verdict": "counterexample",
            "graph": digraph_to_dict(self.graph),
            "point": self.point,
            "d1": self.verdict1,
            "d2": self.verdict2,
        }


@dataclass(frozen=True)
class EquivVerdict:
    equivalent: bool
    checked: int  # pointed digraphs compared
    counterexample: Counterexample | None = None

    def to_dict(self) -> dict:
        if self.equivalent:
            return {"verdict": "equivalent", "checked": self.checked}
        return self.counterexample.to_dict() | {"checked": self.checked}


def _require_same_bits(d1: Device, d2: Device) -> None:
    if device_bits(d1) != device_bits(d2):
        raise BitWidthMismatch(
            f"devices disagree on label width: {device_bits(d1)} vs {device_bits(d2)}"
        )


def _exhaustive_slice(
    d1: Device, d2: Device, max_nodes: int, start: int, stop: int
) -> tuple[int | None, Counterexample | None, int]:
    """Scan graphs [start, stop) of the enumeration; return the index of the
    first disagreeing graph (or None), its counterexample, and points checked."""
    checked = 0
    stream = itertools.islice(enumerate_digraphs(max_nodes, device_bits(d1)), start, stop)
    for offset, g in enumerate(stream):
        s1 = accepted_nodes(d1, g)
        s2 = accepted_nodes(d2, g)
        checked += len(g.nodes)
        if s1 != s2:
            point = next(v for v in g.nodes if (v in s1) != (v in s2))
            return start + offset, Counterexample(g, point, point in s1, point in s2), checked
    return None, None, checked


def equiv_exhaustive(d1: Device, d2: Device, max_nodes: int, jobs: int = 1) -> EquivVerdict:
    """Compare the devices on every digraph with up to ``max_nodes`` nodes and
    every point, in enumeration order.  The first disagreement is returned and
    is deterministic at any job count: parallel workers scan disjoint slices
    and the globally smallest disagreeing index wins."""
    _require_same_bits(d1, d2)
    total = count_digraphs(max_nodes, device_bits(d1))
    if jobs <= 1:
        index, cex, checked = _exhaustive_slice(d1, d2, max_nodes, 0, total)
        return EquivVerdict(equivalent=cex is None, checked=checked, counterexample=cex)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(
            _exhaustive_slice,
            *zip(*[(d1, d2, max_nodes, start, stop) for start, stop in split_range(total, jobs)]),
        ))
    checked = sum(r[2] for r in results)
    hits = [(index, cex) for index, cex, _ in results if index is not None]
    if hits:
        _, cex = min(hits, key=lambda h: h[0])
        return EquivVerdict(equivalent=False, checked=checked, counterexample=cex)
    return EquivVerdict(equivalent=True, checked=checked)


def _sampled_slice(
    d1: Device, d2: Device, max_nodes: int, seeds: list[int], start: int
) -> tuple[int | None, Counterexample | None, int]:
    for offset, s in enumerate(seeds):
        p = random_digraph(random.Random(s), max_nodes, device_bits(d1))
        v1 = device_accepts(d1, p)
        v2 = device_accepts(d2, p)
        if v1 != v2:
            return start + offset, Counterexample(p.graph, p.point, v1, v2), offset + 1
    return None, None, len(seeds)


def equiv_sampled(
    d1: Device, d2: Device, max_nodes: int, samples: int, seed: int = 0, jobs: int = 1
) -> EquivVerdict:
    """Compare the devices at a random point of ``samples`` random digraphs
    (edge probability 0.5, uniform labels); deterministic for a given seed
    (each sample runs off its own derived sub-seed, so job count does not
    change which digraphs are drawn).  Sampling can only refute equivalence,
    never establish it."""
    _require_same_bits(d1, d2)
    rng = random.Random(seed)
    sample_seeds = [rng.randrange(2**32) for _ in range(samples)]
    if jobs <= 1:
        index, cex, checked = _sampled_slice(d1, d2, max_nodes, sample_seeds, 0)
        return EquivVerdict(equivalent=cex is None, checked=checked, counterexample=cex)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        bounds = split_range(samples, jobs)
        results = list(pool.map(
            _sampled_slice,
            *zip(*[(d1, d2, max_nodes, sample_seeds[start:stop], start) for start, stop in bounds]),
        ))
    checked = sum(r[2] for r in results)
    hits = [(index, cex) for index, cex, _ in results if index is not None]
    if hits:
        _, cex = min(hits, key=lambda h: h[0])
        return EquivVerdict(equivalent=False, checked=checked, counterexample=cex)
    return EquivVerdict(equivalent=True, checked=checked)


@dataclass(frozen=True)
class InvarianceVerdict:
    """Outcome of an unraveling invariance check.  ``bisimilar`` failing means
    the witness generator itself misbehaved; ``invariant`` failing with
    ``bisimilar`` holding means acceptance distinguished two backward
    bisimilar structures."""

    ok: bool
    bisimilar: bool
    invariant: bool
    original: PointedDigraph
    witness: PointedDigraph
    accepts_original: bool
    accepts_witness: bool


def bisim_invariance_check(a: Automaton, p: PointedDigraph, depth: int) -> InvarianceVerdict:
    """Unravel ``p`` backward to ``depth``, confirm the result is backward
    bisimilar, and confirm the automaton accepts both or neither."""
    w = backward_unravel(p, depth)
    bisim = backward_bisimilar(p, w)
    acc_p = sync_accepts(a, p)
    acc_w = sync_accepts(a, w)
    invariant = acc_p == acc_w
    return InvarianceVerdict(
        ok=bisim and invariant,
        bisimilar=bisim,
        invariant=invariant,
        original=p,
        witness=w,
        accepts_original=acc_p,
        accepts_witness=acc_w,
    )
