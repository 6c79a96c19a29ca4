"""Hand-built reference devices used by the tests, the samples directory, and
as ready-made inputs for the command line."""

from __future__ import annotations

from .automata import (
    ELSE,
    AndGuard,
    Automaton,
    NotGuard,
    SubsetEq,
    SupsetEq,
    TransitionRule,
)
from .graphs import Digraph, PointedDigraph
from .logic import MuSystem, parse_formula


def _rule(guard, target: str) -> TransitionRule:
    return TransitionRule(guard, target)


def safe_one_automaton() -> Automaton:
    """Five-state machine over 1-bit labels.

    It accepts a pointed digraph iff, walking edges against their direction
    from the point, one can reach a node labeled 1 from which no directed
    cycle can be reached (still walking backward).  States: q1/q2 initial for
    labels 1/0, q3/q5 accepting, q4 a "my sources are settled" marker.
    """
    vs = lambda *xs: frozenset(xs)
    not_sub = lambda *xs: NotGuard(SubsetEq(vs(*xs)))
    return Automaton(
        bits=1,
        states=("q1", "q2", "q3", "q4", "q5"),
        init={"1": "q1", "0": "q2"},
        accepting=frozenset({"q3", "q5"}),
        rules={
            "q1": (
                _rule(SubsetEq(vs("q4", "q5")), "q5"),
                _rule(AndGuard((not_sub("q4", "q5"), not_sub("q1", "q2", "q4"))), "q3"),
                _rule(ELSE, "q1"),
            ),
            "q2": (
                _rule(AndGuard((not_sub("q4", "q5"), not_sub("q1", "q2", "q4"))), "q3"),
                _rule(SubsetEq(vs("q4")), "q4"),
                _rule(AndGuard((SupsetEq(vs("q5")), SubsetEq(vs("q4", "q5")))), "q5"),
                _rule(ELSE, "q2"),
            ),
            "q3": (
                _rule(SubsetEq(vs("q4", "q5")), "q5"),
                _rule(ELSE, "q3"),
            ),
            "q4": (
                _rule(SupsetEq(vs("q5")), "q5"),
                _rule(ELSE, "q4"),
            ),
            "q5": (_rule(ELSE, "q5"),),
        },
    )


SAFE_ONE_SEXP = "(mu ((X1 (or (and (p 0) (var X2)) (dia (var X1)))) (X2 (box (var X2)))))"


def safe_one_formula() -> MuSystem:
    """Fixpoint system equivalent to safe_one_automaton: X2 collects nodes
    from which no backward cycle is reachable, X1 the backward reachability of
    a 1-labeled X2 node."""
    return parse_formula(SAFE_ONE_SEXP)


REACH_ONE_SEXP = "(mu ((X0 (or (p 0) (dia (var X0))))))"


def reach_one_formula() -> MuSystem:
    """Some node labeled 1 is backward reachable from the point."""
    return parse_formula(REACH_ONE_SEXP)


BOXED_ONE_SEXP = "(mu ((X0 (box (var Y))) (Y (p 0))))"


def boxed_one_formula() -> MuSystem:
    """Every incoming neighbor of the point is labeled 1 (vacuously true for
    in-degree 0)."""
    return parse_formula(BOXED_ONE_SEXP)


def sync_probe_automaton() -> Automaton:
    """Three-state machine that exploits simultaneity and is therefore not
    timing independent: from the initial state it accepts iff the first
    neighborhood it reads still contains the initial state, and both outcomes
    are absorbing.  Under the synchronous timing on a 2-cycle every node
    accepts; a timing that delays one node until its neighbor has moved on
    drives it into the dead state."""
    return Automaton(
        bits=1,
        states=("qa", "qacc", "qdead"),
        init={"0": "qa", "1": "qa"},
        accepting=frozenset({"qacc"}),
        rules={
            "qa": (
                _rule(SupsetEq(frozenset({"qa"})), "qacc"),
                _rule(ELSE, "qdead"),
            ),
            "qacc": (_rule(ELSE, "qacc"),),
            "qdead": (_rule(ELSE, "qdead"),),
        },
    )


def two_cycle_graph() -> Digraph:
    """Two nodes cycling into each other, both labeled 0."""
    return Digraph(
        bits=1,
        nodes=("u", "v"),
        labels={"u": "0", "v": "0"},
        edges=frozenset({("u", "v"), ("v", "u")}),
    )


def single_node(label: str = "1", self_loop: bool = False) -> PointedDigraph:
    edges = frozenset({("v", "v")}) if self_loop else frozenset()
    g = Digraph(bits=len(label), nodes=("v",), labels={"v": label}, edges=edges)
    return PointedDigraph(g, "v")


def chain_graph() -> Digraph:
    """u -> v with u labeled 1 and v labeled 0."""
    return Digraph(
        bits=1,
        nodes=("u", "v"),
        labels={"u": "1", "v": "0"},
        edges=frozenset({("u", "v")}),
    )
