import itertools

import pytest
from hypothesis import given

from automu.automata import (
    ELSE,
    Automaton,
    AutomatonTooLarge,
    NotQuasiAcyclic,
    TransitionRule,
    trace_pushlast,
)
from automu.graphs import enumerate_digraphs
from automu.harness import equiv_exhaustive
from automu.logic import (
    And,
    Box,
    Const,
    Dia,
    FalseF,
    MuSystem,
    Or,
    Var,
    lfp,
    parse_formula,
)
from automu.runtime import initial_configuration, sync_accepting_nodes, sync_step
from automu.transform import (
    NotFlattened,
    SizeGuardExceeded,
    automaton_to_formula,
    compute_enables,
    flatten,
    formula_to_automaton,
    shallow_sat,
)
from automu.zoo import (
    boxed_one_formula,
    reach_one_formula,
    safe_one_automaton,
    safe_one_formula,
    sync_probe_automaton,
)
from strategies import make_automaton


class TestFlatten:
    def test_nested_diamond(self):
        sys = parse_formula("(mu ((X0 (dia (dia (var X0))))))", bits=1)
        flat = flatten(sys)
        assert flat.vars == ("X0", "Y0")
        assert flat.bodies[0] == Dia(Var("Y0"))
        assert flat.bodies[1] == Dia(Var("X0"))
        assert equiv_exhaustive(sys, flat, 3).equivalent

    def test_already_flat_is_unchanged(self):
        sys = safe_one_formula()
        assert flatten(sys) == sys

    def test_box_of_constant(self):
        sys = parse_formula("(mu ((X0 (box (p 0)))))")
        flat = flatten(sys)
        assert flat.vars == ("X0", "Y0")
        assert flat.bodies[0] == Box(Var("Y0"))
        assert flat.bodies[1] == Const(0)
        assert equiv_exhaustive(sys, flat, 3).equivalent

    def test_fresh_names_avoid_collisions(self):
        sys = MuSystem(bits=0, vars=("Y0",), bodies=(Dia(Box(Var("Y0"))),))
        flat = flatten(sys)
        assert flat.vars == ("Y0", "Y1")
        assert equiv_exhaustive(sys, flat, 3).equivalent

    def test_head_position_preserved(self):
        sys = parse_formula("(mu ((A (box (dia (var B)))) (B (p 0))))")
        flat = flatten(sys)
        assert flat.vars[0] == "A"
        assert equiv_exhaustive(sys, flat, 3).equivalent


class TestShallowSat:
    def test_box_vacuous(self):
        assert shallow_sat(Box(Var("X2")), set(), set())

    def test_left_disjunct_from_atoms(self):
        f = Or(And(Const(0), Var("X2")), Dia(Var("X1")))
        assert shallow_sat(f, {"p0", "X2"}, set())
        assert shallow_sat(f, {"p0", "X2"}, {frozenset({"X1"})})

    def test_dia_needs_a_member(self):
        assert not shallow_sat(Dia(Var("X1")), set(), {frozenset({"X2"})})
        assert shallow_sat(Dia(Var("X1")), set(), {frozenset({"X1", "X2"})})

    def test_requires_flat_input(self):
        with pytest.raises(NotFlattened):
            shallow_sat(Dia(Dia(Var("X"))), set(), set())


class TestFormulaToAutomaton:
    def test_flagship_construction_shape(self):
        a = formula_to_automaton(safe_one_formula())
        assert len(a.states) == 8
        assert a.init == {"1": "{p0}", "0": "{}"}
        assert a.accepting == {"{X1}", "{X1,X2}", "{p0,X1}", "{p0,X1,X2}"}
        assert a.is_quasi_acyclic()

    def test_wait_free_update_is_simultaneous(self):
        # from {p0} with no neighbors: the box adds X2, but X1 must not ride
        # along in the same step since X2 was not in the state being read
        a = formula_to_automaton(safe_one_formula())
        assert a.delta("{p0}", frozenset()) == "{p0,X2}"
        assert a.delta("{p0,X2}", frozenset()) == "{p0,X1,X2}"

    def test_states_only_grow(self):
        a = formula_to_automaton(safe_one_formula())
        members = {q: set(q.strip("{}").split(",")) - {""} for q in a.states}
        for mask in range(1 << len(a.states)):
            hood = frozenset(s for i, s in enumerate(a.states) if mask >> i & 1)
            for q in a.states:
                assert members[q] <= members[a.delta(q, hood)]

    def test_total_acceptance(self):
        sys = parse_formula("(mu ((X0 true)))", bits=1)
        a = formula_to_automaton(sys)
        assert len(a.states) == 4  # subsets of {p0, X0}
        assert equiv_exhaustive(a, sys, 2).equivalent

    def test_flagship_equivalence_small(self):
        assert equiv_exhaustive(formula_to_automaton(safe_one_formula()), safe_one_formula(), 2).equivalent

    def test_seed_formula_round_trips_small(self):
        for sys in (reach_one_formula(), boxed_one_formula()):
            a = formula_to_automaton(sys)
            assert a.is_quasi_acyclic()
            assert equiv_exhaustive(a, sys, 2).equivalent

    def test_size_guard(self):
        names = tuple(f"V{i}" for i in range(17))
        sys = MuSystem(bits=0, vars=names, bodies=tuple(Var(n) for n in names))
        with pytest.raises(SizeGuardExceeded):
            formula_to_automaton(sys)

    def test_variable_named_like_a_constant(self):
        sys = MuSystem(bits=1, vars=("p0",), bodies=(Const(0),))
        a = formula_to_automaton(sys)
        assert equiv_exhaustive(a, sys, 2).equivalent


def _is_base_pair(a, h, t):
    if not all(len(x) == 1 for x in h):
        return False
    n = frozenset(x[0] for x in h)
    for q in a.states:
        if trace_pushlast((q,), a.delta(q, n)) == t:
            return True
    return False


def _becomes(h, h2):
    """The one-step evolution relation on neighbor-trace sets."""
    fwd = all(
        any(t2 == t or (len(t2) == len(t) + 1 and t2[: len(t)] == t) for t2 in h2) for t in h
    )
    bwd = all(
        any(t2 == t or (len(t2) == len(t) + 1 and t2[: len(t)] == t) for t in h) for t2 in h2
    )
    return fwd and bwd


class TestComputeEnables:
    def test_five_state_base_pairs(self):
        closure = compute_enables(safe_one_automaton(), max_rounds=1, max_traces=20)
        pairs = closure.pairs
        assert (frozenset({("q4",), ("q5",)}), ("q1", "q5")) in pairs
        assert (frozenset(), ("q2", "q4")) in pairs

    def test_five_state_one_step_derivation(self):
        # {[q4]} drives [q2,q4]; evolving the neighbor to [q4,q5] drives
        # [q2,q4,q5] since delta(q4, {q5}) = q5
        closure = compute_enables(safe_one_automaton(), max_rounds=1, max_traces=20)
        assert (frozenset({("q4", "q5")}), ("q2", "q4", "q5")) in closure.pairs

    def test_probe_closure_bound(self):
        a = sync_probe_automaton()
        closure = compute_enables(a)
        t = len(a.traces())
        assert closure.iterations_used <= t * 2**t

    def test_probe_pairs_revalidate(self):
        a = sync_probe_automaton()
        closure = compute_enables(a)
        by_t = {}
        for h, t in closure.pairs:
            by_t.setdefault(t, set()).add(h)
        for h, t in closure.pairs:
            if _is_base_pair(a, h, t):
                continue
            # must be one inductive step from some pair in the closure
            assert any(
                _becomes(h0, h) and trace_pushlast(t0, a.delta(t0[-1], frozenset(x[-1] for x in h))) == t
                for h0, t0 in closure.pairs
            ), (h, t)

    def test_closure_contains_synchronous_pairs(self):
        a = sync_probe_automaton()
        closure = compute_enables(a).pairs
        for g in enumerate_digraphs(3, 1):
            config = initial_configuration(a, g)
            rich = {v: (config.node_state[v],) for v in g.nodes}
            for _ in range(4):
                nxt = sync_step(a, g, config)
                for v in g.nodes:
                    h = frozenset(rich[u] for u in g.incoming(v))
                    t = trace_pushlast(rich[v], nxt.node_state[v])
                    assert (h, t) in closure, (h, t)
                config = nxt
                rich = {v: trace_pushlast(rich[v], config.node_state[v]) for v in g.nodes}

    def test_guard_rejects_large_trace_sets(self):
        with pytest.raises(AutomatonTooLarge, match="max_rounds"):
            compute_enables(safe_one_automaton())  # 15 traces > default guard

    def test_requires_quasi_acyclic(self):
        cyclic = Automaton(
            bits=0, states=("q1", "q2"), init={"": "q1"}, accepting=frozenset(),
            rules={
                "q1": (TransitionRule(ELSE, "q2"),),
                "q2": (TransitionRule(ELSE, "q1"),),
            },
        )
        with pytest.raises(NotQuasiAcyclic):
            compute_enables(cyclic)


class TestAutomatonToFormula:
    def test_single_state_accept_all(self):
        a = Automaton(
            bits=1, states=("q",), init={"0": "q", "1": "q"}, accepting=frozenset({"q"}),
            rules={"q": (TransitionRule(ELSE, "q"),)},
        )
        sys = automaton_to_formula(a)
        assert equiv_exhaustive(sys, parse_formula("(mu ((X0 true)))", bits=1), 2).equivalent

    def test_single_state_accept_nothing(self):
        a = Automaton(
            bits=1, states=("q",), init={"0": "q", "1": "q"}, accepting=frozenset(),
            rules={"q": (TransitionRule(ELSE, "q"),)},
        )
        sys = automaton_to_formula(a)
        assert sys.bodies[0] == FalseF()
        for g in itertools.islice(enumerate_digraphs(2, 1), 25):
            assert lfp(sys, g)[sys.vars[0]] == frozenset()

    def test_head_is_first_variable(self):
        sys = automaton_to_formula(sync_probe_automaton())
        assert sys.vars[0] == "X0"

    def test_flagship_down_small(self):
        sys = automaton_to_formula(safe_one_automaton())
        assert equiv_exhaustive(sys, safe_one_automaton(), 2).equivalent

    def test_probe_down_matches_on_edgeless_graphs(self):
        # without edges no timing effects exist, so even the probe's formula
        # must agree there: delta(qa, {}) = qdead, nothing accepted
        sys = automaton_to_formula(sync_probe_automaton())
        for g in enumerate_digraphs(1, 1):
            if not g.edges:
                assert lfp(sys, g)[sys.vars[0]] == sync_accepting_nodes(sync_probe_automaton(), g)

    def test_compiled_machines_round_trip_back_down(self):
        # compiled machines are timing independent, the hypothesis the
        # downward construction rests on, so up-then-down must close the loop
        for base in (reach_one_formula(), boxed_one_formula()):
            a = formula_to_automaton(base)
            down = automaton_to_formula(a)
            assert equiv_exhaustive(down, base, 2).equivalent

    def test_zero_bit_automaton(self):
        a = Automaton(
            bits=0, states=("q", "r"), init={"": "q"}, accepting=frozenset({"r"}),
            rules={
                "q": (TransitionRule(ELSE, "r"),),
                "r": (TransitionRule(ELSE, "r"),),
            },
        )
        sys = automaton_to_formula(a)
        assert equiv_exhaustive(sys, a, 3).equivalent

    def test_requires_quasi_acyclic_input(self):
        cyclic = Automaton(
            bits=0, states=("q1", "q2"), init={"": "q1"}, accepting=frozenset(),
            rules={
                "q1": (TransitionRule(ELSE, "q2"),),
                "q2": (TransitionRule(ELSE, "q1"),),
            },
        )
        with pytest.raises(NotQuasiAcyclic):
            automaton_to_formula(cyclic)
