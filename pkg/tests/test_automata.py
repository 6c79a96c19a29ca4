import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automu.automata import (
    ELSE,
    Automaton,
    AutomatonFormatError,
    AutomatonTooLarge,
    NotQuasiAcyclic,
    SubsetEq,
    TransitionRule,
    automaton_to_json,
    parse_automaton,
    trace_first,
    trace_last,
    trace_popfirst,
    trace_pushlast,
)
from automu.zoo import safe_one_automaton, sync_probe_automaton
from strategies import automata, state_traces


def tiny(rules=None, **kw):
    args = dict(
        bits=0,
        states=("q",),
        init={"": "q"},
        rules=rules or {"q": (TransitionRule(ELSE, "q"),)},
        accepting=frozenset(),
    )
    args.update(kw)
    return Automaton(**args)


class TestConstructionAndParsing:
    def test_trivial_automaton(self):
        a = parse_automaton(json.dumps({
            "bits": 1, "states": ["q"], "init": {"0": "q", "1": "q"},
            "accepting": [], "rules": {"q": [{"guard": "else", "to": "q"}]},
        }))
        assert a.delta("q", frozenset()) == "q"

    def test_five_state_round_trip(self):
        a = safe_one_automaton()
        assert parse_automaton(automaton_to_json(a)) == a

    def test_missing_else_rule(self):
        with pytest.raises(AutomatonFormatError, match="not total at 'q'"):
            tiny(rules={"q": (TransitionRule(SubsetEq(frozenset()), "q"),)})

    def test_else_must_be_last(self):
        with pytest.raises(AutomatonFormatError, match="must be last"):
            tiny(rules={"q": (
                TransitionRule(ELSE, "q"),
                TransitionRule(ELSE, "q"),
            )})

    def test_undeclared_rule_target(self):
        with pytest.raises(AutomatonFormatError, match="undeclared"):
            tiny(rules={"q": (TransitionRule(ELSE, "zz"),)})

    def test_undeclared_guard_state(self):
        with pytest.raises(AutomatonFormatError, match="undeclared"):
            tiny(rules={"q": (
                TransitionRule(SubsetEq(frozenset({"zz"})), "q"),
                TransitionRule(ELSE, "q"),
            )})

    def test_init_not_total(self):
        with pytest.raises(AutomatonFormatError, match="init"):
            tiny(bits=1, init={"0": "q"})

    def test_duplicate_state(self):
        with pytest.raises(AutomatonFormatError, match="duplicate state"):
            tiny(states=("q", "q"))

    def test_accepting_undeclared(self):
        with pytest.raises(AutomatonFormatError, match="accepting"):
            tiny(accepting=frozenset({"zz"}))

    def test_unknown_guard_kind(self):
        with pytest.raises(AutomatonFormatError, match="unknown guard"):
            parse_automaton(json.dumps({
                "bits": 0, "states": ["q"], "init": {"": "q"}, "accepting": [],
                "rules": {"q": [{"guard": {"wat": []}, "to": "q"}]},
            }))

    def test_else_cannot_nest_in_combinators(self):
        with pytest.raises(AutomatonFormatError, match="whole-rule guard"):
            parse_automaton(json.dumps({
                "bits": 0, "states": ["q"], "init": {"": "q"}, "accepting": [],
                "rules": {"q": [{"guard": {"not": "else"}, "to": "q"},
                                 {"guard": "else", "to": "q"}]},
            }))


class TestDelta:
    # guard shapes exercised against the five-state machine
    def test_subset_guard(self):
        assert safe_one_automaton().delta("q2", {"q4"}) == "q4"

    def test_empty_neighborhood_is_a_subset(self):
        assert safe_one_automaton().delta("q1", frozenset()) == "q5"

    def test_otherwise_branch(self):
        assert safe_one_automaton().delta("q2", {"q1", "q2"}) == "q2"

    def test_conjunction_of_negated_subsets(self):
        assert safe_one_automaton().delta("q2", {"q3"}) == "q3"

    def test_unknown_state(self):
        with pytest.raises(KeyError, match="unknown state"):
            safe_one_automaton().delta("zz", frozenset())

    def test_unknown_neighbor(self):
        with pytest.raises(KeyError, match="neighborhood"):
            safe_one_automaton().delta("q1", {"zz"})

    @given(automata(max_states=3, bits=1))
    @settings(max_examples=30)
    def test_totality_and_determinism(self, a):
        for r in range(1 << len(a.states)):
            subset = frozenset(s for i, s in enumerate(a.states) if r >> i & 1)
            for q in a.states:
                out = a.delta(q, subset)
                assert out in a.states
                assert a.delta(q, subset) == out


class TestTraceOperators:
    def test_defining_equations(self):
        # the eight defining cases of the four operators
        assert trace_first(("q1",)) == "q1"
        assert trace_first(("q1", "q3")) == "q1"
        assert trace_last(("q3",)) == "q3"
        assert trace_last(("q1", "q3")) == "q3"
        assert trace_pushlast(("q1", "q2"), "q2") == ("q1", "q2")
        assert trace_pushlast(("q1", "q2"), "q3") == ("q1", "q2", "q3")
        assert trace_popfirst(("q1", "q2")) == ("q2",)
        assert trace_popfirst(("q1",)) == ("q1",)

    def test_pushlast_singleton_idempotent(self):
        assert trace_pushlast(("q1",), "q1") == ("q1",)

    def test_popfirst_longer(self):
        assert trace_popfirst(("q1", "q2", "q3")) == ("q2", "q3")

    @given(state_traces(), st.sampled_from(("a", "b", "c", "d")))
    def test_pushlast_laws(self, t, q):
        out = trace_pushlast(t, q)
        assert trace_last(out) == q
        assert not any(x == y for x, y in zip(out, out[1:]))
        assert out[: len(t)] == t
        assert trace_pushlast(out, q) == out

    @given(state_traces())
    def test_popfirst_laws(self, t):
        out = trace_popfirst(t)
        assert len(out) == max(1, len(t) - 1)
        assert trace_last(out) == trace_last(t)


class TestQuasiAcyclicity:
    def test_five_state_machine(self):
        assert safe_one_automaton().is_quasi_acyclic()

    def test_two_cycle(self):
        a = Automaton(
            bits=0, states=("q1", "q2"), init={"": "q1"}, accepting=frozenset(),
            rules={
                "q1": (TransitionRule(ELSE, "q2"),),
                "q2": (TransitionRule(ELSE, "q1"),),
            },
        )
        assert not a.is_quasi_acyclic()

    def test_self_loop_only(self):
        assert tiny().is_quasi_acyclic()

    def test_enumeration_guard(self):
        n = 21
        states = tuple(f"s{i}" for i in range(n))
        a = Automaton(
            bits=0, states=states, init={"": "s0"}, accepting=frozenset(),
            rules={q: (TransitionRule(ELSE, q),) for q in states},
        )
        with pytest.raises(AutomatonTooLarge):
            a.is_quasi_acyclic()


class TestTraces:
    def test_single_state(self):
        assert tiny().traces() == {("q",)}

    def test_else_chain(self):
        a = Automaton(
            bits=0, states=("q1", "q2"), init={"": "q1"}, accepting=frozenset(),
            rules={
                "q1": (TransitionRule(ELSE, "q2"),),
                "q2": (TransitionRule(ELSE, "q2"),),
            },
        )
        assert a.traces() == {("q1",), ("q2",), ("q1", "q2")}

    def test_five_state_machine(self):
        ts = safe_one_automaton().traces()
        assert ("q2", "q4", "q5") in ts
        assert ("q1", "q5") in ts
        assert len(ts) == 15
        assert all(("q" + str(i),) in ts for i in range(1, 6))

    def test_infinite_trace_set_rejected(self):
        a = Automaton(
            bits=0, states=("q1", "q2"), init={"": "q1"}, accepting=frozenset(),
            rules={
                "q1": (TransitionRule(ELSE, "q2"),),
                "q2": (TransitionRule(ELSE, "q1"),),
            },
        )
        with pytest.raises(NotQuasiAcyclic):
            a.traces()

    @given(automata(max_states=4, bits=1, quasi_acyclic=True))
    @settings(max_examples=30)
    def test_every_trace_satisfies_the_invariants(self, a):
        ts = a.traces()
        assert all(a.is_trace(t) for t in ts)
        assert all((q,) in ts for q in a.states)

    def test_probe_trace_count(self):
        assert len(sync_probe_automaton().traces()) == 5
