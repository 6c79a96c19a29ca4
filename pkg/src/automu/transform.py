"""Translations between fixpoint systems and distributed automata.

Upward (``formula_to_automaton``): flatten the system so every modal operator
applies directly to a variable, then build a powerset-state automaton whose
states are the sets of atomic propositions (label constants and variables)
already verified at a node.  A transition adds exactly the variables whose
bodies hold shallowly of the current state and neighborhood, so states only
grow along transitions and the result is quasi-acyclic by construction.

Downward (``automaton_to_formula``): introduce one variable per trace of a
quasi-acyclic automaton and encode which sets of neighbor traces can drive a
node along each trace.  ``compute_enables`` is the inductive closure of that
driving relation over all of P(traces); for the formula itself a restricted
closure is used (neighborhoods drawn from initialization-reachable traces)
and its per-trace families are pruned by a prefix-subsumption rule, both of
which preserve the defined property while keeping the formula small enough to
evaluate.  The construction assumes the input automaton's acceptance behavior
is independent of lossless-asynchronous timing; that hypothesis is not
checkable here and is taken on trust.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .automata import (
    ELSE,
    AndGuard,
    Automaton,
    AutomatonTooLarge,
    SubsetEq,
    SupsetEq,
    Trace,
    TransitionRule,
    trace_pushlast,
)
from .logic import (
    And,
    Box,
    Const,
    Dia,
    FalseF,
    Formula,
    MuSystem,
    NegConst,
    Or,
    TrueF,
    Var,
)


class SizeGuardExceeded(ValueError):
    """A construction would exceed its state-space or rule-table guard."""


MAX_ATOMS = 16          # powerset construction guard: constants + variables
MAX_RULE_TABLE = 1 << 22  # total emitted rules across all states
MAX_ENABLES_TRACES = 12   # full closure guard: trace count


class NotFlattened(ValueError):
    """shallow evaluation was asked of a formula whose modal arguments are not
    plain variables."""


# ---------------------------------------------------------------------------
# flattening

def flatten(sys: MuSystem) -> MuSystem:
    """Equivalent system in which every modal operator is applied directly to
    a variable: each offending modal argument is moved into a fresh variable
    of its own.  The first variable keeps its position."""
    used = set(sys.vars)
    counter = 0

    def fresh() -> str:
        nonlocal counter
        while f"Y{counter}" in used:
            counter += 1
        name = f"Y{counter}"
        used.add(name)
        return name

    queue: deque[tuple[str, Formula]] = deque(zip(sys.vars, sys.bodies))
    names: list[str] = []
    bodies: list[Formula] = []

    def rewrite(f: Formula) -> Formula:
        if isinstance(f, Or):
            return Or(rewrite(f.left), rewrite(f.right))
        if isinstance(f, And):
            return And(rewrite(f.left), rewrite(f.right))
        if isinstance(f, (Dia, Box)):
            if isinstance(f.inner, Var):
                return f
            y = fresh()
            queue.append((y, f.inner))
            return Dia(Var(y)) if isinstance(f, Dia) else Box(Var(y))
        return f

    while queue:
        name, body = queue.popleft()
        names.append(name)
        bodies.append(rewrite(body))
    return MuSystem(bits=sys.bits, vars=tuple(names), bodies=tuple(bodies))


def shallow_sat(f: Formula, q: Iterable[str], s: Iterable[Iterable[str]]) -> bool:
    """Evaluate a flattened formula against an abstract point: atoms are read
    from membership in ``q``, a diamond over variable X asks for some member
    of ``s`` containing X, a box for all members containing X.  Constants are
    written ``p<i>``."""
    atoms = frozenset(q)
    neighborhood = [frozenset(m) for m in s]

    def sat(f: Formula) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Const):
            return f"p{f.index}" in atoms
        if isinstance(f, NegConst):
            return f"p{f.index}" not in atoms
        if isinstance(f, Var):
            return f.name in atoms
        if isinstance(f, Or):
            return sat(f.left) or sat(f.right)
        if isinstance(f, And):
            return sat(f.left) and sat(f.right)
        if isinstance(f, (Dia, Box)):
            if not isinstance(f.inner, Var):
                raise NotFlattened(f"modal argument is not a variable: {f.inner!r}")
            name = f.inner.name
            if isinstance(f, Dia):
                return any(name in m for m in neighborhood)
            return all(name in m for m in neighborhood)
        raise TypeError(f"not a formula: {f!r}")

    return sat(f)


# ---------------------------------------------------------------------------
# formula -> automaton

_P_TOKEN = re.compile(r"^p\d+$")


def formula_to_automaton(sys: MuSystem) -> Automaton:
    """Powerset-state automaton equivalent to the system.

    States are subsets of {p0..p_{bits-1}} plus the (flattened) variables;
    a node's state records which of those atoms have been verified at it so
    far.  Initialization keeps the label constants; a transition on
    neighborhood S adds every variable whose body holds shallowly of
    (state, S); accepting states are those containing the first variable.
    Transition rules are emitted as an exact-match table over the subsets of
    initialization-reachable states, with a self-loop fallback for
    neighborhoods that cannot occur in any run.
    """
    flat = flatten(sys)
    if any(_P_TOKEN.match(x) for x in flat.vars):
        # variable names of the form p<digits> would collide with constant
        # atoms inside states; rename them (names carry no meaning)
        taken = set(flat.vars)
        renames: dict[str, str] = {}
        for x in flat.vars:
            if _P_TOKEN.match(x):
                i = 0
                while f"V{i}" in taken:
                    i += 1
                renames[x] = f"V{i}"
                taken.add(f"V{i}")

        def rn(f: Formula) -> Formula:
            if isinstance(f, Var):
                return Var(renames.get(f.name, f.name))
            if isinstance(f, Or):
                return Or(rn(f.left), rn(f.right))
            if isinstance(f, And):
                return And(rn(f.left), rn(f.right))
            if isinstance(f, Dia):
                return Dia(rn(f.inner))
            if isinstance(f, Box):
                return Box(rn(f.inner))
            return f

        flat = MuSystem(
            bits=flat.bits,
            vars=tuple(renames.get(x, x) for x in flat.vars),
            bodies=tuple(rn(b) for b in flat.bodies),
        )

    consts = [f"p{i}" for i in range(flat.bits)]
    atoms = consts + list(flat.vars)
    if len(atoms) > MAX_ATOMS:
        raise SizeGuardExceeded(
            f"powerset construction over {len(atoms)} atoms exceeds the guard of {MAX_ATOMS}"
        )
    order = {t: i for i, t in enumerate(atoms)}

    def state_id(subset: frozenset[str]) -> str:
        return "{" + ",".join(sorted(subset, key=order.__getitem__)) + "}"

    subsets = [
        frozenset(t for i, t in enumerate(atoms) if mask >> i & 1)
        for mask in range(1 << len(atoms))
    ]

    def step(qset: frozenset[str], neighborhood: frozenset[frozenset[str]]) -> frozenset[str]:
        return qset | {
            x for x, body in zip(flat.vars, flat.bodies) if shallow_sat(body, qset, neighborhood)
        }

    init_sets = {
        w: frozenset(f"p{i}" for i, c in enumerate(w) if c == "1")
        for w in ("".join(t) for t in itertools.product("01", repeat=flat.bits))
    }

    # close the initialization-reachable states under transitions whose
    # neighborhoods are themselves drawn from reachable states
    reachable: set[frozenset[str]] = set(init_sets.values())
    while True:
        pool = sorted(reachable, key=state_id)
        if (1 << len(pool)) * len(subsets) > MAX_RULE_TABLE:
            raise SizeGuardExceeded(
                f"{len(pool)} reachable states would need a rule table beyond {MAX_RULE_TABLE} entries"
            )
        added = False
        for q in pool:
            for r in range(1 << len(pool)):
                hood = frozenset(p for i, p in enumerate(pool) if r >> i & 1)
                q2 = step(q, hood)
                if q2 not in reachable:
                    reachable.add(q2)
                    added = True
        if not added:
            break

    reach_sorted = sorted(reachable, key=state_id)
    total_rules = (1 << len(reach_sorted)) * len(subsets)
    if total_rules > MAX_RULE_TABLE:
        raise SizeGuardExceeded(
            f"rule table of {total_rules} entries exceeds the guard of {MAX_RULE_TABLE}"
        )

    hoods = [
        frozenset(p for i, p in enumerate(reach_sorted) if r >> i & 1)
        for r in range(1 << len(reach_sorted))
    ]
    hoods.sort(key=lambda h: (len(h), sorted(state_id(x) for x in h)))

    rules: dict[str, tuple[TransitionRule, ...]] = {}
    for q in subsets:
        lst = []
        for hood in hoods:
            ids = frozenset(state_id(x) for x in hood)
            target = step(q, hood)
            assert q <= target  # growth is what makes the result quasi-acyclic
            lst.append(TransitionRule(AndGuard((SubsetEq(ids), SupsetEq(ids))), state_id(target)))
        lst.append(TransitionRule(ELSE, state_id(q)))
        rules[state_id(q)] = tuple(lst)

    out = Automaton(
        bits=flat.bits,
        states=tuple(state_id(q) for q in subsets),
        init={w: state_id(s) for w, s in init_sets.items()},
        rules=rules,
        accepting=frozenset(state_id(q) for q in subsets if flat.vars[0] in q),
    )
    if len(out.states) <= 20:
        assert out.is_quasi_acyclic()
    return out


# ---------------------------------------------------------------------------
# the trace-driving relation

@dataclass(frozen=True)
class EnablesSet:
    """Closure of the driving relation: (H, t) means a node starting at
    t's first state can traverse t while seeing its incoming neighbors
    traverse exactly the traces in H."""

    pairs: frozenset[tuple[frozenset[Trace], Trace]]
    iterations_used: int

    def enablers_of(self, t: Trace) -> frozenset[frozenset[Trace]]:
        return frozenset(h for h, t2 in self.pairs if t2 == t)


def _extension_choices(
    ext: Mapping[Trace, tuple[Trace, ...]], h: frozenset[Trace]
) -> list[tuple[frozenset[Trace], frozenset[str]]]:
    """All sets obtainable by replacing every trace in ``h`` with a nonempty
    set of its one-step extensions (keeping the trace counts as extending by
    its own last state).  Distinct neighbor nodes sharing a trace may diverge,
    hence set-of-extensions rather than one extension per trace.  Returns each
    result with its set of last states; the empty set extends only to itself."""
    per: list[list[tuple[Trace, ...]]] = []
    for t in sorted(h):
        choices = ext[t]
        per.append([
            tuple(c for i, c in enumerate(choices) if r >> i & 1)
            for r in range(1, 1 << len(choices))
        ])
    out: dict[frozenset[Trace], frozenset[str]] = {}
    for combo in itertools.product(*per):
        h2 = frozenset(t for group in combo for t in group)
        if h2 not in out:
            out[h2] = frozenset(t[-1] for t in h2)
    return sorted(out.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))


def compute_enables(a: Automaton, max_rounds: int | None = None,
                    max_traces: int = MAX_ENABLES_TRACES) -> EnablesSet:
    """Inductive closure of the driving relation over all of P(traces).

    Seeds: for every state q and every subset N of states (as length-1
    traces, including the empty set), N drives q extended by delta(q, N).
    Step: from a known pair (H, t), every H' obtainable by extending the
    members of H by at most one state apiece drives t extended by
    delta(t's last, last states of H').  Iterates to a fixpoint, FIFO order;
    ``iterations_used`` counts pairs processed and is bounded by
    |traces| * 2^|traces|.

    The closure is exponential in the trace count; ``max_traces`` guards it.
    ``max_rounds`` limits derivation depth (round 0 = seeds only), which
    yields a sound under-approximation for inspecting large automata.
    """
    traces = a.traces()  # raises NotQuasiAcyclic on infinite trace sets
    if len(traces) > max_traces and max_rounds is None:
        raise AutomatonTooLarge(
            f"full closure over {len(traces)} traces (up to |T|*2^|T| pairs) exceeds "
            f"the guard of {max_traces}; pass max_rounds for a bounded under-approximation"
        )
    ext: dict[Trace, tuple[Trace, ...]] = {}
    for t in traces:
        more = tuple(sorted(t2 for t2 in traces if len(t2) == len(t) + 1 and t2[:-1] == t))
        ext[t] = (t,) + more

    seen: set[tuple[frozenset[Trace], Trace]] = set()
    frontier: deque[tuple[frozenset[Trace], Trace]] = deque()

    def add(pair: tuple[frozenset[Trace], Trace], out: deque) -> None:
        if pair not in seen:
            seen.add(pair)
            out.append(pair)

    states = a.states
    for mask in range(1 << len(states)):
        n = frozenset(s for i, s in enumerate(states) if mask >> i & 1)
        h = frozenset((q,) for q in n)
        for q in states:
            add((h, trace_pushlast((q,), a.delta(q, n))), frontier)

    iterations = 0
    rounds = 0
    choice_memo: dict[frozenset[Trace], list] = {}
    while frontier and (max_rounds is None or rounds < max_rounds):
        rounds += 1
        next_frontier: deque[tuple[frozenset[Trace], Trace]] = deque()
        while frontier:
            h, t = frontier.popleft()
            iterations += 1
            if h not in choice_memo:
                choice_memo[h] = _extension_choices(ext, h)
            for h2, lasts in choice_memo[h]:
                add((h2, trace_pushlast(t, a.delta(t[-1], lasts))), next_frontier)
        frontier = next_frontier
    return EnablesSet(pairs=frozenset(seen), iterations_used=iterations)


# ---------------------------------------------------------------------------
# automaton -> formula

def _is_prefix(a: Trace, b: Trace) -> bool:
    return len(a) <= len(b) and b[: len(a)] == a


def _covers(small: frozenset[Trace], big: frozenset[Trace]) -> bool:
    """Prefix subsumption: every member of ``small`` is a prefix of some
    member of ``big`` and every member of ``big`` extends some member of
    ``small``.  Under any valuation in which a trace's set is contained in
    each of its prefixes' sets, the neighborhood described by ``big`` also
    matches the (weaker) description by ``small``."""
    return all(any(_is_prefix(x, y) for y in big) for x in small) and all(
        any(_is_prefix(x, y) for x in small) for y in big
    )


def _driver_closure(a: Automaton) -> dict[Trace, list[frozenset[Trace]]]:
    """Driving pairs restricted to what runs started from initialization can
    exhibit: node and neighbor traces begin at initialization states, and
    neighborhoods draw on reachable traces only.  Every produced pair belongs
    to the full closure; conversely every neighbor-trace set arising in a
    synchronous run (on any digraph) is produced, which is exactly what the
    formula construction needs."""
    init_states = sorted(set(a.init.values()))

    # traces reachable from initialization, closing neighborhoods over the
    # last states of what is reachable so far
    reach: set[Trace] = {(q,) for q in init_states}
    while True:
        lasts = sorted({t[-1] for t in reach})
        nexts: dict[str, set[str]] = {}
        for q in lasts:
            nexts[q] = set()
            for mask in range(1 << len(lasts)):
                n = frozenset(s for i, s in enumerate(lasts) if mask >> i & 1)
                nexts[q].add(a.delta(q, n))
        grown = set(reach)
        for t in reach:
            for q2 in nexts[t[-1]]:
                if q2 != t[-1]:
                    grown.add(t + (q2,))
        if grown == reach:
            break
        reach = grown

    ext: dict[Trace, tuple[Trace, ...]] = {}
    lasts = sorted({t[-1] for t in reach})
    nexts = {}
    for q in lasts:
        nexts[q] = set()
        for mask in range(1 << len(lasts)):
            n = frozenset(s for i, s in enumerate(lasts) if mask >> i & 1)
            nexts[q].add(a.delta(q, n))
    for t in reach:
        more = tuple(sorted(t + (q2,) for q2 in nexts[t[-1]] if q2 != t[-1] and t + (q2,) in reach))
        ext[t] = (t,) + more

    seen: set[tuple[frozenset[Trace], Trace]] = set()
    work: deque[tuple[frozenset[Trace], Trace]] = deque()

    def add(pair: tuple[frozenset[Trace], Trace]) -> None:
        if pair not in seen:
            seen.add(pair)
            work.append(pair)

    for mask in range(1 << len(init_states)):
        n = frozenset(s for i, s in enumerate(init_states) if mask >> i & 1)
        h = frozenset((q,) for q in n)
        for q in init_states:
            add((h, trace_pushlast((q,), a.delta(q, n))))

    choice_memo: dict[frozenset[Trace], list] = {}
    while work:
        h, t = work.popleft()
        if h not in choice_memo:
            choice_memo[h] = _extension_choices(ext, h)
        for h2, last_states in choice_memo[h]:
            add((h2, trace_pushlast(t, a.delta(t[-1], last_states))))

    families: dict[Trace, list[frozenset[Trace]]] = {}
    for h, t in seen:
        families.setdefault(t, []).append(h)
    return families


def _prune_family(family: list[frozenset[Trace]]) -> list[frozenset[Trace]]:
    """Keep only subsumption-minimal neighborhood descriptions; dropped
    members are implied by a kept one wherever they hold."""
    ordered = sorted(set(family), key=lambda h: (len(h), sorted(h)))
    kept: list[frozenset[Trace]] = []
    for h in ordered:
        if any(_covers(k, h) for k in kept):
            continue
        kept = [k for k in kept if not _covers(h, k)]
        kept.append(h)
    return kept


def _or_all(parts: list[Formula]) -> Formula:
    if not parts:
        return FalseF()
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def _and_all(parts: list[Formula]) -> Formula:
    if not parts:
        return TrueF()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _trace_var_names(traces: list[Trace]) -> dict[Trace, str]:
    names: dict[Trace, str] = {}
    taken = {"X0"}
    for t in traces:
        base = "T_" + "_".join(re.sub(r"[^0-9A-Za-z]", "", s) or "s" for s in t)
        name = base
        k = 1
        while name in taken:
            name = f"{base}_{k}"
            k += 1
        names[t] = name
        taken.add(name)
    return names


def automaton_to_formula(a: Automaton) -> MuSystem:
    """Fixpoint system equivalent to a quasi-acyclic automaton whose behavior
    does not depend on lossless-asynchronous timing.

    One variable per trace plus a lead acceptance variable.  The lead variable
    collects every trace ending in an accepting state; a length-1 trace holds
    where the node's label initializes to that state; a longer trace holds
    where the node initializes to its first state and some recorded
    neighborhood description matches: every listed neighbor trace is
    witnessed by an incoming neighbor and every incoming neighbor matches a
    listed trace (an empty description requires in-degree 0).
    """
    traces = sorted(a.traces(), key=lambda t: (len(t), t))
    names = _trace_var_names(traces)
    families = {t: _prune_family(f) for t, f in _driver_closure(a).items()}

    head = _or_all([Var(names[t]) for t in traces if t[-1] in a.accepting])

    bodies: list[Formula] = [head]
    for t in traces:
        if len(t) == 1:
            words = sorted(w for w, q in a.init.items() if q == t[0])
            body = _or_all([
                _and_all([Const(i) if w[i] == "1" else NegConst(i) for i in range(a.bits)])
                for w in words
            ])
        else:
            options = []
            for h in families.get(t, []):
                members = sorted(h)
                options.append(_and_all(
                    [Dia(Var(names[m])) for m in members]
                    + [Box(_or_all([Var(names[m]) for m in members]))]
                ))
            body = And(Var(names[(t[0],)]), _or_all(options))
        bodies.append(body)

    return MuSystem(bits=a.bits, vars=("X0", *(names[t] for t in traces)), bodies=tuple(bodies))
