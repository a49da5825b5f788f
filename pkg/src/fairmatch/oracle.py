"""Brute-force verifiers and exhaustive searches.

Nothing here calls an engine.  Trace verification keeps its own running sums
(separate from :class:`fairmatch.core.Ledger`) so that engine bookkeeping and
verification never share a code path.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .core import (
    AgentId,
    MatchHistory,
    Pair,
    ShapeError,
    Side,
    UsageError,
    ValuationOracle,
    format_rational,
)
from .envy import EnvyGraph, has_envy_cycle
from .matching import (
    brute_force_max_weight,
    enumerate_perfect_matchings,
    matching_weight,
    max_weight_matching_general,
    round_weights,
)
from .trace import ENGINE_MODES, Trace

SEARCH_MAX_N = 4
SEARCH_MAX_T = 8


# --------------------------------------------------------------------------
# definitional helpers
# --------------------------------------------------------------------------


def bundle_value(history: MatchHistory, oracle: ValuationOracle, i: AgentId, j: AgentId) -> Fraction:
    """``v_i(X_j^t)`` summed straight from the history."""
    if i.side != j.side:
        raise UsageError("same-side agents only")
    return sum((oracle.value(t, i, AgentId(j.side.other, p)) for t, p in history.bundle(j)),
               Fraction(0))


def ef1_from_definition(history: MatchHistory, oracle: ValuationOracle) -> bool:
    """EF1 by trying every single removal from every envied bundle."""
    for side in Side:
        k = history.n if side is Side.N else history.m
        for i in range(k):
            me = AgentId(side, i)
            own = bundle_value(history, oracle, me, me)
            for j in range(k):
                if j == i:
                    continue
                contribs = [oracle.value(t, me, AgentId(side.other, p))
                            for t, p in history.bundle(AgentId(side, j))]
                total = sum(contribs, Fraction(0))
                if total > own and not any(total - c <= own for c in contribs):
                    return False
    return True


def simple_cycles_directed(vertices: Sequence[Hashable],
                           has_edge: Callable[[Hashable, Hashable], bool]) -> set[tuple]:
    """Every simple directed cycle of length >= 2, each rotated so that its
    smallest-position vertex comes first."""
    order = {v: k for k, v in enumerate(vertices)}
    found: set[tuple] = set()

    def extend(path: list) -> None:
        start, last = path[0], path[-1]
        for v in vertices:
            if not has_edge(last, v):
                continue
            if v == start and len(path) >= 2:
                found.add(tuple(path))
            elif v not in path and order[v] > order[start]:
                path.append(v)
                extend(path)
                path.pop()

    for s in vertices:
        extend([s])
    return found


def canonical_cycle(cycle: Sequence[Hashable], vertices: Sequence[Hashable]) -> tuple:
    order = {v: k for k, v in enumerate(vertices)}
    k = min(range(len(cycle)), key=lambda q: order[cycle[q]])
    return tuple(cycle[k:]) + tuple(cycle[:k])


def simple_cycles_undirected(adj: dict[Hashable, Iterable[Hashable]]) -> list[list]:
    """Every simple cycle (length >= 3) of an undirected graph, each once."""
    vertices = sorted(adj)
    order = {v: k for k, v in enumerate(vertices)}
    nbrs = {v: sorted(adj[v], key=order.__getitem__) for v in vertices}
    cycles = []

    def extend(path: list) -> None:
        start, last = path[0], path[-1]
        for v in nbrs[last]:
            if v == start and len(path) >= 3 and order[path[1]] < order[path[-1]]:
                cycles.append(list(path))
            elif v not in path and order[v] > order[start]:
                path.append(v)
                extend(path)
                path.pop()

    for s in vertices:
        extend([s])
    return cycles


# --------------------------------------------------------------------------
# independent replay
# --------------------------------------------------------------------------


class _Replay:
    """Cumulative values plus the two largest single contributions per pair.

    Everything is stored as integers over one common denominator ``scale``,
    which grows (with an exact rescale of the stored sums) whenever a
    timestep brings values with a new denominator.
    """

    def __init__(self, oracle: ValuationOracle):
        self.oracle = oracle
        self.t = 0
        self.scale = 1
        self.k = {Side.N: oracle.n, Side.M: oracle.m}
        self.val = {s: [[0] * k for _ in range(k)] for s, k in self.k.items()}
        self.best = {s: [[(0, 0)] * k for _ in range(k)] for s, k in self.k.items()}
        self._ints: dict[int, tuple[object, int, list[list[int]]]] = {}

    def copy(self) -> _Replay:
        new = _Replay.__new__(_Replay)
        new.oracle, new.t, new.scale, new.k, new._ints = (
            self.oracle, self.t, self.scale, self.k, self._ints)
        new.val = {s: [r[:] for r in rows] for s, rows in self.val.items()}
        new.best = {s: [r[:] for r in rows] for s, rows in self.best.items()}
        return new

    def _integer_matrix(self, t: int) -> tuple[int, list[list[int]]]:
        mat = self.oracle.matrix(t)
        hit = self._ints.get(id(mat))
        if hit is None or hit[0] is not mat:
            den = 1
            for row in mat:
                for v in row:
                    den = math.lcm(den, v.denominator)
            ints = [[v.numerator * (den // v.denominator) for v in row] for row in mat]
            hit = self._ints[id(mat)] = (mat, den, ints)
        return hit[1], hit[2]

    def _rescale(self, den: int) -> None:
        if self.scale % den == 0:
            return
        new = math.lcm(self.scale, den)
        f = new // self.scale
        for s in self.k:
            self.val[s] = [[v * f for v in row] for row in self.val[s]]
            self.best[s] = [[(b1 * f, b2 * f) for b1, b2 in row] for row in self.best[s]]
        self.scale = new

    def add(self, t: int, pairs: Iterable[Pair]) -> None:
        den, mat = self._integer_matrix(t)
        self._rescale(den)
        f = self.scale // den
        n = self.oracle.n
        for p, q in pairs:
            for side, owner, partner_gid in ((Side.N, p, n + q), (Side.M, q, p)):
                base = 0 if side is Side.N else n
                val, best = self.val[side], self.best[side]
                for i in range(self.k[side]):
                    c = mat[base + i][partner_gid] * f
                    val[i][owner] += c
                    b1, b2 = best[i][owner]
                    if c > b1:
                        best[i][owner] = (c, b1)
                    elif c > b2:
                        best[i][owner] = (b1, c)
        self.t = t

    def value(self, side: Side, i: int, j: int) -> Fraction:
        """``v_i(X_j)`` as an exact rational."""
        return Fraction(self.val[side][i][j], self.scale)

    def gap(self, side: Side, i: int, j: int) -> Fraction:
        return Fraction(self.val[side][i][j] - self.val[side][i][i], self.scale)

    def pairs(self) -> Iterator[tuple[Side, int, int]]:
        for side in Side:
            for i in range(self.k[side]):
                for j in range(self.k[side]):
                    if i != j:
                        yield side, i, j

    def first_unremovable(self, removals: int) -> tuple[Side, int, int] | None:
        """First envying pair whose envy survives removing ``removals`` matches."""
        for side in Side:
            val, best = self.val[side], self.best[side]
            for i in range(self.k[side]):
                row, own = val[i], val[i][i]
                for j in range(self.k[side]):
                    g = row[j] - own
                    if g > 0 and i != j and g - sum(best[i][j][:removals]) > 0:
                        return side, i, j
        return None

    def worst_gap(self) -> tuple[Fraction, tuple[Side, int, int] | None]:
        worst, where = 0, None
        for side, i, j in self.pairs():
            g = self.val[side][i][j] - self.val[side][i][i]
            if where is None or g > worst:
                worst, where = g, (side, i, j)
        return Fraction(worst, self.scale), where

    def envy_cycle(self) -> tuple[Side, list[int]] | None:
        for side in Side:
            k, val = self.k[side], self.val[side]
            succ = tuple(tuple(j for j in range(k) if j != i and val[i][j] > val[i][i])
                         for i in range(k))
            cycle = has_envy_cycle(EnvyGraph(side, succ))
            if cycle is not None:
                return side, cycle
        return None

    def dump(self) -> dict:
        return {"t": self.t,
                "values": {s.value: [[format_rational(Fraction(v, self.scale)) for v in row]
                                     for row in rows]
                           for s, rows in self.val.items()}}


# --------------------------------------------------------------------------
# trace verification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Failure:
    t: int
    check: str
    detail: str
    pair: tuple | None = None
    state: dict | None = None

    def __str__(self) -> str:
        where = ""
        if self.pair is not None:
            side, i, j = self.pair
            where = f" pair ({side.value}{i}, {side.value}{j})"
        return f"t={self.t}: {self.check} failed{where}: {self.detail}"


@dataclass
class VerifyReport:
    ok: bool
    steps: int
    failure: Failure | None = None
    checks: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        if self.ok:
            return f"PASS: {self.steps} steps verified ({', '.join(self.checks)})"
        return f"FAIL: {self.failure}"


def _shape_problem(pairs: Sequence[Pair], n: int, m: int, mode: str) -> str | None:
    seen_n, seen_m = set(), set()
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < m):
            return f"pair ({i}, {j}) names an unknown agent"
        if i in seen_n or j in seen_m:
            return f"agent matched twice in ({i}, {j})"
        seen_n.add(i)
        seen_m.add(j)
    if mode == "rounds" and (n != m or len(pairs) != n):
        return f"{len(pairs)} matches do not form a perfect matching"
    if mode == "time" and len(pairs) > 1:
        return f"{len(pairs)} matches in one timestep"
    return None


def verify_trace(oracle: ValuationOracle, trace: Trace, mode: str,
                 a_sweep: Sequence[Fraction] = ()) -> VerifyReport:
    """Replay ``trace`` against ``oracle`` from scratch and check every step.

    Always: consecutive timesteps, per-mode shape, EF1 on both sides.
    ``sym-bin`` traces: maximum weight against the exact solver, recorded
    weight, (1 - a)-envy-boundedness (also for every ``a`` in ``a_sweep``,
    with dislikes revalued) and no envy cycles.  ``asym-cycles``: 1-bounded and
    no envy cycles.  ``round-robin``: exact envy-freeness every 2m steps.

    Raises :class:`ShapeError` when the trace is for another mode or market.
    """
    header = trace.header
    if header.mode != mode:
        raise ShapeError(f"trace is in {header.mode} mode, verification asked for {mode}")
    if (header.n, header.m) != (oracle.n, oracle.m):
        raise ShapeError(f"trace is for a {header.n}x{header.m} market, instance is "
                         f"{oracle.n}x{oracle.m}")
    engine = header.engine
    if engine in ENGINE_MODES and ENGINE_MODES[engine] != mode:
        raise ShapeError(f"{engine} traces are in {ENGINE_MODES[engine]} mode")

    checks = ["timesteps", "shape", "ef1"]
    sweep = []
    if engine == "sym-bin":
        checks += ["max-weight", "envy-bounded", "envy-cycle-free"]
        from .gen import with_dislike_value

        for a in a_sweep:
            sweep.append((Fraction(a), _Replay(with_dislike_value(oracle, a))))
        if sweep:
            checks.append("a-sweep " + ",".join(format_rational(a) for a, _ in sweep))
    elif engine == "asym-cycles":
        checks += ["1-bounded", "envy-cycle-free"]
    elif engine == "round-robin":
        checks += ["stage-envy-free"]

    state = _Replay(oracle)
    n, m = oracle.n, oracle.m

    def fail(t: int, check: str, detail: str, pair=None) -> VerifyReport:
        return VerifyReport(False, t - 1, Failure(t, check, detail, pair, state.dump()), checks)

    for expected_t, rec in enumerate(trace.records, start=1):
        t = rec.t
        if t != expected_t:
            return fail(expected_t, "timesteps", f"record has t={t}, expected {expected_t}")
        problem = _shape_problem(rec.matches, n, m, mode)
        if problem:
            return fail(t, "shape", problem)
        state.add(t, rec.matches)

        bad = state.first_unremovable(1)
        if bad is not None:
            side, i, j = bad
            return fail(t, "ef1", f"envy of {format_rational(state.gap(side, i, j))} survives "
                                  "every single removal", bad)

        if engine == "sym-bin":
            weights = round_weights(oracle, t)
            x = [0] * n
            for i, j in rec.matches:
                x[i] = j
            got = matching_weight(weights, x)
            _, best = max_weight_matching_general(weights)
            if got != best:
                return fail(t, "max-weight", f"weight {got} below optimum {best}")
            if rec.weight is not None and rec.weight != got:
                return fail(t, "max-weight", f"recorded weight {rec.weight} but matching weighs {got}")
            bound = 1 - oracle.a
            worst, where = state.worst_gap()
            if worst > bound:
                return fail(t, "envy-bounded", f"gap {worst} exceeds {bound}", where)
            for a, other in sweep:
                other.add(t, rec.matches)
                worst, where = other.worst_gap()
                if worst > 1 - a:
                    return fail(t, "envy-bounded", f"gap {worst} exceeds {1 - a} at a={a}", where)
            cyc = state.envy_cycle()
            if cyc is not None:
                return fail(t, "envy-cycle-free", f"envy cycle {cyc[1]} on side {cyc[0].value}")
        elif engine == "asym-cycles":
            worst, where = state.worst_gap()
            if worst > 1:
                return fail(t, "1-bounded", f"gap {worst} exceeds 1", where)
            cyc = state.envy_cycle()
            if cyc is not None:
                return fail(t, "envy-cycle-free", f"envy cycle {cyc[1]} on side {cyc[0].value}")
        elif engine == "round-robin" and t % (2 * m) == 0:
            worst, where = state.worst_gap()
            if worst > 0:
                return fail(t, "stage-envy-free", f"gap {worst} at a stage boundary", where)
    return VerifyReport(True, len(trace.records), None, checks)


# --------------------------------------------------------------------------
# EF2 over time
# --------------------------------------------------------------------------


@dataclass
class EF2Report:
    ok: bool
    rounds: int
    orders: int  # intra-round orders examined
    failure: Failure | None = None


def ef2_over_time_expansion(oracle: ValuationOracle, trace: Trace,
                            max_orders: int = 24, seed: int = 0) -> EF2Report:
    """Split every round into single matches and check EF2 after each one.

    All ``n!`` orders are examined when ``n! <= max_orders`` (so always for
    n <= 4 with the default), otherwise ``max_orders`` seeded random orders.
    The cumulative state after a prefix only depends on which matches it
    contains, so prefixes are checked once per subset.
    """
    if trace.header.mode != "rounds":
        raise ShapeError("EF2 expansion needs a rounds trace")
    rng = random.Random(seed)
    state = _Replay(oracle)
    orders_seen = 0
    for rec in trace.records:
        t = rec.t
        matches = list(rec.matches)
        k = len(matches)
        if len(matches) <= 8 and _factorial(k) <= max_orders:
            orders: Iterable[Sequence[int]] = itertools.permutations(range(k))
        else:
            orders = [rng.sample(range(k), k) for _ in range(max_orders)]
        checked: dict[frozenset, None] = {}
        for order in orders:
            orders_seen += 1
            taken: list[int] = []
            for idx in order:
                taken.append(idx)
                key = frozenset(taken)
                if key in checked:
                    continue
                checked[key] = None
                probe = state.copy()
                probe.add(t, [matches[q] for q in taken])
                bad = probe.first_unremovable(2)
                if bad is not None:
                    side, i, j = bad
                    return EF2Report(False, t - 1, orders_seen, Failure(
                        t, "ef2", f"after matches {[matches[q] for q in taken]} envy survives two "
                                  "removals", bad, probe.dump()))
        state.add(t, matches)
    return EF2Report(True, len(trace.records), orders_seen)


def _factorial(k: int) -> int:
    out = 1
    for q in range(2, k + 1):
        out *= q
    return out


# --------------------------------------------------------------------------
# exhaustive sequence search
# --------------------------------------------------------------------------


@dataclass
class SequenceSearchResult:
    exists: bool
    witness: list[tuple[int, ...]] | None
    explored: int  # prefixes evaluated, pruned ones included
    sequences: int  # full-horizon sequences evaluated
    horizon: int


def exhaustive_sequence_search(
    oracle: ValuationOracle,
    horizon: int,
    constraint: str = "any-perfect",
    prop: str = "ef1-each-round",
    visit: Callable[[int, _Replay, list[tuple[int, ...]]], None] | None = None,
) -> SequenceSearchResult:
    """Is there a sequence of perfect matchings keeping every round EF1?

    Depth-first over the per-round choices (``max-weight-only`` keeps only
    the round's maximum-weight matchings), pruning a prefix as soon as it is
    not EF1.  ``visit(t, state, prefix)`` sees every surviving prefix.
    """
    if prop != "ef1-each-round":
        raise UsageError(f"unknown property {prop!r}")
    if constraint not in ("any-perfect", "max-weight-only"):
        raise UsageError(f"unknown constraint {constraint!r}")
    n = oracle.n
    if n != oracle.m or n > SEARCH_MAX_N or not 1 <= horizon <= SEARCH_MAX_T:
        raise UsageError(f"search limited to n = m <= {SEARCH_MAX_N} and 1 <= T <= {SEARCH_MAX_T}")

    choices: dict[int, list[tuple[int, ...]]] = {}

    def options(t: int) -> list[tuple[int, ...]]:
        if t not in choices:
            allx = list(enumerate_perfect_matchings(n))
            if constraint == "max-weight-only":
                w = round_weights(oracle, t)
                best = brute_force_max_weight(w)
                allx = [x for x in allx if matching_weight(w, x) == best]
            choices[t] = allx
        return choices[t]

    explored = sequences = 0
    prefix: list[tuple[int, ...]] = []

    def dfs(state: _Replay, t: int) -> bool:
        nonlocal explored, sequences
        for x in options(t):
            explored += 1
            if t == horizon:
                sequences += 1
            nxt = state.copy()
            nxt.add(t, list(enumerate(x)))
            if nxt.first_unremovable(1) is not None:
                continue
            prefix.append(x)
            if visit is not None:
                visit(t, nxt, prefix)
            if t == horizon or dfs(nxt, t + 1):
                return True
            prefix.pop()
        return False

    found = dfs(_Replay(oracle), 1)
    return SequenceSearchResult(found, list(prefix) if found else None, explored, sequences, horizon)


# --------------------------------------------------------------------------
# impossibility reproductions
# --------------------------------------------------------------------------


@dataclass
class Theorem4Report:
    result: SequenceSearchResult
    sweep: dict[Fraction, bool]  # a -> exists, reported only
    ok: bool

    def lines(self) -> list[str]:
        r = self.result
        out = [f"dynamic binary 2x2 instance, horizon {r.horizon}, a = 0: "
               f"exists = {r.exists} ({r.sequences} sequences explored)"]
        out += [f"  a = {format_rational(a)}: exists = {v}" for a, v in self.sweep.items()]
        return out


def theorem4_reproduce(sweep: Sequence[Fraction] = (Fraction(1, 4), Fraction(1, 2))) -> Theorem4Report:
    from .fixtures import figure3
    from .gen import with_dislike_value

    base = figure3()
    result = exhaustive_sequence_search(base, 2, "any-perfect")
    swept = {Fraction(a): exhaustive_sequence_search(with_dislike_value(base, a), 2).exists
             for a in sweep}
    return Theorem4Report(result, swept, not result.exists)


@dataclass
class Theorem5Report:
    max_weight: Fraction
    constrained: SequenceSearchResult
    relaxed: SequenceSearchResult | None
    claims_checked: int
    claim_failures: list[str]
    ok: bool

    def lines(self) -> list[str]:
        c = self.constrained
        out = [f"static binary 3x3 instance, per-round maximum weight = {self.max_weight}",
               f"max-weight-only, horizon {c.horizon}: exists = {c.exists} "
               f"({c.explored} prefixes explored)",
               f"invariants on surviving prefixes at t in {{2, 4}}: {self.claims_checked} checked, "
               f"{len(self.claim_failures)} failed"]
        if self.relaxed is not None:
            r = self.relaxed
            out.append(f"any-perfect, horizon {r.horizon}: exists = {r.exists}")
            if r.witness:
                out.append("  witness: " + " | ".join(
                    " ".join(f"{2 * i + 1}-{2 * j + 2}" for i, j in enumerate(x)) for x in r.witness))
        return out


def theorem5_reproduce(include_relaxed: bool = True, horizon: int = 6) -> Theorem5Report:
    from .fixtures import figure4

    oracle = figure4()
    weights = {round_weights(oracle, t).w for t in range(1, horizon + 1)}
    best = brute_force_max_weight(round_weights(oracle, 1))
    assert len(weights) == 1
    checked, failures = 0, []
    n1, n3, n5 = 0, 1, 2  # drawing labels 1, 3, 5
    m4, m6 = 1, 2  # drawing labels 4, 6

    def visit(t: int, state: _Replay, prefix: list) -> None:
        nonlocal checked
        if t not in (2, 4):
            return
        checked += 1
        r = t // 2
        if state.value(Side.M, m4, m4) != state.value(Side.M, m4, m6):
            failures.append(f"t={t} {prefix}: v_4(X_4) != v_4(X_6)")
        total = state.gap(Side.N, n1, n5) + state.gap(Side.N, n3, n5)
        if total != r:
            failures.append(f"t={t} {prefix}: r-sum is {total}, expected {r}")

    constrained = exhaustive_sequence_search(oracle, horizon, "max-weight-only", visit=visit)
    relaxed = exhaustive_sequence_search(oracle, horizon, "any-perfect") if include_relaxed else None
    ok = (best == Fraction(3, 2) and not constrained.exists and not failures
          and (relaxed is None or relaxed.exists))
    return Theorem5Report(best, constrained, relaxed, checked, failures, ok)
