"""Envy graphs, desire graphs, fairness predicates and cycle extraction."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import networkx as nx

from .core import (
    AgentId,
    CapabilityError,
    Ledger,
    MatchHistory,
    Side,
    UsageError,
    ValuationOracle,
    validate_oracle,
)


@dataclass(frozen=True)
class EnvyGraph:
    side: Side
    succ: tuple[tuple[int, ...], ...]

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, out in enumerate(self.succ) for j in out]


def build_envy_graph(ledger: Ledger, side: Side) -> EnvyGraph:
    vals = ledger.values[side]
    k = len(vals)
    succ = tuple(tuple(j for j in range(k) if j != i and vals[i][j] > vals[i][i])
                 for i in range(k))
    return EnvyGraph(side, succ)


def has_envy_cycle(graph: EnvyGraph) -> list[int] | None:
    """Return a directed cycle ``[c0, c1, ...]`` (each envies the next, the
    last envies ``c0``) or ``None`` if the graph is acyclic.

    Depth-first search from the lowest index, neighbours in ascending order.
    """
    white, grey, black = 0, 1, 2
    colour = [white] * len(graph.succ)
    for root in range(len(graph.succ)):
        if colour[root] != white:
            continue
        path = [root]
        iters = [iter(graph.succ[root])]
        colour[root] = grey
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = black
                iters.pop()
            elif colour[nxt] == grey:
                return path[path.index(nxt):]
            elif colour[nxt] == white:
                colour[nxt] = grey
                path.append(nxt)
                iters.append(iter(graph.succ[nxt]))
    return None


def envy_cycle_free(ledger: Ledger) -> bool:
    return all(has_envy_cycle(build_envy_graph(ledger, side)) is None for side in Side)


@dataclass(frozen=True)
class BoundVerdict:
    ok: bool
    pair: tuple[Side, int, int] | None  # pair with the largest gap
    gap: Fraction


def is_c_envy_bounded(ledger: Ledger, c: Fraction | int) -> BoundVerdict:
    """Is ``v_i(X_j) - v_i(X_i) <= c`` for every same-side ordered pair?"""
    worst_gap, worst = Fraction(0), None
    for side in Side:
        vals = ledger.values[side]
        for i, row in enumerate(vals):
            own = row[i]
            for j, v in enumerate(row):
                if j != i and (worst is None or v - own > worst_gap):
                    worst_gap, worst = v - own, (side, i, j)
    return BoundVerdict(worst_gap <= c, worst, worst_gap)


@dataclass(frozen=True)
class EF1Verdict:
    ok: bool
    pair: tuple[Side, int, int] | None = None  # first (envier, envied) violating EF1


def is_ef1(ledger: Ledger) -> EF1Verdict:
    """Envy-free up to one match, on both sides.

    Removing the single occurrence that the envier values most is the best
    possible removal, so the ledger's ``top`` entries decide the verdict
    exactly, time-stamped values included.
    """
    for side in Side:
        vals, top = ledger.values[side], ledger.top[side]
        for i, row in enumerate(vals):
            own = row[i]
            for j, v in enumerate(row):
                if v > own and v - top[i][j] > own:
                    return EF1Verdict(False, (side, i, j))
    return EF1Verdict(True)


def _require_binary01(oracle: ValuationOracle, horizon: int) -> None:
    for t in range(1, max(horizon, 1) + 1):
        bad = validate_oracle(oracle, t, {"binary01"})
        if bad is not None:
            raise CapabilityError(f"oracle is not {{0,1}}-valued at t={t}: {bad.detail}")


def is_efx_binary01(history: MatchHistory, oracle: ValuationOracle) -> bool:
    """Envy-free up to any positively valued match, for {0,1} values.

    Evaluated directly from the history; callers compare it with
    :func:`is_ef1` to check that the two notions coincide.
    """
    _require_binary01(oracle, history.t)
    for side in Side:
        k = history.n if side is Side.N else history.m
        bundles = [history.bundle(AgentId(side, j)) for j in range(k)]
        for i in range(k):
            me = AgentId(side, i)

            def contributions(j: int) -> list[Fraction]:
                return [oracle.value(t, me, AgentId(side.other, p)) for t, p in bundles[j]]

            own = sum(contributions(i), Fraction(0))
            for j in range(k):
                if j == i:
                    continue
                theirs = contributions(j)
                total = sum(theirs, Fraction(0))
                if total <= own:
                    continue
                smallest = min(v for v in theirs if v > 0)
                if total - smallest > own:
                    return False
    return True


# --------------------------------------------------------------------------
# desire graph
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DesireGraph:
    """Undirected bipartite graph; ``edges[(i, j)]`` (N index, M index) is
    ``True`` when the edge is symmetric (both endpoints value the other at 1)."""

    n: int
    m: int
    edges: dict[tuple[int, int], bool]

    def neighbours(self) -> dict[tuple[str, int], list[tuple[str, int]]]:
        adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
        for i in range(self.n):
            adj[("N", i)] = []
        for j in range(self.m):
            adj[("M", j)] = []
        for i, j in self.edges:
            adj[("N", i)].append(("M", j))
            adj[("M", j)].append(("N", i))
        return adj


def build_desire_graph(oracle: ValuationOracle) -> DesireGraph:
    bad = validate_oracle(oracle, 1, {"static", "binary01"})
    if bad is not None:
        raise CapabilityError(f"desire graphs need static {{0,1}} values: {bad.detail}")
    vn, vm = oracle.cross(1)
    edges = {}
    for i in range(oracle.n):
        for j in range(oracle.m):
            if vn[i][j] + vm[j][i] >= 1:
                edges[(i, j)] = vn[i][j] == 1 and vm[j][i] == 1
    return DesireGraph(oracle.n, oracle.m, edges)


@dataclass(frozen=True)
class SymmetryVerdict:
    ok: bool
    witness: tuple[int, int] | None = None


def only_symmetric_cycles(graph: DesireGraph) -> SymmetryVerdict:
    """True iff every asymmetric edge is a bridge (an edge lies on a cycle
    exactly when it is not a bridge).  The witness is the smallest asymmetric
    edge that lies on a cycle."""
    g = nx.Graph()
    g.add_nodes_from(("N", i) for i in range(graph.n))
    g.add_nodes_from(("M", j) for j in range(graph.m))
    g.add_edges_from((("N", i), ("M", j)) for i, j in graph.edges)
    bridges = {frozenset(e) for e in nx.bridges(g)}
    for (i, j), symmetric in sorted(graph.edges.items()):
        if not symmetric and frozenset({("N", i), ("M", j)}) not in bridges:
            return SymmetryVerdict(False, (i, j))
    return SymmetryVerdict(True)


# --------------------------------------------------------------------------
# circuits
# --------------------------------------------------------------------------


def is_circuit(seq: Sequence[Hashable], has_edge: Callable[[Hashable, Hashable], bool]) -> bool:
    if len(seq) < 2:
        return False
    return all(seq[q] != seq[(q + 1) % len(seq)] and has_edge(seq[q], seq[(q + 1) % len(seq)])
               for q in range(len(seq)))


def is_cycle(seq: Sequence[Hashable], has_edge: Callable[[Hashable, Hashable], bool]) -> bool:
    return len(set(seq)) == len(seq) and is_circuit(seq, has_edge)


def find_cycle_in_circuit(circuit: Sequence[Hashable], i: Hashable,
                          index: int | None = None) -> list:
    """Extract a simple cycle through the edge ``(i, suc(i))`` of a circuit.

    ``index`` picks which occurrence of ``i`` is meant (default: the first);
    ``suc(i)`` is the vertex that follows that occurrence.  The result starts
    at ``suc(i)`` and ends at ``i``.  Works for any graph without self-loops;
    for an undirected graph encoded as edge pairs a result of length 2 is one
    edge walked both ways.
    """
    circuit = list(circuit)
    if len(circuit) < 2:
        raise UsageError("a circuit has at least two vertices")
    if index is None:
        if i not in circuit:
            raise UsageError(f"{i!r} is not on the circuit")
        index = circuit.index(i)
    elif circuit[index] != i:
        raise UsageError(f"circuit[{index}] is not {i!r}")
    # rotate so that i sits last and suc(i) first
    d = circuit[index + 1:] + circuit[:index + 1]
    while True:
        first_seen: dict[Hashable, int] = {}
        repeat = None
        for k, u in enumerate(d):
            if u in first_seen:
                repeat = (first_seen[u], k)
                break
            first_seen[u] = k
        if repeat is None:
            return d
        j, k = repeat
        # drop u_{j+1} .. u_k; d[0] is never removed and d[-1] is replaced by
        # an equal vertex when k is last
        d = d[:j + 1] + d[k + 1:]
