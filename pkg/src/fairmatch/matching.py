"""Round weights and maximum-weight perfect matchings between N and M.

A round matching is stored as a permutation tuple ``x`` with ``x[i]`` the M
agent matched to N agent ``i``.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .core import CapabilityError, Pair, UsageError, ValuationOracle, validate_oracle

RoundMatching = tuple[int, ...]

MAX_ENUMERATION = 8


@dataclass(frozen=True)
class RoundWeights:
    t: int
    w: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.w)


def round_weights(oracle: ValuationOracle, t: int) -> RoundWeights:
    """``w(i, j) = (v_i^t(j) + v_j^t(i)) / 2`` for a square market."""
    if oracle.n != oracle.m:
        raise UsageError(f"round weights need a square market, got {oracle.n}x{oracle.m}")
    vn, vm = oracle.cross(t)
    n = oracle.n
    w = tuple(tuple((vn[i][j] + vm[j][i]) / 2 for j in range(n)) for i in range(n))
    return RoundWeights(t, w)


def weights_from_matrix(w: Sequence[Sequence[Fraction | int]], t: int = 0) -> RoundWeights:
    rows = tuple(tuple(Fraction(v) for v in row) for row in w)
    if any(len(row) != len(rows) for row in rows):
        raise UsageError("weight matrix must be square")
    return RoundWeights(t, rows)


def is_perfect(x: Sequence[int], n: int) -> bool:
    return len(x) == n and sorted(x) == list(range(n))


def as_pairs(x: RoundMatching) -> tuple[Pair, ...]:
    return tuple((i, j) for i, j in enumerate(x))


def from_pairs(pairs: Sequence[Pair], n: int) -> RoundMatching:
    x = [-1] * n
    for i, j in pairs:
        if not 0 <= i < n or x[i] != -1:
            raise UsageError(f"bad pair list {pairs!r}")
        x[i] = j
    if not is_perfect(x, n):
        raise UsageError(f"pairs {pairs!r} do not form a perfect matching")
    return tuple(x)


def matching_weight(weights: RoundWeights, x: Sequence[int]) -> Fraction:
    if not is_perfect(x, weights.n):
        raise UsageError(f"{tuple(x)} is not a perfect matching on {weights.n} agents")
    return sum((weights.w[i][j] for i, j in enumerate(x)), Fraction(0))


def _require_binary_symmetric(oracle: ValuationOracle, t: int) -> None:
    bad = validate_oracle(oracle, t, {"binary", "symmetric"})
    if bad is not None:
        raise CapabilityError(f"oracle is not binary symmetric at t={t}: {bad.detail}")


def good_edges(oracle: ValuationOracle, t: int, x: Sequence[int]) -> frozenset[Pair]:
    """Matches of ``x`` that both endpoints value at 1."""
    _require_binary_symmetric(oracle, t)
    vn, vm = oracle.cross(t)
    return frozenset((i, j) for i, j in enumerate(x) if vn[i][j] == 1 and vm[j][i] == 1)


def max_weight_matching_general(weights: RoundWeights) -> tuple[RoundMatching, Fraction]:
    """Exact maximum-weight perfect matching (Hungarian method, potentials).

    Weights are brought to a common denominator first, so the O(n^3) main
    loop runs on integers and stays exact.  Rows and columns are scanned in
    ascending order, so the result is deterministic.
    """
    n = weights.n
    if n == 0:
        return (), Fraction(0)
    den = 1
    for row in weights.w:
        for w in row:
            den = math.lcm(den, Fraction(w).denominator)
    cost = [[-(w.numerator * (den // w.denominator)) for w in map(Fraction, row)]
            for row in weights.w]
    big = 1 + 4 * n * max(abs(c) for row in cost for c in row)
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row assigned to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [big] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = big, 0
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    x = [0] * n
    for j in range(1, n + 1):
        x[p[j] - 1] = j - 1
    x = tuple(x)
    return x, matching_weight(weights, x)


def hopcroft_karp(adj: Sequence[Sequence[int]], m: int) -> dict[int, int]:
    """Maximum-cardinality matching in a bipartite graph.

    ``adj[i]`` lists the right vertices adjacent to left vertex ``i``.
    Returns ``{left: right}``.  Neighbour lists are visited in the given order.
    """
    n = len(adj)
    free = -1
    match_l = [free] * n
    match_r = [free] * m
    dist = [0] * n

    def bfs() -> bool:
        queue = deque()
        for i in range(n):
            if match_l[i] == free:
                dist[i] = 0
                queue.append(i)
            else:
                dist[i] = -1
        found = False
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                k = match_r[j]
                if k == free:
                    found = True
                elif dist[k] == -1:
                    dist[k] = dist[i] + 1
                    queue.append(k)
        return found

    def dfs(i: int) -> bool:
        for j in adj[i]:
            k = match_r[j]
            if k == free or (dist[k] == dist[i] + 1 and dfs(k)):
                match_l[i] = j
                match_r[j] = i
                return True
        dist[i] = -1
        return False

    while bfs():
        for i in range(n):
            if match_l[i] == free:
                dfs(i)
    return {i: j for i, j in enumerate(match_l) if j != free}


def max_weight_matching_binary_symmetric(oracle: ValuationOracle, t: int) -> RoundMatching:
    """Maximum-weight matching for binary symmetric values at ``t``.

    The weight of a matching is ``|good| + a(n - |good|)``, so a maximum
    cardinality matching on mutually liked pairs is optimal; leftover agents
    are paired in ascending index order.
    """
    _require_binary_symmetric(oracle, t)
    if oracle.n != oracle.m:
        raise UsageError("rounds need a square market")
    n = oracle.n
    vn, _ = oracle.cross(t)
    adj = [[j for j in range(n) if vn[i][j] == 1] for i in range(n)]
    core = hopcroft_karp(adj, n)
    left = [i for i in range(n) if i not in core]
    taken = set(core.values())
    right = [j for j in range(n) if j not in taken]
    x = [0] * n
    for i, j in core.items():
        x[i] = j
    for i, j in zip(left, right):
        x[i] = j
    return tuple(x)


def enumerate_perfect_matchings(n: int) -> Iterator[RoundMatching]:
    """All ``n!`` perfect matchings in lexicographic order."""
    if n > MAX_ENUMERATION:
        raise UsageError(f"refusing to enumerate {n}! matchings (limit n <= {MAX_ENUMERATION})")
    return itertools.permutations(range(n))


def brute_force_max_weight(weights: RoundWeights) -> Fraction:
    return max(matching_weight(weights, x) for x in enumerate_perfect_matchings(weights.n))
