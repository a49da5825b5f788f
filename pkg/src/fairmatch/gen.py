"""Seeded instance generators and valuation adversaries."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .core import (
    Matrix,
    Pair,
    ScriptedValuations,
    StaticValuations,
    UsageError,
    ValuationOracle,
    freeze_matrix,
)
from .envy import build_desire_graph, only_symmetric_cycles

KINDS = ("symmetric-binary", "only-symmetric-cycles", "two-agent-additive", "general-binary")
DYNAMICS = ("static", "redraw", "flip-k")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    m: int
    p: float = 0.5
    seed: int = 0
    dynamics: str = "static"
    k: int = 1  # pairs flipped per step for flip-k
    a: Fraction = Fraction(0)
    horizon: int = 50  # scripted matrices for dynamic kinds, reused cyclically

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise UsageError(f"kind must be one of {KINDS}")
        if self.dynamics not in DYNAMICS:
            raise UsageError(f"dynamics must be one of {DYNAMICS}")
        if self.n < 1 or self.m < 1:
            raise UsageError("both sides need at least one agent")
        if not 0 <= self.p <= 1:
            raise UsageError("like density must lie in [0, 1]")
        if not 0 <= Fraction(self.a) < 1:
            raise UsageError("a must lie in [0, 1)")
        if self.kind == "two-agent-additive" and self.n != 2:
            raise UsageError("two-agent-additive instances have n = 2")
        if self.kind in ("only-symmetric-cycles", "two-agent-additive") and self.dynamics != "static":
            raise UsageError(f"{self.kind} instances are static")
        if self.kind == "only-symmetric-cycles" and self.a != 0:
            raise UsageError("only-symmetric-cycles instances are {0,1}-valued")
        if self.dynamics == "flip-k" and self.kind != "symmetric-binary":
            raise UsageError("flip-k dynamics preserve symmetry and need symmetric-binary")
        if self.horizon < 1 or self.k < 0:
            raise UsageError("horizon must be positive and k non-negative")


def _empty(n: int, m: int) -> list[list[Fraction]]:
    return [[Fraction(0)] * (n + m) for _ in range(n + m)]


def _binary_caps(a: Fraction, symmetric: bool) -> set[str]:
    caps = {"binary"}
    if a == 0:
        caps.add("binary01")
    if symmetric:
        caps.add("symmetric")
    return caps


def _symmetric_likes(rng: random.Random, n: int, m: int, p: float) -> set[Pair]:
    return {(i, j) for i in range(n) for j in range(m) if rng.random() < p}


def _symmetric_matrix(n: int, m: int, a: Fraction, likes: set[Pair]) -> list[list[Fraction]]:
    mat = _empty(n, m)
    for i in range(n):
        for j in range(m):
            v = Fraction(1) if (i, j) in likes else a
            mat[i][n + j] = mat[n + j][i] = v
    return mat


def _general_matrix(rng: random.Random, n: int, m: int, a: Fraction, p: float) -> list[list[Fraction]]:
    mat = _empty(n, m)
    for g in range(n + m):
        for h in range(n + m):
            if (g < n) != (h < n):
                mat[g][h] = Fraction(1) if rng.random() < p else a
    return mat


def _only_symmetric_cycles(rng: random.Random, n: int, m: int, p: float) -> list[list[Fraction]]:
    # symmetric core first, then one-directional likes only between different
    # components, so every asymmetric edge stays a bridge
    parent = list(range(n + m))

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    mat = _empty(n, m)
    for i, j in sorted(_symmetric_likes(rng, n, m, p / 2)):
        mat[i][n + j] = mat[n + j][i] = Fraction(1)
        parent[find(i)] = find(n + j)
    candidates = [(i, j) for i in range(n) for j in range(m)]
    rng.shuffle(candidates)
    for i, j in candidates:
        if find(i) != find(n + j) and rng.random() < max(p, 0.3):
            if rng.random() < 0.5:
                mat[i][n + j] = Fraction(1)
            else:
                mat[n + j][i] = Fraction(1)
            parent[find(i)] = find(n + j)
    return mat


def _two_agent_matrix(rng: random.Random, m: int) -> list[list[Fraction]]:
    mat = _empty(2, m)
    for g in range(2 + m):
        for h in range(2 + m):
            if (g < 2) != (h < 2):
                mat[g][h] = Fraction(rng.randint(0, 12), rng.randint(1, 4))
    return mat


def generate(spec: GeneratorSpec) -> ValuationOracle:
    """Build the instance described by ``spec``; the seed fixes everything."""
    rng = random.Random(f"{spec.kind}/{spec.n}/{spec.m}/{spec.seed}")
    n, m, a = spec.n, spec.m, Fraction(spec.a)

    if spec.kind == "two-agent-additive":
        return StaticValuations(n, m, _two_agent_matrix(rng, m), None, ())

    if spec.kind == "only-symmetric-cycles":
        oracle = StaticValuations(n, m, _only_symmetric_cycles(rng, n, m, spec.p), a,
                                  {"binary", "binary01"})
        verdict = only_symmetric_cycles(build_desire_graph(oracle))
        assert verdict.ok, f"generator produced an asymmetric cycle edge {verdict.witness}"
        return oracle

    symmetric = spec.kind == "symmetric-binary"
    caps = _binary_caps(a, symmetric)

    if spec.dynamics == "static":
        if symmetric:
            mat = _symmetric_matrix(n, m, a, _symmetric_likes(rng, n, m, spec.p))
        else:
            mat = _general_matrix(rng, n, m, a, spec.p)
        return StaticValuations(n, m, mat, a, caps)

    matrices = []
    if spec.dynamics == "redraw":
        for _ in range(spec.horizon):
            if symmetric:
                matrices.append(_symmetric_matrix(n, m, a, _symmetric_likes(rng, n, m, spec.p)))
            else:
                matrices.append(_general_matrix(rng, n, m, a, spec.p))
    else:
        likes = _symmetric_likes(rng, n, m, spec.p)
        all_pairs = [(i, j) for i in range(n) for j in range(m)]
        for step in range(spec.horizon):
            if step:
                for pair in rng.sample(all_pairs, min(spec.k, len(all_pairs))):
                    likes ^= {pair}
            matrices.append(_symmetric_matrix(n, m, a, likes))
    return ScriptedValuations(n, m, matrices, a, caps)


def _pad(mat: Matrix, n: int, m: int, size: int) -> list[list[Fraction]]:
    out = _empty(size, size)
    for g in range(n + m):
        for h in range(n + m):
            gg = g if g < n else size + (g - n)
            hh = h if h < n else size + (h - n)
            out[gg][hh] = mat[g][h]
    return out


def pad_to_square(oracle: ValuationOracle) -> ValuationOracle:
    """Extend the smaller side with agents that value, and are valued by,
    everyone at 0."""
    n, m = oracle.n, oracle.m
    if n == m:
        return oracle
    size = max(n, m)
    caps = set(oracle.capabilities) - {"static"}
    if oracle.a is not None and oracle.a != 0:
        # zero-valued dummies fall outside {a, 1}
        caps -= {"binary", "binary01"}
    a = oracle.a if {"binary", "binary01"} & caps else None
    if isinstance(oracle, StaticValuations):
        return StaticValuations(size, size, _pad(oracle.matrix(1), n, m, size), a, caps)
    if isinstance(oracle, ScriptedValuations):
        return ScriptedValuations(size, size, [_pad(mat, n, m, size) for mat in oracle.matrices],
                                  a, caps)
    raise UsageError(f"cannot pad {type(oracle).__name__}")


def with_dislike_value(oracle: ValuationOracle, a: Fraction) -> ValuationOracle:
    """Same likes, every non-like cross value replaced by ``a``."""
    a = Fraction(a)
    if oracle.a is None:
        raise UsageError("only binary instances can be revalued")
    caps = set(oracle.capabilities) - {"static", "binary01"}
    if a == 0 and "binary" in caps:
        caps.add("binary01")

    def swap(mat: Matrix) -> list[list[Fraction]]:
        n = oracle.n
        return [[(v if v == 1 or (g < n) == (h < n) else a) for h, v in enumerate(row)]
                for g, row in enumerate(mat)]

    if isinstance(oracle, StaticValuations):
        return StaticValuations(oracle.n, oracle.m, swap(oracle.matrix(1)), a, caps)
    if isinstance(oracle, ScriptedValuations):
        return ScriptedValuations(oracle.n, oracle.m, [swap(mat) for mat in oracle.matrices], a, caps)
    raise UsageError(f"cannot revalue {type(oracle).__name__}")


class AdaptiveValuations(ValuationOracle):
    """Values chosen on the fly by an adversary that sees every confirmed step.

    ``respond(t, last_matches, history_of_matches)`` returns the full matrix for
    timestep ``t``; it is called once per timestep, after timestep ``t - 1``
    has been confirmed and reported through :meth:`observe`.
    """

    def __init__(self, n: int, m: int, first: Sequence[Sequence[object]],
                 respond: Callable[[int, tuple[Pair, ...], list[tuple[Pair, ...]]], Sequence[Sequence[object]]],
                 a: Fraction | None = None, capabilities=()):
        super().__init__(n, m, a, capabilities)
        self._respond = respond
        self._matrices = [freeze_matrix(first, n, m)]
        self._seen: list[tuple[Pair, ...]] = []

    def observe(self, t: int, matches: tuple[Pair, ...]) -> None:
        if t != len(self._seen) + 1:
            raise UsageError(f"observed timestep {t} out of order")
        self._seen.append(tuple(matches))
        nxt = self._respond(t + 1, tuple(matches), list(self._seen))
        self._matrices.append(freeze_matrix(nxt, self.n, self.m))

    def matrix(self, t: int) -> Matrix:
        if not 1 <= t <= len(self._matrices):
            raise UsageError(f"adaptive values for t={t} are not decided yet")
        return self._matrices[t - 1]
