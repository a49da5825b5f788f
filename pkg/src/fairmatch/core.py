"""Agents, valuation oracles, match histories and cumulative-value ledgers.

Agents live in two disjoint namespaces, side ``N`` and side ``M``, each indexed
from 0.  Valuation matrices use a single *global* index: ``N`` agent ``i`` is
row ``i`` and ``M`` agent ``j`` is row ``n + j``.  All values are exact
:class:`fractions.Fraction` instances.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

FORMAT_VERSION = 1

Matrix = tuple[tuple[Fraction, ...], ...]
Pair = tuple[int, int]  # (N index, M index)

CAPABILITIES = frozenset({"static", "symmetric", "binary", "binary01"})


class FairMatchError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(FairMatchError, ValueError):
    pass


class HistoryError(FairMatchError):
    """A batch of events is inconsistent with the history it extends."""


class CapabilityError(FairMatchError):
    """An oracle lacks a capability an operation depends on."""


class ShapeError(FairMatchError):
    pass


class Side(str, enum.Enum):
    N = "N"
    M = "M"

    @property
    def other(self) -> Side:
        return Side.M if self is Side.N else Side.N


class AgentId(NamedTuple):
    side: Side
    index: int

    def __str__(self) -> str:
        return f"{self.side.value}{self.index}"


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"`` (or a bare integer) into a Fraction.

    Floats are refused so that no rounding can sneak into a verdict.
    """
    if isinstance(text, bool) or isinstance(text, float):
        raise UsageError(f"refusing non-exact rational {text!r}")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    s = text.strip()
    if not s or "." in s or "e" in s.lower():
        raise UsageError(f"not an exact rational: {text!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not an exact rational: {text!r}") from exc


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


# --------------------------------------------------------------------------
# valuation oracles
# --------------------------------------------------------------------------


def freeze_matrix(matrix: Sequence[Sequence[object]], n: int, m: int) -> Matrix:
    size = n + m
    if len(matrix) != size or any(len(row) != size for row in matrix):
        raise UsageError(f"valuation matrix must be {size}x{size}")
    frozen = tuple(tuple(v if type(v) is Fraction else parse_rational(v) if isinstance(v, str)
                         else Fraction(v) for v in row)
                   for row in matrix)
    for g in range(size):
        for h in range(size):
            v = frozen[g][h]
            if v < 0:
                raise UsageError(f"negative value at ({g}, {h}); clamp to 0 before ingestion")
            if (g < n) == (h < n) and v != 0:
                raise UsageError(f"same-side entry ({g}, {h}) must be 0")
    return frozen


class ValuationOracle:
    """Source of per-timestep values ``v_i^t(j)``.

    Subclasses provide :meth:`matrix`; everything else is derived from it.
    ``capabilities`` is what the oracle *declares*; :func:`validate_oracle`
    checks declarations against the actual numbers.
    """

    def __init__(self, n: int, m: int, a: Fraction | None = None,
                 capabilities: Iterable[str] = ()):
        if n < 1 or m < 1:
            raise UsageError("both sides need at least one agent")
        caps = frozenset(capabilities)
        unknown = caps - CAPABILITIES
        if unknown:
            raise UsageError(f"unknown capabilities {sorted(unknown)}")
        if a is not None:
            a = Fraction(a)
            if not 0 <= a < 1:
                raise UsageError("a must lie in [0, 1)")
        if {"binary", "binary01"} & caps and a is None:
            raise UsageError("binary oracles must declare a")
        if "binary01" in caps and a != 0:
            raise UsageError("binary01 requires a = 0")
        self.n = n
        self.m = m
        self.a = a
        self.capabilities = caps
        self._sides: dict[int, tuple[Matrix, Matrix, Matrix]] = {}

    @property
    def size(self) -> int:
        return self.n + self.m

    def matrix(self, t: int) -> Matrix:
        raise NotImplementedError

    def gid(self, agent: AgentId) -> int:
        bound = self.n if agent.side is Side.N else self.m
        if not 0 <= agent.index < bound:
            raise UsageError(f"agent {agent} out of range")
        return agent.index if agent.side is Side.N else self.n + agent.index

    def value(self, t: int, i: AgentId, j: AgentId) -> Fraction:
        gi, gj = self.gid(i), self.gid(j)
        if i.side == j.side:
            return Fraction(0)
        return self.matrix(t)[gi][gj]

    def cross(self, t: int) -> tuple[Matrix, Matrix]:
        """Return ``(vn, vm)`` with ``vn[i][j] = v_i^t(j)`` for i in N, j in M
        and ``vm[j][i] = v_j^t(i)``."""
        mat = self.matrix(t)
        hit = self._sides.get(id(mat))
        if hit is None or hit[0] is not mat:
            n = self.n
            vn = tuple(tuple(mat[i][n + j] for j in range(self.m)) for i in range(n))
            vm = tuple(tuple(mat[n + j][i] for i in range(n)) for j in range(self.m))
            hit = self._sides[id(mat)] = (mat, vn, vm)
        return hit[1], hit[2]


class StaticValuations(ValuationOracle):
    def __init__(self, n: int, m: int, matrix: Sequence[Sequence[object]],
                 a: Fraction | None = None, capabilities: Iterable[str] = ()):
        super().__init__(n, m, a, set(capabilities) | {"static"})
        self._matrix = freeze_matrix(matrix, n, m)

    def matrix(self, t: int) -> Matrix:
        return self._matrix


class ScriptedValuations(ValuationOracle):
    """Timestep ``t`` uses ``matrices[(t - 1) % len(matrices)]``."""

    def __init__(self, n: int, m: int, matrices: Sequence[Sequence[Sequence[object]]],
                 a: Fraction | None = None, capabilities: Iterable[str] = ()):
        super().__init__(n, m, a, capabilities)
        if not matrices:
            raise UsageError("a scripted oracle needs at least one matrix")
        self.matrices = tuple(freeze_matrix(mat, n, m) for mat in matrices)

    def matrix(self, t: int) -> Matrix:
        if t < 1:
            raise UsageError("timesteps start at 1")
        return self.matrices[(t - 1) % len(self.matrices)]


def build_matrix(n: int, m: int, likes: dict[tuple[AgentId, AgentId], Fraction | int],
                 default: Fraction | int = 0) -> list[list[Fraction]]:
    """Build a full matrix where every cross-side entry is ``default`` except
    the ones listed in ``likes``."""
    size = n + m
    mat = [[Fraction(0)] * size for _ in range(size)]
    for g in range(size):
        for h in range(size):
            if (g < n) != (h < n):
                mat[g][h] = Fraction(default)

    def gid(x: AgentId) -> int:
        return x.index if x.side is Side.N else n + x.index

    for (i, j), v in likes.items():
        if i.side == j.side:
            raise UsageError("likes must be cross-side")
        mat[gid(i)][gid(j)] = Fraction(v)
    return mat


@dataclass(frozen=True)
class Violation:
    capability: str
    pair: tuple[AgentId, AgentId] | None
    detail: str


def _agent(oracle: ValuationOracle, g: int) -> AgentId:
    return AgentId(Side.N, g) if g < oracle.n else AgentId(Side.M, g - oracle.n)


def validate_oracle(oracle: ValuationOracle, t: int,
                    required: Iterable[str]) -> Violation | None:
    """Check that the required capabilities really hold at timestep ``t``.

    Returns ``None`` when everything holds, else the first violation found
    (cross-side pairs are scanned in global index order).
    """
    required = frozenset(required)
    mat = oracle.matrix(t)
    n, size = oracle.n, oracle.size
    if "static" in required and "static" not in oracle.capabilities:
        # scripted oracles expose every timestep, so check them all
        for k, other in enumerate(getattr(oracle, "matrices", (mat,)), start=1):
            if other != oracle.matrix(1):
                return Violation("static", None, f"values at t={k} differ from t=1")
        if mat != oracle.matrix(1):
            return Violation("static", None, f"values at t={t} differ from t=1")
    a = oracle.a
    for g in range(size):
        for h in range(size):
            if (g < n) == (h < n):
                continue
            v = mat[g][h]
            pair = (_agent(oracle, g), _agent(oracle, h))
            if "symmetric" in required and v != mat[h][g]:
                return Violation("symmetric", pair, f"{v} != {mat[h][g]}")
            if "binary" in required and (a is None or v not in (a, 1)):
                return Violation("binary", pair, f"value {v} not in {{a, 1}} (a={a})")
            if "binary01" in required and v not in (0, 1):
                return Violation("binary01", pair, f"value {v} not in {{0, 1}}")
    return None


# --------------------------------------------------------------------------
# histories and ledgers
# --------------------------------------------------------------------------


def _check_pairs(n: int, m: int, pairs: Iterable[Pair]) -> tuple[Pair, ...]:
    pairs = tuple((int(i), int(j)) for i, j in pairs)
    seen_n: set[int] = set()
    seen_m: set[int] = set()
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < m):
            raise HistoryError(f"pair ({i}, {j}) names an unknown agent")
        if i in seen_n or j in seen_m:
            raise HistoryError(f"agent matched twice in one timestep: ({i}, {j})")
        seen_n.add(i)
        seen_m.add(j)
    return pairs


@dataclass
class MatchHistory:
    """Append-only record of confirmed matches, one group per timestep.

    ``rounds[t - 1]`` holds the ``(N index, M index)`` pairs confirmed at
    timestep ``t``.  In ``per-round`` mode every group is a perfect matching.
    """

    n: int
    m: int
    mode: str = "per-round"
    rounds: list[tuple[Pair, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.mode not in ("per-round", "per-match"):
            raise UsageError(f"unknown history mode {self.mode!r}")

    @property
    def t(self) -> int:
        return len(self.rounds)

    def append(self, pairs: Iterable[Pair]) -> int:
        pairs = _check_pairs(self.n, self.m, pairs)
        if self.mode == "per-round" and (self.n != self.m or len(pairs) != self.n):
            raise HistoryError("per-round history needs a perfect matching each timestep")
        if self.mode == "per-match" and len(pairs) > 1:
            raise HistoryError("per-match history takes at most one match per timestep")
        self.rounds.append(pairs)
        return self.t

    def bundle(self, agent: AgentId) -> list[tuple[int, int]]:
        """``[(t, partner index), ...]`` for every match of ``agent``."""
        out = []
        for t, pairs in enumerate(self.rounds, start=1):
            for i, j in pairs:
                if agent.side is Side.N and i == agent.index:
                    out.append((t, j))
                elif agent.side is Side.M and j == agent.index:
                    out.append((t, i))
        return out

    def prefix(self, t: int) -> MatchHistory:
        return MatchHistory(self.n, self.m, self.mode, list(self.rounds[:t]))


def _square(k: int, zero: object) -> list[list]:
    return [[zero] * k for _ in range(k)]


class Ledger:
    """Running ``v_i(X_j^t)`` and ``kappa_i(X_j^t)`` for every same-side pair.

    ``values[side][i][j]`` is agent i's exact value for agent j's bundle,
    ``kappa[side][i][j]`` counts matches in j's bundle that i values at 1,
    ``top[side][i][j]`` is the largest single-match contribution i sees in j's
    bundle (0 for an empty bundle) and ``sizes[side][j]`` is ``|X_j^t|``.
    """

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self.t = 0
        self.values = {Side.N: _square(n, Fraction(0)), Side.M: _square(m, Fraction(0))}
        self.kappa = {Side.N: _square(n, 0), Side.M: _square(m, 0)}
        self.top = {Side.N: _square(n, Fraction(0)), Side.M: _square(m, Fraction(0))}
        self.sizes = {Side.N: [0] * n, Side.M: [0] * m}

    def side_size(self, side: Side) -> int:
        return self.n if side is Side.N else self.m

    def copy(self) -> Ledger:
        new = Ledger.__new__(Ledger)
        new.n, new.m, new.t = self.n, self.m, self.t
        new.values = {s: [row[:] for row in rows] for s, rows in self.values.items()}
        new.kappa = {s: [row[:] for row in rows] for s, rows in self.kappa.items()}
        new.top = {s: [row[:] for row in rows] for s, rows in self.top.items()}
        new.sizes = {s: list(v) for s, v in self.sizes.items()}
        return new

    def revalued(self, a: Fraction) -> Ledger:
        """Ledger for the binary profile that keeps every like but replaces the
        dislike value by ``a``.  Only meaningful for binary histories."""
        a = Fraction(a)
        new = self.copy()
        for side in Side:
            k = self.side_size(side)
            for i in range(k):
                for j in range(k):
                    kap, size = self.kappa[side][i][j], self.sizes[side][j]
                    new.values[side][i][j] = a * size + (1 - a) * kap
                    new.top[side][i][j] = Fraction(1) if kap else (a if size else Fraction(0))
        return new

    def snapshot(self) -> dict:
        return {
            "t": self.t,
            "values": {s.value: [[format_rational(v) for v in row] for row in rows]
                       for s, rows in self.values.items()},
            "sizes": {s.value: list(v) for s, v in self.sizes.items()},
        }


def apply_events(ledger: Ledger, oracle: ValuationOracle, t: int,
                 pairs: Iterable[Pair]) -> Ledger:
    """Fold the matches confirmed at timestep ``t`` into ``ledger`` in place.

    Raises :class:`HistoryError` if ``t`` does not directly follow the
    ledger's timestep or an agent appears twice.
    """
    if t != ledger.t + 1:
        raise HistoryError(f"expected timestep {ledger.t + 1}, got {t}")
    if (oracle.n, oracle.m) != (ledger.n, ledger.m):
        raise HistoryError("oracle and ledger disagree on market shape")
    pairs = _check_pairs(ledger.n, ledger.m, pairs)
    vn, vm = oracle.cross(t)
    for p, q in pairs:
        # N agents look at p's new partner q; M agents look at q's new partner p
        for side, owner, partner, table in ((Side.N, p, q, vn), (Side.M, q, p, vm)):
            vals, kap, top = ledger.values[side], ledger.kappa[side], ledger.top[side]
            for i in range(len(vals)):
                v = table[i][partner]
                if v:
                    vals[i][owner] += v
                    if v == 1:
                        kap[i][owner] += 1
                    if v > top[i][owner]:
                        top[i][owner] = v
            ledger.sizes[side][owner] += 1
    ledger.t = t
    return ledger


def value_of(ledger: Ledger, i: AgentId, j: AgentId) -> Fraction:
    if i.side != j.side:
        raise UsageError("envy is only defined within one side of the market")
    k = ledger.side_size(i.side)
    if not (0 <= i.index < k and 0 <= j.index < k):
        raise UsageError(f"agent out of range: {i}, {j}")
    return ledger.values[i.side][i.index][j.index]


def replay(history: MatchHistory, oracle: ValuationOracle) -> Ledger:
    ledger = Ledger(history.n, history.m)
    for t, pairs in enumerate(history.rounds, start=1):
        apply_events(ledger, oracle, t, pairs)
    return ledger


# --------------------------------------------------------------------------
# instance files
# --------------------------------------------------------------------------


def _matrix_json(mat: Matrix) -> list[list[str]]:
    return [[format_rational(v) for v in row] for row in mat]


def oracle_to_json(oracle: ValuationOracle) -> dict:
    if isinstance(oracle, StaticValuations):
        mode, values = "static", _matrix_json(oracle.matrix(1))
    elif isinstance(oracle, ScriptedValuations):
        mode, values = "scripted", [_matrix_json(mat) for mat in oracle.matrices]
    else:
        raise UsageError(f"{type(oracle).__name__} cannot be serialized")
    return {
        "format": FORMAT_VERSION,
        "n": oracle.n,
        "m": oracle.m,
        "a": None if oracle.a is None else format_rational(oracle.a),
        "mode": mode,
        "values": values,
        "capabilities": sorted(oracle.capabilities - {"static"}),
    }


def oracle_from_json(data: dict) -> ValuationOracle:
    fmt = data.get("format", FORMAT_VERSION)
    if fmt != FORMAT_VERSION:
        raise UsageError(f"unsupported instance format {fmt}")
    try:
        n, m, mode, values = int(data["n"]), int(data["m"]), data["mode"], data["values"]
    except KeyError as exc:
        raise UsageError(f"instance is missing field {exc}") from exc
    a = None if data.get("a") is None else parse_rational(data["a"])
    caps = set(data.get("capabilities", ())) - {"static"}
    if mode == "static":
        return StaticValuations(n, m, values, a, caps)
    if mode == "scripted":
        return ScriptedValuations(n, m, values, a, caps)
    raise UsageError(f"unknown instance mode {mode!r}")


def load_instance(path: str | Path) -> ValuationOracle:
    with open(path) as fh:
        return oracle_from_json(json.load(fh))


def save_instance(oracle: ValuationOracle, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(oracle_to_json(oracle), fh, indent=1)
        fh.write("\n")
