"""The three matching engines behind one stepping interface.

* :class:`SymBinEngine` -- one perfect matching per timestep for binary
  symmetric (possibly dynamic) values; maximum weight every round, EF1 after
  every round.
* :class:`AsymCyclesEngine` -- one match per timestep for static {0,1} values
  whose desire graph has only symmetric cycles; EF1 after every match.
* :class:`RoundRobinEngine` -- one match per timestep when side N has exactly
  two agents and values are arbitrary non-negative rationals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .core import (
    CapabilityError,
    FairMatchError,
    Ledger,
    MatchHistory,
    Pair,
    ShapeError,
    Side,
    UsageError,
    ValuationOracle,
    apply_events,
    validate_oracle,
)
from .envy import (
    DesireGraph,
    build_desire_graph,
    envy_cycle_free,
    is_c_envy_bounded,
    is_ef1,
    only_symmetric_cycles,
)
from .matching import as_pairs, matching_weight, max_weight_matching_binary_symmetric, round_weights

POLICIES = ("lex", "dfs")
EDGE_POLICIES = ("round-robin", "lex")


class EngineInvariantError(FairMatchError):
    """An engine left the regime its guarantees cover (e.g. smuggled asymmetry)."""


@dataclass(frozen=True)
class EngineConfig:
    policy: str = "lex"
    edge_policy: str = "round-robin"
    a: Fraction | None = None  # reporting only

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise UsageError(f"policy must be one of {POLICIES}")
        if self.edge_policy not in EDGE_POLICIES:
            raise UsageError(f"edge policy must be one of {EDGE_POLICIES}")


@dataclass
class State:
    history: MatchHistory
    ledger: Ledger

    @classmethod
    def fresh(cls, oracle: ValuationOracle, mode: str) -> State:
        return cls(MatchHistory(oracle.n, oracle.m, mode), Ledger(oracle.n, oracle.m))

    def confirm(self, oracle: ValuationOracle, pairs: Iterable[Pair]) -> int:
        pairs = tuple(pairs)
        t = self.ledger.t + 1
        apply_events(self.ledger, oracle, t, pairs)
        self.history.append(pairs)
        return t


@dataclass(frozen=True)
class SwapRecord:
    side: Side
    envier: int
    enviee: int
    old_partner: int  # envier's tentative partner before the move
    new_partner: int  # envier's tentative partner after the move
    prior_envy: bool  # envier already envied enviee before this timestep


@dataclass
class StepReport:
    t: int
    matches: tuple[Pair, ...]
    weight: Fraction | None
    iterations: int
    ef1: bool
    envy_bounded: bool | None
    envy_cycle_free: bool | None
    envy_free: bool | None = None  # only reported at round-robin stage ends
    swaps: tuple[SwapRecord, ...] = ()
    good_edges: tuple[int, ...] = ()  # |E_t| before the first and after every swap

    @property
    def ok(self) -> bool:
        verdicts = (self.ef1, self.envy_bounded, self.envy_cycle_free, self.envy_free)
        return all(v is not False for v in verdicts)


def _capability(oracle: ValuationOracle, t: int, required: set[str], engine: str) -> None:
    bad = validate_oracle(oracle, t, required)
    if bad is not None:
        where = "" if bad.pair is None else f" at {bad.pair[0]}->{bad.pair[1]}"
        raise CapabilityError(f"{engine}: {bad.capability} violated{where} (t={t}): {bad.detail}")


def _report_bound(ledger: Ledger, oracle: ValuationOracle, config: EngineConfig,
                  slack: Fraction) -> bool:
    if config.a is not None and config.a != oracle.a:
        return is_c_envy_bounded(ledger.revalued(config.a), 1 - config.a).ok
    return is_c_envy_bounded(ledger, slack).ok


# --------------------------------------------------------------------------
# binary symmetric rounds
# --------------------------------------------------------------------------


def _kappa_violation(kap: list[list[int]], like: list[list[bool]], partner: list[int],
                     i: int, j: int) -> bool:
    # (1 - a)-envy-boundedness with equal bundle sizes is the integer test
    # kappa_i(X_j) - kappa_i(X_i) <= 1 on the tentative cumulative bundles
    return kap[i][j] + like[i][partner[j]] - kap[i][i] - like[i][partner[i]] >= 2


def sym_bin_round(state: State, oracle: ValuationOracle,
                  config: EngineConfig = EngineConfig()) -> StepReport:
    """Confirm one perfect matching for binary symmetric values.

    Starts from a maximum-weight matching and, while some same-side pair
    would break (1 - a)-envy-boundedness, swaps the two agents' tentative
    partners.  Works on like-counts only.
    """
    ledger = state.ledger
    t = ledger.t + 1
    n = oracle.n
    if n != oracle.m:
        raise ShapeError("rounds need |N| = |M|; pad the instance first")
    _capability(oracle, t, {"binary", "symmetric"}, "sym-bin")
    a = oracle.a
    if not (is_c_envy_bounded(ledger, 1 - a).ok and envy_cycle_free(ledger)):
        raise EngineInvariantError(f"state before t={t} is not (1-a)-envy-bounded and envy-cycle-free")

    vn, vm = oracle.cross(t)
    like = {Side.N: [[v == 1 for v in row] for row in vn],
            Side.M: [[v == 1 for v in row] for row in vm]}
    kap = ledger.kappa
    x = list(max_weight_matching_binary_symmetric(oracle, t))
    y = [0] * n
    for i, j in enumerate(x):
        y[j] = i
    partner = {Side.N: x, Side.M: y}

    def good_count() -> int:
        return sum(1 for i in range(n) if like[Side.N][i][x[i]])

    def scan(side: Side, enviers: Iterable[int]) -> tuple[Side, int, int] | None:
        k, lk, p = kap[side], like[side], partner[side]
        for i in enviers:
            for j in range(n):
                if j != i and _kappa_violation(k, lk, p, i, j):
                    return side, i, j
        return None

    recent: list[tuple[Side, int]] = []

    def next_pair() -> tuple[Side, int, int] | None:
        if config.policy == "dfs":
            # continue from the most recently displaced agents first
            for side, agent in reversed(recent):
                hit = scan(side, (agent,))
                if hit:
                    return hit
        return scan(Side.N, range(n)) or scan(Side.M, range(n))

    limit = 2 * n * n
    swaps: list[SwapRecord] = []
    counts = [good_count()]
    vals = ledger.values
    while (hit := next_pair()) is not None:
        if len(swaps) >= limit:
            raise EngineInvariantError(f"more than 2n^2 = {limit} swaps at t={t}")
        side, i, j = hit
        mine, other = partner[side], partner[side.other]
        old, new = mine[i], mine[j]
        mine[i], mine[j] = new, old
        other[old], other[new] = j, i
        swaps.append(SwapRecord(side, i, j, old, new, vals[side][i][i] < vals[side][i][j]))
        counts.append(good_count())
        recent.extend([(side, j), (side.other, old)])

    pairs = as_pairs(tuple(x))
    state.confirm(oracle, pairs)
    weight = matching_weight(round_weights(oracle, t), x)
    return StepReport(
        t=t,
        matches=pairs,
        weight=weight,
        iterations=len(swaps),
        ef1=is_ef1(ledger).ok,
        envy_bounded=_report_bound(ledger, oracle, config, 1 - a),
        envy_cycle_free=envy_cycle_free(ledger),
        swaps=tuple(swaps),
        good_edges=tuple(counts),
    )


# --------------------------------------------------------------------------
# {0,1} values with only symmetric cycles
# --------------------------------------------------------------------------


def desire_edges(desire: DesireGraph) -> list[Pair]:
    return sorted(desire.edges)


def asym_cycles_match(state: State, oracle: ValuationOracle,
                      config: EngineConfig = EngineConfig(),
                      desire: DesireGraph | None = None) -> StepReport:
    """Confirm one match for static {0,1} values with only symmetric cycles.

    Proposes a desire-graph edge, then while some agent's envy toward a
    tentative participant would exceed 1, that agent takes the participant's
    place.  With no desire edges at all the step is a no-op.
    """
    ledger = state.ledger
    t = ledger.t + 1
    if desire is None:
        desire = build_desire_graph(oracle)
        verdict = only_symmetric_cycles(desire)
        if not verdict.ok:
            raise CapabilityError(f"asym-cycles: asymmetric edge {verdict.witness} lies on a cycle")
    edges = desire_edges(desire)
    if not edges:
        state.confirm(oracle, ())
        return StepReport(t, (), None, 0, is_ef1(ledger).ok,
                          is_c_envy_bounded(ledger, 1).ok, envy_cycle_free(ledger))

    p, q = edges[(t - 1) % len(edges)] if config.edge_policy == "round-robin" else edges[0]
    vn, vm = oracle.cross(1)
    vals = ledger.values
    limit = oracle.n + oracle.m
    steals: list[SwapRecord] = []
    last_side = Side.N

    def scan(side: Side) -> tuple[Side, int, int] | None:
        member, partner = (p, q) if side is Side.N else (q, p)
        table, rows = (vn if side is Side.N else vm), vals[side]
        for i in range(len(rows)):
            if i != member and rows[i][member] + table[i][partner] - rows[i][i] > 1:
                return side, i, member
        return None

    while True:
        order = (last_side, last_side.other) if config.policy == "dfs" else (Side.N, Side.M)
        hit = scan(order[0]) or scan(order[1])
        if hit is None:
            break
        if len(steals) >= limit:
            raise EngineInvariantError(f"more than n + m = {limit} steals at t={t}")
        side, i, j = hit
        held = q if side is Side.N else p
        steals.append(SwapRecord(side, i, j, -1, held, vals[side][i][i] < vals[side][i][j]))
        if side is Side.N:
            p = i
        else:
            q = i
        last_side = side

    state.confirm(oracle, [(p, q)])
    return StepReport(
        t=t,
        matches=((p, q),),
        weight=None,
        iterations=len(steals),
        ef1=is_ef1(ledger).ok,
        envy_bounded=is_c_envy_bounded(ledger, 1).ok,
        envy_cycle_free=envy_cycle_free(ledger),
        swaps=tuple(steals),
    )


# --------------------------------------------------------------------------
# two agents on side N
# --------------------------------------------------------------------------


@dataclass
class RoundRobinStage:
    """Bookkeeping for one stage of 2m matches.

    Phase one: N agents 0 and 1 alternately pick their favourite M agent left
    in ``pool`` (agent 0 first), recorded in ``sigma``.  Phase two replays
    ``sigma`` in order with the pickers flipped, starting with agent 1.
    """

    m: int
    index: int = 1
    sigma: list[Pair] = field(default_factory=list)
    phase: str = "one"
    pool: set[int] = field(default_factory=set)
    cursor: int = 0

    def __post_init__(self) -> None:
        if not self.pool and self.phase == "one" and not self.sigma:
            self.pool = set(range(self.m))

    def start_time(self) -> int:
        return 2 * self.m * (self.index - 1)


def round_robin_step(state: State, oracle: ValuationOracle,
                     stage: RoundRobinStage) -> tuple[StepReport, RoundRobinStage]:
    ledger = state.ledger
    t = ledger.t + 1
    if oracle.n != 2:
        raise ShapeError(f"round-robin needs exactly two N agents, got {oracle.n}")
    _capability(oracle, t, {"static"}, "round-robin")
    vn, _ = oracle.cross(t)
    if stage.phase == "one":
        picker = len(stage.sigma) % 2
        j = max(sorted(stage.pool), key=lambda k: (vn[picker][k], -k))
        stage.pool.discard(j)
        stage.sigma.append((picker, j))
        if not stage.pool:
            stage.phase, stage.cursor = "two", 0
    else:
        _, j = stage.sigma[stage.cursor]
        picker = (stage.cursor + 1) % 2
        stage.cursor += 1
    pair = (picker, j)
    state.confirm(oracle, [pair])

    envy_free = None
    if stage.phase == "two" and stage.cursor == len(stage.sigma):
        envy_free = is_c_envy_bounded(ledger, 0).ok
        stage = RoundRobinStage(stage.m, stage.index + 1)
    report = StepReport(t, (pair,), None, 0, is_ef1(ledger).ok, None, None, envy_free)
    return report, stage


# --------------------------------------------------------------------------
# stateful wrappers
# --------------------------------------------------------------------------


class Engine:
    name = ""
    mode = "per-match"

    def __init__(self, oracle: ValuationOracle, config: EngineConfig = EngineConfig()):
        self.oracle = oracle
        self.config = config
        self.state = State.fresh(oracle, self.mode)

    @property
    def history(self) -> MatchHistory:
        return self.state.history

    @property
    def ledger(self) -> Ledger:
        return self.state.ledger

    def _step(self) -> StepReport:
        raise NotImplementedError

    def step(self) -> StepReport:
        report = self._step()
        observe = getattr(self.oracle, "observe", None)
        if observe is not None:
            observe(report.t, report.matches)
        return report

    def run(self, steps: int) -> list[StepReport]:
        return [self.step() for _ in range(steps)]


class SymBinEngine(Engine):
    name = "sym-bin"
    mode = "per-round"

    def __init__(self, oracle: ValuationOracle, config: EngineConfig = EngineConfig()):
        if oracle.n != oracle.m:
            raise ShapeError("sym-bin needs |N| = |M|; pad the instance first")
        if oracle.a is None:
            raise CapabilityError("sym-bin needs a binary oracle with a declared a")
        super().__init__(oracle, config)

    def _step(self) -> StepReport:
        return sym_bin_round(self.state, self.oracle, self.config)


class AsymCyclesEngine(Engine):
    name = "asym-cycles"

    def __init__(self, oracle: ValuationOracle, config: EngineConfig = EngineConfig()):
        super().__init__(oracle, config)
        self.desire = build_desire_graph(oracle)
        verdict = only_symmetric_cycles(self.desire)
        if not verdict.ok:
            raise CapabilityError(
                f"asym-cycles: asymmetric desire edge N{verdict.witness[0]}-M{verdict.witness[1]} "
                "lies on a cycle")

    def _step(self) -> StepReport:
        return asym_cycles_match(self.state, self.oracle, self.config, self.desire)


class RoundRobinEngine(Engine):
    name = "round-robin"

    def __init__(self, oracle: ValuationOracle, config: EngineConfig = EngineConfig()):
        if oracle.n != 2:
            raise ShapeError(f"round-robin needs exactly two N agents, got {oracle.n}")
        _capability(oracle, 1, {"static"}, "round-robin")
        super().__init__(oracle, config)
        self.stage = RoundRobinStage(oracle.m)

    def _step(self) -> StepReport:
        report, self.stage = round_robin_step(self.state, self.oracle, self.stage)
        return report


ENGINES: dict[str, type[Engine]] = {
    cls.name: cls for cls in (SymBinEngine, AsymCyclesEngine, RoundRobinEngine)
}
