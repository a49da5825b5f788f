from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairmatch.core import (
    CapabilityError,
    ShapeError,
    Side,
    StaticValuations,
    UsageError,
    build_matrix,
)
from fairmatch.engines import (
    AsymCyclesEngine,
    EngineConfig,
    EngineInvariantError,
    RoundRobinEngine,
    RoundRobinStage,
    State,
    SymBinEngine,
    asym_cycles_match,
    round_robin_step,
    sym_bin_round,
)
from fairmatch.envy import is_ef1
from fairmatch.fixtures import agent, figure1, figure3, figure4
from fairmatch.gen import AdaptiveValuations, GeneratorSpec, generate
from fairmatch.oracle import verify_trace
from fairmatch.trace import Trace, TraceHeader, TraceRecord


def _trace(engine, reports):
    mode = "rounds" if engine.mode == "per-round" else "time"
    header = TraceHeader(engine.name, mode, engine.oracle.n, engine.oracle.m, engine.oracle.a)
    return Trace(header, [TraceRecord.from_report(r) for r in reports])


def _static(n, m, likes, a=Fraction(0), caps=("binary", "binary01")):
    mat = build_matrix(n, m, {(agent(u), agent(v)): 1 for u, v in likes}, a)
    return StaticValuations(n, m, mat, a, set(caps))


# ---------------------------------------------------------------- symmetric binary rounds


def test_all_ones_confirms_initial_matching():
    oracle = generate(GeneratorSpec("symmetric-binary", 4, 4, p=1.0))
    reports = SymBinEngine(oracle).run(5)
    assert [r.iterations for r in reports] == [0] * 5
    assert all(r.weight == 4 for r in reports)


def test_figure1_swap():
    engine = SymBinEngine(figure1())
    first, second = engine.run(2)
    assert first.matches == ((0, 0), (1, 1))  # {1,2}, {3,4}
    assert first.iterations == 0
    assert second.iterations == 1
    assert second.matches == ((0, 1), (1, 0))  # {1,4}, {3,2}
    swap = second.swaps[0]
    assert (swap.side, swap.envier, swap.enviee) == (Side.N, 1, 0)  # 3 takes 1's slot
    assert (swap.old_partner, swap.new_partner) == (1, 0)
    assert swap.prior_envy
    assert second.good_edges == (1, 1)


def test_sym_bin_rejects_asymmetric_values():
    with pytest.raises(CapabilityError):
        SymBinEngine(figure3()).step()


def test_sym_bin_rejects_unbounded_start():
    # a state with two liked matches in 1's bundle against none for 3
    oracle = figure1()
    state = State.fresh(oracle, "per-round")
    state.confirm(oracle, [(0, 0), (1, 1)])
    state.confirm(oracle, [(0, 0), (1, 1)])
    with pytest.raises(EngineInvariantError):
        sym_bin_round(state, oracle)


def test_sym_bin_needs_square_market():
    oracle = generate(GeneratorSpec("symmetric-binary", 2, 3, seed=3))
    with pytest.raises(ShapeError):
        SymBinEngine(oracle)


def test_engine_config_validation():
    with pytest.raises(UsageError):
        EngineConfig(policy="random")
    with pytest.raises(UsageError):
        EngineConfig(edge_policy="random")


@pytest.mark.parametrize("policy", ["lex", "dfs"])
def test_dynamic_instance_passes_verifier(policy):
    oracle = generate(GeneratorSpec("symmetric-binary", 5, 5, 0.5, seed=11, dynamics="redraw",
                                    a=Fraction(1, 3)))
    engine = SymBinEngine(oracle, EngineConfig(policy=policy))
    reports = engine.run(50)
    assert all(r.ok for r in reports)
    assert verify_trace(oracle, _trace(engine, reports), "rounds",
                        [Fraction(0), Fraction(1, 2), Fraction(9, 10)]).ok


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.sampled_from([0.2, 0.5, 0.8]), st.integers(0, 10_000),
       st.sampled_from(["static", "redraw", "flip-k"]),
       st.sampled_from([Fraction(0), Fraction(1, 2), Fraction(9, 10)]))
def test_swap_invariants(n, p, seed, dynamics, a):
    oracle = generate(GeneratorSpec("symmetric-binary", n, n, p, seed, dynamics, k=2, a=a))
    engine = SymBinEngine(oracle)
    for report in engine.run(20):
        vn, vm = oracle.cross(report.t)
        assert report.iterations <= 2 * n * n
        # the good-edge count starts at the optimum and never moves
        assert len(set(report.good_edges)) == 1
        for swap in report.swaps:
            table = vn if swap.side is Side.N else vm
            assert table[swap.envier][swap.old_partner] == a
            assert table[swap.envier][swap.new_partner] == 1
            assert swap.prior_envy
        assert report.ef1 and report.envy_bounded and report.envy_cycle_free


def test_reporting_a_is_independent_of_verdicts():
    oracle = generate(GeneratorSpec("symmetric-binary", 4, 4, 0.5, seed=5, dynamics="redraw"))
    plain = SymBinEngine(oracle).run(20)
    shifted = SymBinEngine(oracle, EngineConfig(a=Fraction(9, 10))).run(20)
    assert [r.matches for r in plain] == [r.matches for r in shifted]
    assert all(r.envy_bounded for r in shifted)


def test_adaptive_adversary_stays_in_class():
    n = 4

    def respond(t, last, seen):
        # like exactly the partners the engine just used, plus one rotation
        mat = [[0] * (2 * n) for _ in range(2 * n)]
        for i, j in last:
            for jj in (j, (j + t) % n):
                mat[i][n + jj] = mat[n + jj][i] = 1
        return mat

    first = build_matrix(n, n, {}, 0)
    oracle = AdaptiveValuations(n, n, first, respond, Fraction(0), {"binary", "binary01", "symmetric"})
    engine = SymBinEngine(oracle)
    reports = engine.run(30)
    assert all(r.ok for r in reports)
    assert verify_trace(oracle, _trace(engine, reports), "rounds").ok


def test_engine_runs_are_deterministic():
    spec = GeneratorSpec("symmetric-binary", 6, 6, 0.5, seed=2, dynamics="flip-k", k=3)
    one = [r.matches for r in SymBinEngine(generate(spec)).run(30)]
    two = [r.matches for r in SymBinEngine(generate(spec)).run(30)]
    assert one == two


# ---------------------------------------------------------------- only symmetric cycles


def test_symmetric_instance_first_step_has_no_steals():
    oracle = _static(2, 2, [(1, 2), (2, 1), (3, 4), (4, 3)])
    report = AsymCyclesEngine(oracle).step()
    assert report.matches == ((0, 0),)
    assert report.iterations == 0


def test_steal_fires_once():
    # 1 and 3 both like 2; 2 likes nobody.  With the lexicographic proposal
    # the edge {1,2} is offered every time, so at t=2 agent 3 takes 1's slot.
    oracle = _static(2, 1, [(1, 2), (3, 2)])
    engine = AsymCyclesEngine(oracle, EngineConfig(edge_policy="lex"))
    first = engine.step()
    assert first.matches == ((0, 0),) and first.iterations == 0
    second = engine.step()
    assert second.matches == ((1, 0),)
    assert second.iterations == 1
    steal = second.swaps[0]
    assert (steal.side, steal.envier, steal.enviee) == (Side.N, 1, 0)
    assert first.ef1 and second.ef1


def test_star_with_asymmetric_spokes():
    oracle = _static(1, 4, [(2, 1), (1, 4), (6, 1), (1, 8)])
    engine = AsymCyclesEngine(oracle)
    reports = engine.run(20)
    assert all(r.ef1 and r.envy_cycle_free for r in reports)
    assert verify_trace(oracle, _trace(engine, reports), "time").ok


def test_figure4_is_refused():
    with pytest.raises(CapabilityError):
        AsymCyclesEngine(figure4())


def test_empty_desire_graph_is_a_noop():
    oracle = _static(2, 2, [])
    report = AsymCyclesEngine(oracle).step()
    assert report.matches == ()
    assert report.t == 1
    assert report.ok


def test_function_form_validates_when_no_graph_given():
    state = State.fresh(figure4(), "per-match")
    with pytest.raises(CapabilityError):
        asym_cycles_match(state, figure4())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000),
       st.sampled_from(["lex", "dfs"]), st.sampled_from(["round-robin", "lex"]))
def test_asym_cycles_invariants(n, m, seed, policy, edge_policy):
    oracle = generate(GeneratorSpec("only-symmetric-cycles", n, m, 0.5, seed))
    engine = AsymCyclesEngine(oracle, EngineConfig(policy, edge_policy))
    reports = engine.run(40)
    for r in reports:
        assert r.iterations <= n + m
        assert r.ef1 and r.envy_cycle_free and r.envy_bounded
    assert verify_trace(oracle, _trace(engine, reports), "time").ok


# ---------------------------------------------------------------- two agents


def _two_agent(m, rows):
    """rows[i][k]: value of N agent i for M agent k; M agents value N at 0."""
    mat = [[Fraction(0)] * (2 + m) for _ in range(2 + m)]
    for i in range(2):
        for k in range(m):
            mat[i][2 + k] = Fraction(rows[i][k])
    return StaticValuations(2, m, mat)


def test_phase_one_prefix_bundles():
    # picks (1,1), (2,2), (1,3) in drawing terms: N0 gets M0 and M2, N1 gets M1
    oracle = _two_agent(3, [[5, 1, 4], [1, 9, 2]])
    state, stage = State.fresh(oracle, "per-match"), RoundRobinStage(3)
    for _ in range(3):
        _, stage = round_robin_step(state, oracle, stage)
    assert stage.sigma == [(0, 0), (1, 1), (0, 2)]
    assert stage.phase == "two"
    assert state.history.bundle(agent(1)) == [(1, 0), (3, 2)]
    assert state.history.bundle(agent(3)) == [(2, 1)]


def test_single_m_agent_stage():
    oracle = _two_agent(1, [[3], [2]])
    reports = RoundRobinEngine(oracle).run(2)
    assert [r.matches for r in reports] == [((0, 0),), ((1, 0),)]
    assert reports[0].envy_free is None
    assert reports[1].envy_free is True


def test_two_by_two_stage():
    # v_A = (3, 1), v_B = (5, 2) over M = {x, y}
    oracle = _two_agent(2, [[3, 1], [5, 2]])
    engine = RoundRobinEngine(oracle)
    reports = engine.run(4)
    assert [r.matches[0] for r in reports] == [(0, 0), (1, 1), (1, 0), (0, 1)]
    assert all(r.ef1 for r in reports)
    assert reports[-1].envy_free
    assert is_ef1(engine.ledger).ok


def test_ties_go_to_lowest_index():
    oracle = _two_agent(3, [[1, 1, 1], [1, 1, 1]])
    reports = RoundRobinEngine(oracle).run(6)
    assert [r.matches[0] for r in reports] == [(0, 0), (1, 1), (0, 2), (1, 0), (0, 1), (1, 2)]


def test_round_robin_shape_and_static_checks():
    with pytest.raises(ShapeError):
        RoundRobinEngine(generate(GeneratorSpec("general-binary", 3, 3, seed=1)))
    with pytest.raises(CapabilityError):
        RoundRobinEngine(figure3())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 10_000))
def test_round_robin_invariants(m, seed):
    oracle = generate(GeneratorSpec("two-agent-additive", 2, m, seed=seed))
    engine = RoundRobinEngine(oracle)
    reports = engine.run(3 * 2 * m)
    assert all(r.ef1 for r in reports)
    ends = [r for r in reports if r.envy_free is not None]
    assert [r.t for r in ends] == [2 * m, 4 * m, 6 * m]
    assert all(r.envy_free for r in ends)
    assert verify_trace(oracle, _trace(engine, reports), "time").ok
