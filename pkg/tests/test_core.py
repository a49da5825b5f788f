from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairmatch.core import (
    AgentId,
    HistoryError,
    Ledger,
    MatchHistory,
    ScriptedValuations,
    Side,
    StaticValuations,
    UsageError,
    apply_events,
    build_matrix,
    format_rational,
    load_instance,
    oracle_from_json,
    oracle_to_json,
    parse_rational,
    replay,
    save_instance,
    validate_oracle,
    value_of,
)
from fairmatch.fixtures import agent, build_figure2

N0, N1 = AgentId(Side.N, 0), AgentId(Side.N, 1)
M0, M1 = AgentId(Side.M, 0), AgentId(Side.M, 1)


# ---------------------------------------------------------------- rationals


@pytest.mark.parametrize("text, expected", [
    ("3/4", Fraction(3, 4)),
    ("6/8", Fraction(3, 4)),
    ("2", Fraction(2)),
    (" 0/1 ", Fraction(0)),
    (5, Fraction(5)),
])
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("bad", ["0.5", "1e3", "", "x/2", "1/0", 0.5, True])
def test_parse_rational_refuses_inexact(bad):
    with pytest.raises(UsageError):
        parse_rational(bad)


def test_format_rational_is_canonical():
    assert format_rational(Fraction(6, 8)) == "3/4"
    assert format_rational(2) == "2/1"
    assert format_rational(Fraction(0)) == "0/1"


@given(st.fractions(min_value=0, max_value=100))
def test_rational_round_trip(q):
    assert parse_rational(format_rational(q)) == q


# ---------------------------------------------------------------- oracles


def test_same_side_values_are_zero():
    oracle = build_figure2()
    assert oracle.value(1, N0, N1) == 0
    assert oracle.value(1, M0, M1) == 0


def test_matrix_rejects_same_side_and_negative_entries():
    mat = build_matrix(1, 1, {})
    mat[0][0] = Fraction(1)
    with pytest.raises(UsageError):
        StaticValuations(1, 1, mat)
    mat = build_matrix(1, 1, {(N0, M0): -1})
    with pytest.raises(UsageError):
        StaticValuations(1, 1, mat)


def test_binary_oracle_needs_a():
    with pytest.raises(UsageError):
        StaticValuations(1, 1, build_matrix(1, 1, {}), None, {"binary"})
    with pytest.raises(UsageError):
        StaticValuations(1, 1, build_matrix(1, 1, {}), Fraction(1, 2), {"binary01"})


def test_scripted_oracle_cycles():
    first = build_matrix(1, 1, {(N0, M0): 1})
    second = build_matrix(1, 1, {})
    oracle = ScriptedValuations(1, 1, [first, second])
    assert [oracle.value(t, N0, M0) for t in range(1, 6)] == [1, 0, 1, 0, 1]
    with pytest.raises(UsageError):
        oracle.matrix(0)


def test_validate_oracle_accepts_declared_symmetric_binary():
    oracle = build_figure2()
    assert validate_oracle(oracle, 1, {"symmetric", "binary"}) is None


def test_validate_oracle_reports_asymmetry():
    mat = build_matrix(1, 1, {(N0, M0): 1})
    oracle = StaticValuations(1, 1, mat, Fraction(0), {"symmetric"})
    bad = validate_oracle(oracle, 1, {"symmetric"})
    assert bad.capability == "symmetric"
    assert bad.pair == (N0, M0)


def test_validate_oracle_reports_value_outside_binary():
    mat = build_matrix(1, 1, {(N0, M0): Fraction(1, 2)}, default=Fraction(1, 3))
    oracle = StaticValuations(1, 1, mat, Fraction(1, 3), {"binary"})
    bad = validate_oracle(oracle, 1, {"binary"})
    assert bad.capability == "binary"
    assert bad.pair == (N0, M0)


def test_validate_oracle_static_check():
    changing = ScriptedValuations(1, 1, [build_matrix(1, 1, {}), build_matrix(1, 1, {(N0, M0): 1})])
    # the whole script is inspected, so the violation shows up from t=1 on
    assert validate_oracle(changing, 1, {"static"}).detail == "values at t=2 differ from t=1"
    assert validate_oracle(changing, 2, {"static"}).capability == "static"
    constant = ScriptedValuations(1, 1, [build_matrix(1, 1, {})] * 3)
    assert validate_oracle(constant, 3, {"static"}) is None


# ---------------------------------------------------------------- ledgers


def test_zero_valuations_give_zero_entries_and_unit_sizes():
    oracle = StaticValuations(2, 2, build_matrix(2, 2, {}))
    ledger = apply_events(Ledger(2, 2), oracle, 1, [(0, 0), (1, 1)])
    for side in Side:
        assert ledger.values[side] == [[0, 0], [0, 0]]
        assert ledger.sizes[side] == [1, 1]


def test_figure2_round_values():
    a = Fraction(1, 2)
    oracle = build_figure2(a)
    # the matching {1,4}, {3,2}
    ledger = apply_events(Ledger(2, 2), oracle, 1, [(0, 1), (1, 0)])
    assert value_of(ledger, agent(1), agent(1)) == 1
    assert value_of(ledger, agent(1), agent(3)) == a
    assert value_of(ledger, agent(3), agent(3)) == 1


def test_dynamic_values_are_time_stamped():
    # v_2^1(3) = 1 and v_2^2(3) = 0; agent 4 is matched to 3 twice
    first = build_matrix(2, 2, {(agent(2), agent(3)): 1})
    second = build_matrix(2, 2, {})
    oracle = ScriptedValuations(2, 2, [first, second])
    ledger = Ledger(2, 2)
    apply_events(ledger, oracle, 1, [(1, 1), (0, 0)])
    apply_events(ledger, oracle, 2, [(1, 1), (0, 0)])
    assert value_of(ledger, agent(2), agent(4)) == 1


def test_value_of_fresh_and_repeated_matches():
    oracle = build_figure2()
    ledger = Ledger(2, 2)
    assert value_of(ledger, N0, N1) == 0
    apply_events(ledger, oracle, 1, [(0, 1), (1, 0)])
    apply_events(ledger, oracle, 2, [(0, 1), (1, 0)])
    # the same liked partner twice counts twice
    assert value_of(ledger, agent(1), agent(1)) == 2


def test_value_of_rejects_cross_side():
    with pytest.raises(UsageError):
        value_of(Ledger(2, 2), N0, M0)


def test_apply_events_rejects_gaps_and_duplicates():
    oracle = build_figure2()
    with pytest.raises(HistoryError):
        apply_events(Ledger(2, 2), oracle, 2, [(0, 0), (1, 1)])
    with pytest.raises(HistoryError):
        apply_events(Ledger(2, 2), oracle, 1, [(0, 0), (1, 0)])
    with pytest.raises(HistoryError):
        apply_events(Ledger(2, 2), oracle, 1, [(0, 0), (0, 1)])


def test_history_shape_rules():
    rounds = MatchHistory(2, 2, "per-round")
    with pytest.raises(HistoryError):
        rounds.append([(0, 0)])
    single = MatchHistory(2, 3, "per-match")
    single.append([(1, 2)])
    single.append([])
    with pytest.raises(HistoryError):
        single.append([(0, 0), (1, 1)])
    assert single.bundle(AgentId(Side.M, 2)) == [(1, 1)]
    assert single.t == 2


# ---------------------------------------------------------------- properties


@st.composite
def histories(draw, binary=False):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    horizon = draw(st.integers(0, 6))
    a = draw(st.sampled_from([Fraction(0), Fraction(1, 3), Fraction(1, 2)]))
    size = n + m

    def matrix():
        mat = [[Fraction(0)] * size for _ in range(size)]
        for g in range(size):
            for h in range(size):
                if (g < n) != (h < n):
                    if binary:
                        mat[g][h] = Fraction(1) if draw(st.booleans()) else a
                    else:
                        mat[g][h] = Fraction(draw(st.integers(0, 9)), draw(st.integers(1, 4)))
        return mat

    oracle = ScriptedValuations(n, m, [matrix() for _ in range(max(horizon, 1))], a)
    history = MatchHistory(n, m, "per-match")
    for _ in range(horizon):
        k = draw(st.integers(0, min(n, m)))
        left = draw(st.permutations(range(n)))[:k]
        right = draw(st.permutations(range(m)))[:k]
        history.rounds.append(tuple(zip(left, right)))
    return oracle, history


@settings(max_examples=150, deadline=None)
@given(histories())
def test_ledger_matches_definition(case):
    oracle, history = case
    ledger = replay(history, oracle)
    for side in Side:
        k = ledger.side_size(side)
        for i in range(k):
            for j in range(k):
                expected = sum((oracle.value(t, AgentId(side, i), AgentId(side.other, p))
                                for t, p in history.bundle(AgentId(side, j))), Fraction(0))
                assert ledger.values[side][i][j] == expected


@settings(max_examples=150, deadline=None)
@given(histories(binary=True))
def test_kappa_reconstructs_binary_values(case):
    oracle, history = case
    a = oracle.a
    ledger = replay(history, oracle)
    for side in Side:
        k = ledger.side_size(side)
        for i in range(k):
            for j in range(k):
                kap, size = ledger.kappa[side][i][j], ledger.sizes[side][j]
                assert kap <= size
                assert ledger.values[side][i][j] == kap + a * (size - kap)


@settings(max_examples=100, deadline=None)
@given(histories(), st.data())
def test_prefix_then_suffix_equals_whole(case, data):
    oracle, history = case
    cut = data.draw(st.integers(0, history.t))
    ledger = replay(history.prefix(cut), oracle)
    for t in range(cut + 1, history.t + 1):
        apply_events(ledger, oracle, t, history.rounds[t - 1])
    assert ledger.snapshot() == replay(history, oracle).snapshot()


# ---------------------------------------------------------------- instance files


def test_instance_round_trip(tmp_path):
    oracle = build_figure2()
    path = tmp_path / "fig2.json"
    save_instance(oracle, path)
    back = load_instance(path)
    assert back.matrix(1) == oracle.matrix(1)
    assert back.a == oracle.a
    assert back.capabilities == oracle.capabilities


def test_instance_json_shape():
    data = oracle_to_json(build_figure2())
    assert data["format"] == 1
    assert data["mode"] == "static"
    assert data["a"] == "1/2"
    assert data["values"][0][2] == "1/2"  # v_1(2) = a
    assert sorted(data["capabilities"]) == ["binary", "symmetric"]


def test_instance_rejects_bad_fields():
    with pytest.raises(UsageError):
        oracle_from_json({"format": 2, "n": 1, "m": 1, "mode": "static", "values": []})
    with pytest.raises(UsageError):
        oracle_from_json({"n": 1, "m": 1, "mode": "weird", "values": []})
    with pytest.raises(UsageError):
        oracle_from_json({"n": 1, "m": 1, "mode": "static"})
