"""The small hand-drawn instances used throughout the tests and reproductions.

Each one is bundled as an instance file under ``fairmatch/data``; the
``build_*`` functions construct the same instances directly from their like
lists so the files can be regenerated and cross-checked.

Agent numbering: the odd-numbered agents 1, 3, 5, ... of the drawings form
side N (indices 0, 1, 2, ...) and the even-numbered agents 2, 4, 6, ... form
side M (indices 0, 1, 2, ...).
"""
from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources

from .core import (
    AgentId,
    ScriptedValuations,
    Side,
    StaticValuations,
    UsageError,
    ValuationOracle,
    build_matrix,
    oracle_from_json,
)

NAMES = ("figure1", "figure2", "figure3", "figure4")


def agent(label: int) -> AgentId:
    """Map a drawing label (1, 2, 3, ...) to an :class:`AgentId`."""
    if label < 1:
        raise UsageError("labels start at 1")
    return AgentId(Side.N, (label - 1) // 2) if label % 2 else AgentId(Side.M, label // 2 - 1)


def _likes(pairs, value=1) -> dict:
    return {(agent(i), agent(j)): Fraction(value) for i, j in pairs}


def _mutual(pairs) -> list[tuple[int, int]]:
    return [p for i, j in pairs for p in ((i, j), (j, i))]


def build_figure1() -> ValuationOracle:
    """2x2, symmetric, a = 0: agents 1 and 3 both like agent 2, nothing else."""
    mat = build_matrix(2, 2, _likes(_mutual([(1, 2), (3, 2)])), 0)
    return StaticValuations(2, 2, mat, Fraction(0), {"binary", "binary01", "symmetric"})


def build_figure2(a: Fraction = Fraction(1, 2)) -> ValuationOracle:
    """2x2, symmetric: v_1(2) = a and every other cross pair is liked."""
    mat = build_matrix(2, 2, _likes(_mutual([(1, 4), (3, 2), (3, 4)])), a)
    caps = {"binary", "symmetric"} | ({"binary01"} if a == 0 else set())
    return StaticValuations(2, 2, mat, Fraction(a), caps)


def build_figure3() -> ValuationOracle:
    """2x2 dynamic, a = 0.  t = 1: 1->2, 2->3, 3->4, 4->1.
    t = 2: 1<->2, 3->2, 4->1.  Later timesteps repeat the pattern."""
    first = build_matrix(2, 2, _likes([(1, 2), (2, 3), (3, 4), (4, 1)]), 0)
    second = build_matrix(2, 2, _likes([(1, 2), (2, 1), (3, 2), (4, 1)]), 0)
    return ScriptedValuations(2, 2, [first, second], Fraction(0), {"binary", "binary01"})


def build_figure4() -> ValuationOracle:
    """3x3 static, a = 0: 1->4, 3->4, 4->5, 5->6, 6->1, 6->3, 2->1, 2->3."""
    likes = [(1, 4), (3, 4), (4, 5), (5, 6), (6, 1), (6, 3), (2, 1), (2, 3)]
    return StaticValuations(3, 3, build_matrix(3, 3, _likes(likes), 0), Fraction(0),
                            {"binary", "binary01"})


BUILDERS = {"figure1": build_figure1, "figure2": build_figure2,
            "figure3": build_figure3, "figure4": build_figure4}


def load_fixture(name: str) -> ValuationOracle:
    if name not in NAMES:
        raise UsageError(f"unknown fixture {name!r}; choose from {NAMES}")
    text = resources.files("fairmatch").joinpath("data").joinpath(f"{name}.json").read_text()
    return oracle_from_json(json.loads(text))


def figure1() -> ValuationOracle:
    return load_fixture("figure1")


def figure2() -> ValuationOracle:
    return load_fixture("figure2")


def figure3() -> ValuationOracle:
    return load_fixture("figure3")


def figure4() -> ValuationOracle:
    return load_fixture("figure4")
