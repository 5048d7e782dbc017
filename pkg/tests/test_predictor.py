import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.belief import Region
from semnav.gridworld import ROOM_NUMBER, SIGN_TEXT, GoalSpec, make_environment
from semnav.perception import AgentBelief, fuse, observe
from semnav.predictor import (
    ABSTAIN,
    AbstainingPredictor,
    ExternalPredictor,
    OraclePredictor,
    PredictionQuery,
    PredictorTimeout,
    ReplayMismatch,
    ReplayPredictor,
    RuleBasedPredictor,
    ScriptedPredictor,
    TranscriptLog,
    TransportError,
    UniformPredictor,
    load_transcript,
    parse_sign,
    query_to_wire,
    result_from_wire,
    rule_predict,
    true_region,
    uniform_predict,
)

from stub_server import StubServer

SIGN_RIGHT_LEFT = "Rooms 607–609, 611–615, 621 to the right; Rooms 631–633, 641, 646 to the left."
SIGN_UP = "Rooms 621–646 upwards."


@pytest.mark.parametrize(
    "text, goal, expected",
    [
        (SIGN_RIGHT_LEFT, "621", Region.RIGHT),
        (SIGN_RIGHT_LEFT, "646", Region.LEFT),
        (SIGN_RIGHT_LEFT, "612", Region.RIGHT),
        (SIGN_RIGHT_LEFT, "632", Region.LEFT),
        (SIGN_RIGHT_LEFT, "641L", Region.LEFT),
        (SIGN_RIGHT_LEFT, "610", None),
        (SIGN_RIGHT_LEFT, "700", None),
        (SIGN_UP, "641", Region.UP),
        ("Rooms 10-20 →", "12", Region.RIGHT),
        ("Rooms 10-20 →", "25", None),
        ("Rooms 5A, 6 downwards", "5B", None),
        ("Rooms 5A, 6 downwards", "5a", Region.DOWN),
        ("Rooms 5 setup", "5", None),
        ("Exit to the right", "5", None),
        ("", "5", None),
    ],
)
def test_parse_sign(text, goal, expected):
    assert parse_sign(text, goal) is expected


def test_parse_sign_garbage_goal_and_types():
    assert parse_sign(SIGN_RIGHT_LEFT, "lobby") is None
    assert parse_sign(None, "621") is None
    assert parse_sign(SIGN_RIGHT_LEFT.encode("utf-8"), "621") is Region.RIGHT


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200), st.text(max_size=8))
def test_parse_sign_never_raises(blob, goal):
    assert parse_sign(blob, goal) in (None, *Region)
    assert parse_sign(blob.decode("latin-1"), goal) in (None, *Region)


def _query(env, pos, goal, k=7):
    belief = fuse(AgentBelief.for_env(env), observe(env, pos, k))
    return PredictionQuery.from_belief(goal, pos, belief, k)


def _row_of_doors(numbers, start_col=0):
    cols = len(numbers) * 2 + 1
    top = ["#"] * cols
    env = make_environment(
        ["#" * cols, "." * cols], start=(1, 0),
        doors={(0, 1 + 2 * i): str(n) for i, n in enumerate(numbers)},
    )
    return env


def test_rule_uses_numbering_trend_along_columns():
    env = _row_of_doors([101, 103, 105, 107, 109, 111, 113, 115, 117, 119])
    q = _query(env, (1, 3), "119")
    result = rule_predict(q)
    assert result.region is Region.RIGHT
    assert "room numbers increase to the right" in result.patterns
    assert rule_predict(_query(env, (1, 16), "101", k=5)).region is Region.LEFT


def test_rule_abstains_without_evidence_or_on_match():
    env = _row_of_doors([101, 103, 105])
    assert rule_predict(_query(env, (1, 0), "110", k=1)).region is None
    q = _query(env, (1, 3), "103", k=7)
    # expected number at the agent's column equals the goal -> abstain
    assert rule_predict(q).region is None


def test_rule_prefers_nearest_sign_over_trend():
    env = make_environment(
        ["#######", "......."], start=(1, 0),
        doors={(0, 1): "101", (0, 3): "103", (0, 5): "105"},
        attributes={(1, 2): {SIGN_TEXT: "Rooms 150 to the left"}},
    )
    result = rule_predict(_query(env, (1, 3), "150"))
    assert result.region is Region.LEFT
    assert result.patterns == ("sign directive",)


def _bracketing_signs():
    # a vertical corridor; the upper sign says "down", the lower one "up"
    return make_environment(
        ["#.#", "#.#", "#.#", "#.#", "#.#", "#.#", "#.#"], start=(0, 1),
        attributes={
            (1, 1): {SIGN_TEXT: "Rooms 300-310 downwards"},
            (5, 1): {SIGN_TEXT: "Rooms 305-320 upwards"},
        },
    )


@pytest.mark.parametrize(
    "pos, expected",
    [((0, 1), Region.DOWN), ((1, 1), Region.DOWN), ((5, 1), Region.UP), ((6, 1), Region.UP)],
)
def test_rule_opposing_signs_bracket_the_goal(pos, expected):
    # each directive is relative to its own sign, so the goal lies in rows 2..4
    assert rule_predict(_query(_bracketing_signs(), pos, "307", k=15)).region is expected


@pytest.mark.parametrize("row", [2, 3, 4])
def test_rule_abstains_inside_a_sign_bracket(row):
    result = rule_predict(_query(_bracketing_signs(), (row, 1), "307", k=15))
    assert result.region is None and result.patterns == ("sign directive",)


def test_rule_signs_without_room_between_fall_back_to_nearest():
    env = make_environment(
        ["....."], start=(0, 0),
        attributes={(0, 1): {SIGN_TEXT: "Rooms 9 to the right"}, (0, 2): {SIGN_TEXT: "Rooms 9 to the left"}},
    )
    assert rule_predict(_query(env, (0, 0), "9", k=5)).region is Region.RIGHT
    assert rule_predict(_query(env, (0, 4), "9", k=9)).region is Region.LEFT


def test_rule_parity_bands():
    # odd rooms on the top wall, even rooms on the bottom wall, numbered left to right
    env = make_environment(
        ["#########", ".........", "#########"], start=(1, 0),
        doors={(0, 1): "101", (0, 3): "103", (0, 5): "105", (2, 2): "102", (2, 4): "104", (2, 6): "106"},
    )
    result = rule_predict(_query(env, (1, 4), "111", k=9))
    assert "odd/even separation" in result.patterns
    assert result.region is Region.RIGHT


def test_true_region_and_oracle(corridor):
    assert true_region((5, 5), (0, 5)) is Region.UP
    assert true_region((5, 5), (5, 9)) is Region.RIGHT
    assert true_region((5, 5), (8, 2)) is Region.LEFT  # column wins ties
    assert true_region((5, 5), (5, 5)) is None
    oracle = OraclePredictor.for_goal(corridor, "106")
    q = _query(corridor, (1, 0), "106", k=1)
    assert oracle.predict(q).region is Region.RIGHT
    assert OraclePredictor(GoalSpec("x", (0, 0))).target == (0, 0)


def test_uniform_predictor_is_seeded(corridor):
    q = _query(corridor, (1, 0), "106")
    a = [UniformPredictor(4).predict(q).region for _ in range(1)]
    p1, p2 = UniformPredictor(4), UniformPredictor(4)
    seq1 = [p1.predict(q).region for _ in range(20)]
    seq2 = [p2.predict(q).region for _ in range(20)]
    assert seq1 == seq2 and len(set(seq1)) > 1
    assert uniform_predict(q, 4, 0).region is a[0]


def test_scripted_and_abstaining(corridor):
    q = _query(corridor, (1, 0), "106")
    p = ScriptedPredictor(["up", None, Region.LEFT])
    assert [p.predict(q).region for _ in range(4)] == [Region.UP, None, Region.LEFT, None]
    assert AbstainingPredictor().predict(q) == ABSTAIN


def test_wire_format(corridor):
    q = _query(corridor, (1, 0), "106", k=3)
    wire = query_to_wire(q)
    assert wire["goal"] == "106" and wire["agent"] == [1, 0] and wire["k"] == 3
    assert wire["seen_occupancy"][1][:3] == "00-"
    assert {"cell": [0, 1], ROOM_NUMBER: "101"} in wire["semantics"]
    json.dumps(wire)
    assert result_from_wire({"region": "left", "reasoning": "r", "patterns": ["p"]}).region is Region.LEFT
    odd = result_from_wire({"region": "northwest"})
    assert odd.region is None and "northwest" in odd.reasoning
    with pytest.raises(TransportError):
        result_from_wire(["left"])


def test_external_predictor_roundtrip_and_replay(corridor, tmp_path):
    answers = iter([{"region": "right", "reasoning": "signs"}, {"region": "bogus"}])
    with StubServer(lambda req: next(answers)) as server:
        log = TranscriptLog(tmp_path / "t.ndjson")
        ext = ExternalPredictor(server.url, timeout=5, transcript=log)
        q = _query(corridor, (1, 0), "106")
        assert ext.predict(q).region is Region.RIGHT
        assert ext.predict(q).region is None
        assert server.requests[0] == query_to_wire(q)
    records = load_transcript(tmp_path / "t.ndjson")
    assert [r["t"] for r in records] == [0, 1]
    replay = ReplayPredictor(records)
    assert replay.predict(q).region is Region.RIGHT
    assert replay.predict(q).region is None
    with pytest.raises(ReplayMismatch):
        replay.predict(q)
    other = _query(corridor, (1, 2), "106")
    with pytest.raises(ReplayMismatch):
        ReplayPredictor(records).predict(other)


def test_external_failures_are_typed_and_recorded(corridor):
    q = _query(corridor, (1, 0), "106")
    with StubServer(lambda req: 500) as server:
        log = TranscriptLog()
        with pytest.raises(TransportError):
            ExternalPredictor(server.url, timeout=5, transcript=log).predict(q)
        assert log.records[0]["response"]["error"] == "TransportError"
        with pytest.raises(TransportError):
            ReplayPredictor(log.records).predict(q)
    with StubServer(lambda req: b"not json") as server:
        with pytest.raises(TransportError):
            ExternalPredictor(server.url, timeout=5).predict(q)
    with StubServer(lambda req: {"region": "up"}, delay=1.0) as server:
        log = TranscriptLog()
        with pytest.raises(PredictorTimeout):
            ExternalPredictor(server.url, timeout=0.2, transcript=log).predict(q)
        with pytest.raises(PredictorTimeout):
            ReplayPredictor(log.records).predict(q)
    with pytest.raises(TransportError):
        ExternalPredictor("http://127.0.0.1:9/none", timeout=2).predict(q)


def test_rule_predictor_class_wraps_function(corridor):
    q = _query(corridor, (1, 0), "106")
    assert RuleBasedPredictor().predict(q) == rule_predict(q)
