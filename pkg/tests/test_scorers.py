from __future__ import annotations

import json
import re
import subprocess
import sys

import pytest

from gazeground.metrics.scorers import ScorerError, ScorerSpec, invoke_external_scorer
from gazeground.mock_scorer import best_unigram_f1, unigram_f1

MOCK_CMD = [sys.executable, "-m", "gazeground.mock_scorer"]


def spec(**kw) -> ScorerSpec:
    defaults = dict(metric="unigram_f1", transport="subprocess", command=MOCK_CMD,
                    batch_size=64, classification="clinical")
    defaults.update(kw)
    return ScorerSpec(**defaults)


# --- mock scorer definition (hand-computed fixtures) -------------------------

def test_unigram_f1_hand_computed():
    # cand {a,b,c} vs ref {a,b,d}: overlap 2, P = R = 2/3, F = 2/3.
    assert unigram_f1("a b c", "a b d") == pytest.approx(2 / 3)
    # cand 4 tokens, ref 6 tokens, overlap {the, scan, effusion} = 3:
    # P = 3/4, R = 1/2, F = 0.6.
    assert unigram_f1("the scan shows effusion", "effusion is seen in the scan") == pytest.approx(0.6)
    assert unigram_f1("a a b", "a c") == pytest.approx(2 * (1 / 3) * (1 / 2) / (1 / 3 + 1 / 2))
    assert unigram_f1("", "anything") == 0.0
    assert unigram_f1("x y", "p q") == 0.0


def test_best_unigram_f1_takes_max_over_references():
    assert best_unigram_f1("a b", ["c d", "a b", "a x"]) == 1.0
    assert best_unigram_f1("a b", []) == 0.0


# --- subprocess transport ------------------------------------------------------

def test_subprocess_scorer_deterministic_known_outputs():
    batch = [
        ("a b c", ["a b d"]),
        ("the scan shows effusion", ["effusion is seen in the scan"]),
        ("identical text", ["identical text"]),
    ]
    scores = invoke_external_scorer(spec(), batch)
    assert scores == pytest.approx([2 / 3, 0.6, 1.0])
    assert invoke_external_scorer(spec(), batch) == scores


def test_empty_batch_is_empty_result():
    assert invoke_external_scorer(spec(), []) == []


def test_chunked_batches_preserve_order():
    batch = [(f"tok{i}", [f"tok{i}"]) for i in range(7)]
    scores = invoke_external_scorer(spec(batch_size=3), batch)
    assert scores == [1.0] * 7


def test_out_of_order_responses_rematched_by_id():
    reverser = (
        "import sys, json\n"
        "lines = [l for l in sys.stdin if l.strip()]\n"
        "for l in reversed(lines):\n"
        "    req = json.loads(l)\n"
        "    print(json.dumps({'id': req['id'], 'score': float(len(req['candidate']))}))\n"
    )
    s = spec(command=[sys.executable, "-c", reverser])
    scores = invoke_external_scorer(s, [("a", ["x"]), ("bbb", ["x"]), ("cc", ["x"])])
    assert scores == [1.0, 3.0, 2.0]


def test_malformed_response_raises_with_partial():
    half_bad = (
        "import sys, json\n"
        "lines = [l for l in sys.stdin if l.strip()]\n"
        "req = json.loads(lines[0])\n"
        "print(json.dumps({'id': req['id'], 'score': 0.5}))\n"
        "print('this is not json')\n"
    )
    s = spec(command=[sys.executable, "-c", half_bad])
    with pytest.raises(ScorerError) as exc_info:
        invoke_external_scorer(s, [("a", ["x"]), ("b", ["y"])])
    assert exc_info.value.partial == {"item-000000": 0.5}


def test_scorer_crash_raises():
    s = spec(command=[sys.executable, "-c", "import sys; sys.exit(3)"])
    with pytest.raises(ScorerError, match="exited 3"):
        invoke_external_scorer(s, [("a", ["x"])])


def test_missing_ids_detected():
    silent = spec(command=[sys.executable, "-c", "pass"])
    with pytest.raises(ScorerError, match="missing"):
        invoke_external_scorer(silent, [("a", ["x"])])


def test_unknown_id_detected():
    wrong_id = (
        "import sys, json\n"
        "for l in sys.stdin:\n"
        "    if l.strip():\n"
        "        print(json.dumps({'id': 'bogus', 'score': 1.0}))\n"
    )
    s = spec(command=[sys.executable, "-c", wrong_id])
    with pytest.raises(ScorerError, match="unknown id"):
        invoke_external_scorer(s, [("a", ["x"])])


# --- http transport --------------------------------------------------------------

@pytest.fixture
def http_scorer():
    proc = subprocess.Popen(
        MOCK_CMD + ["--http", "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
    )
    line = proc.stdout.readline()
    match = re.search(r"http://127\.0\.0\.1:(\d+)/score", line)
    assert match, f"mock scorer did not announce a port: {line!r}"
    yield f"http://127.0.0.1:{match.group(1)}"
    proc.terminate()
    proc.wait(timeout=5)


def test_http_transport_matches_subprocess(http_scorer):
    batch = [("a b c", ["a b d"]), ("x", ["x"])]
    via_http = invoke_external_scorer(
        spec(transport="http", url=http_scorer, command=[]), batch
    )
    via_subprocess = invoke_external_scorer(spec(), batch)
    assert via_http == pytest.approx(via_subprocess)


# --- spec validation ---------------------------------------------------------------

def test_fixed_metric_classifications_enforced():
    with pytest.raises(Exception, match="clinical"):
        ScorerSpec(metric="radgraph_xl", transport="subprocess", command=MOCK_CMD,
                   classification="lexical")
    with pytest.raises(Exception, match="lexical"):
        ScorerSpec(metric="bertscore", transport="subprocess", command=MOCK_CMD,
                   classification="clinical")
    ScorerSpec(metric="ratescore", transport="subprocess", command=MOCK_CMD,
               classification="clinical")


def test_wire_format_is_one_json_object_per_line():
    from gazeground.metrics.scorers import _encode_requests

    body, ids = _encode_requests([("cand", ["r1", "r2"])], 0)
    lines = body.strip().splitlines()
    assert len(lines) == 1
    obj = json.loads(lines[0])
    assert set(obj) == {"id", "candidate", "references"}
    assert obj["references"] == ["r1", "r2"]
    assert ids == [obj["id"]]
