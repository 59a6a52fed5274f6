"""Acceptance criteria, one test each.

The terminal summary prints a PASS/FAIL line per criterion (see conftest).
"""

import json
import subprocess
import sys

import pytest

from sessionweave.analysis import INFINITY, depth
from sessionweave.cli import main
from sessionweave.dsl import parse_communication, parse_file, parse_global_type, parse_session
from sessionweave.typecheck import (
    INACTIVITY_VIOLATION,
    LOOP_RULE,
    READY_SET_MISMATCH,
    Derivation,
    Judgement,
    TypeFailure,
    check_untypable_exhaustive,
    recheck_derivation,
    typecheck,
)
from sessionweave.typesem import TypeConfig, type_steps
from sessionweave.verify import (
    PASS,
    ExplorationBound,
    check_lock_freedom,
    check_session_fidelity,
    check_subject_reduction,
    find_races,
)

from tests import test_analysis, test_queues, test_typesem
from tests.conftest import CORPUS, ROOT, corpus_files

CONFLUENT_SESSION = "p := r!l; end\nq := r!l2; end\nr := (p?l; q?l2; end + q?l2; p?l; end)\nqueue []"
SUFFIX_SESSION = "q := r!l2; end\nr := (p?l; q?l2; end + q?l2; p?l2; end)\nqueue [p->r:l]"


def judge(g: str, s: str):
    return typecheck(Judgement.of(parse_global_type(g), parse_session(s)))


@pytest.mark.criterion(1, "typability verdicts of the confluent race examples")
def test_criterion_1():
    # (a) the race itself
    d = judge("p!r.l; q!r.l2; r?{p.l; r?q.l2; End, q.l2; r?p.l; End}", CONFLUENT_SESSION)
    assert isinstance(d, Derivation) and recheck_derivation(d) == []
    # (b) the suffix against type (*) and against its forward-output variant
    star = judge("r?{p.l; q!r.l2; r?q.l2; End, q.l2; q!r.l2; r?p.l2; End}", SUFFIX_SESSION)
    assert isinstance(star, TypeFailure) and star.reason == INACTIVITY_VIOLATION
    fwd = judge("q!r.l2; r?{p.l; r?q.l2; End, q.l2; r?p.l2; End}", SUFFIX_SESSION)
    assert isinstance(fwd, TypeFailure) and fwd.reason == READY_SET_MISMATCH
    # (c) the recursive version closes with coinductive loops
    rec = judge(
        "G := p!r.l; q!r.l2; r?{p.l; r?q.l2; G, q.l2; r?p.l; G}",
        "P := r!l; P\nQ := r!l2; Q\nR := (p?l; q?l2; R + q?l2; p?l; R)\np := P\nq := Q\nr := R\nqueue []",
    )
    assert isinstance(rec, Derivation) and recheck_derivation(rec) == []
    assert any(n.rule == LOOP_RULE for n in rec.iter_nodes())


@pytest.mark.criterion(2, "fake race typechecks and has no races at k=12")
def test_criterion_2():
    src = parse_file(CORPUS / "typable/fake_race.mps")
    g = parse_global_type(
        """
        G := p!q.a; q!p.a; p?q.a; q?p.a; p!{q.l; G1, q.l2; G2}
        G1 := p!r.b; q?p.l; r?{p.b; End, q.b; End}
        G2 := q?p.l2; q!r.b; r?{p.b; End, q.b; End}
        """
    )
    assert g is src.expected_type
    j = Judgement.of(g, src.session)
    d = typecheck(j)
    assert isinstance(d, Derivation) and recheck_derivation(d) == []
    assert find_races(j, ExplorationBound(k=12)) == []


@pytest.mark.criterion(3, "depth example values")
def test_criterion_3():
    src = parse_file(CORPUS / "analysis/depth_example.mps")
    g, h = src.definitions["G"], src.definitions["H"]
    assert [depth(g, p) for p in "pqr"] == [3, 2, 1]
    assert [depth(h, p) for p in "pqr"] == [1, 2, INFINITY]


@pytest.mark.criterion(4, "inside rules: blocked and interleaved outputs")
def test_criterion_4():
    avoided = TypeConfig(
        parse_global_type("p!{q.l; q?p.l; r!p.l; p?r.l; End, q.l2; q?p.l2; r!p.l2; p?r.l2; End}")
    )
    assert parse_communication("r!p.l") not in {s.communication for s in type_steps(avoided)}
    interleaved = TypeConfig(parse_global_type("p!q.l; r!s.l2; End"))
    assert parse_communication("r!s.l2") in {s.communication for s in type_steps(interleaved)}


@pytest.mark.criterion(5, "four-party network untypable and simulated into a stuck state")
def test_criterion_5(capsys, monkeypatch):
    src = parse_file(CORPUS / "untypable/four_party_deadlock.mps")
    verdict = check_untypable_exhaustive(src.session)
    assert not verdict.typable and verdict.complete
    monkeypatch.chdir(ROOT)
    assert main(["simulate", "corpus/untypable/four_party_deadlock.mps", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    stuck = [e for e in data["end_states"] if e["end"] == "stuck"]
    assert any(e["final"] == "r::p?d; end || []" for e in stuck)


@pytest.mark.criterion(6, "SR, SF and LF on every typable corpus file at k=8")
@pytest.mark.parametrize("path", corpus_files("typable"), ids=lambda p: p.name)
def test_criterion_6(path):
    src = parse_file(path)
    j = Judgement.of(src.expected_type, src.session)
    d = typecheck(j)
    assert isinstance(d, Derivation)
    assert recheck_derivation(d) == []
    bound = ExplorationBound(k=8)
    for rep in (check_subject_reduction(j, bound), check_session_fidelity(j, bound), check_lock_freedom(j, bound)):
        assert rep.status == PASS, (rep.property, rep.counterexample)


def test_corpus_size():
    files = corpus_files("typable")
    assert sum(f.name.startswith("gen_") for f in files) >= 10
    assert len(files) >= 14


PROPERTIES = [
    test_queues.test_normalize_is_idempotent,
    test_queues.test_normalize_preserves_channel_order,
    test_queues.test_rm_matches_oracle,
    test_analysis.test_depth_matches_path_oracle,
    test_analysis.test_inactive_monotone,
    test_typesem.test_boundedness_preserved_random,
    test_typesem.test_boundedness_preserved_along_runs,
]


@pytest.mark.criterion(7, "property tests with 1000 cases each")
@pytest.mark.parametrize("prop", PROPERTIES, ids=lambda f: f.__name__)
def test_criterion_7(prop):
    assert prop.hypothesis.inner_test  # a hypothesis property
    assert prop._hypothesis_internal_use_settings.max_examples >= 1000
    prop()


@pytest.mark.criterion(8, "verify --corpus JSON is byte-identical across runs")
def test_criterion_8():
    cmd = [sys.executable, "-m", "sessionweave.cli", "verify", "--corpus", "--format", "json"]
    runs = [subprocess.run(cmd, cwd=ROOT, capture_output=True, check=False) for _ in range(2)]
    assert runs[0].returncode == 0, runs[0].stdout[-2000:]
    assert runs[0].stdout == runs[1].stdout
    assert b"time" not in runs[0].stdout
