from __future__ import annotations

import json

import pytest
from conftest import requires_solver

from hyperhorn.backend import SolverConfig
from hyperhorn.formula import FALSE, Var, parse_formula
from hyperhorn.horn import Definition, transform
from hyperhorn.scheme import GAME_FINITE, GAME_RESTRICTED, KSAFETY, build_game_finite_scheme, build_ksafety_scheme
from hyperhorn.system import load_spec, load_system, totalize
from hyperhorn.verdict import (
    INCONCLUSIVE,
    VERIFIED,
    VIOLATED,
    Verdict,
    decide_verdict,
    reconstruct_witness,
    report_dict,
    report_json,
    report_text,
    validate_solution,
    validate_witness,
)


@pytest.mark.parametrize(
    "status, mode, abstracted, kind",
    [
        ("sat", KSAFETY, False, VERIFIED),
        ("sat", GAME_RESTRICTED, True, VERIFIED),
        ("unsat", KSAFETY, False, VIOLATED),
        ("unsat", GAME_FINITE, False, VIOLATED),
        ("unsat", GAME_RESTRICTED, False, INCONCLUSIVE),
        ("unsat", KSAFETY, True, INCONCLUSIVE),
        ("timeout", KSAFETY, False, INCONCLUSIVE),
        ("unknown", GAME_FINITE, False, INCONCLUSIVE),
    ],
)
def test_decide_verdict(status, mode, abstracted, kind):
    v = decide_verdict(status, mode, abstracted)
    assert v.kind == kind
    assert v.exit_code == {VERIFIED: 0, VIOLATED: 1, INCONCLUSIVE: 2}[kind]


def test_inconclusive_reasons():
    assert "abstraction incomplete" in decide_verdict("unsat", KSAFETY, True).reason
    assert "restriction incomplete" in decide_verdict("unsat", GAME_RESTRICTED, False).reason


@pytest.fixture
def nondet(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum_nondet.sys"))
    return build_game_finite_scheme([ts], load_spec(fixtures / "squares_sum_nondet.spec", [ts]))


def test_witness_quantifies_w(nondet):
    params = nondet.v_vocab + nondet.w_vocab
    sol = {f"D_{t}": Definition(params, FALSE) for t in nondet.tags}
    w = reconstruct_witness(sol, nondet)
    assert "forall" in str(w.invariant.body)
    assert w.notes and "l@1" in w.notes[0]
    assert set(w.arbiter) == set(nondet.tags)


def test_report_formats():
    v = Verdict(VIOLATED, "the initial states are doomed for every choice")
    doc = report_dict(v, mode=KSAFETY, abstracted=False, solver_status="unsat", timings={"solve": 0.5})
    assert doc["counterexample"].startswith("not reconstructed")
    assert json.loads(report_json(doc))["verdict"] == "violated"
    text = report_text(doc)
    assert text.startswith("verdict: VIOLATED\n") and "time[solve]: 0.500s" in text


@pytest.fixture
def ss(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum.sys"))
    return build_ksafety_scheme([ts], load_spec(fixtures / "squares_sum.spec", [ts]))


@requires_solver
def test_validation_rejects_bogus_witness(ss, tmp_path):
    """D_u := false everywhere makes Inv = true, which violates safety."""
    sol = {f"D_{t}": Definition(ss.v_vocab, FALSE) for t in ss.tags}
    cfg = SolverConfig(timeout=30, workdir=tmp_path)
    report = validate_witness(reconstruct_witness(sol, ss), ss, cfg)
    assert not report.ok
    assert "safety" in [r.name for r in report.failures()]
    clause_report = validate_solution(sol, transform(ss), cfg)
    assert not clause_report.ok


@requires_solver
def test_validation_accepts_trivial_witness(tmp_path):
    """A system whose bad states are unreachable by construction: Inv = not Bad works."""
    from hyperhorn.composition import Schedule
    from hyperhorn.scheme import ChoiceTag, SchemeSystem

    x = Var("x")
    s = SchemeSystem(
        (x,),
        (),
        (ChoiceTag(Schedule((1,))),),
        parse_formula("(= x 0)", [x]),
        parse_formula("(< x 0)", [x]),
        {"m1": FALSE},
        {"m1": parse_formula("(= x' (+ x 1))", [x, x.prime()])},
        KSAFETY,
    )
    sol = {"D_m1": Definition((x,), parse_formula("(< x 0)", [x]))}
    cfg = SolverConfig(timeout=30, workdir=tmp_path)
    assert validate_witness(reconstruct_witness(sol, s), s, cfg).ok
    assert validate_solution(sol, transform(s), cfg).ok
