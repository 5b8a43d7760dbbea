from __future__ import annotations

import random

import pytest
from conftest import requires_solver
from generators import random_bool_scheme

from hyperhorn.abstraction import abstract_horn, check_predicates, eq_preds, monotonicity_queries
from hyperhorn.backend import SolverConfig, check_many
from hyperhorn.formula import BOOL, Op, Var, free_vars, parse_formula
from hyperhorn.horn import lint_horn, transform
from hyperhorn.oracle import horn_sat_finite
from hyperhorn.scheme import build_ksafety_scheme
from hyperhorn.system import InputError, load_spec, load_system, parse_formula_list, totalize


@pytest.fixture
def ss(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum.sys"))
    s = build_ksafety_scheme([ts], load_spec(fixtures / "squares_sum.spec", [ts]))
    preds = parse_formula_list((fixtures / "squares_sum.preds").read_text(), "predicates", s.v_vocab)
    return s, preds


def test_predicate_checks(ss):
    s, preds = ss
    assert len(preds) == 9
    check_predicates(preds, s.v_vocab)
    with pytest.raises(InputError, match="empty"):
        check_predicates([], s.v_vocab)
    with pytest.raises(InputError, match="outside"):
        check_predicates([parse_formula("(> z 0)", [Var("z")])], s.v_vocab)
    with pytest.raises(InputError, match="not Boolean"):
        check_predicates([s.v_vocab[0]], s.v_vocab)


def test_only_consecution_is_abstracted(ss):
    s, preds = ss
    h = transform(s)
    ah = abstract_horn(h, preds, s.v_vocab)
    assert lint_horn(ah) == []
    for c, a in zip(h.clauses, ah.clauses):
        if c.provenance.startswith("consecution"):
            assert a.provenance.endswith("+abs")
            assert len(a.universals) == len(c.universals) + 2 * len(s.v_vocab)
            hats = set(a.universals) - set(c.universals)
            assert hats <= set(free_vars(a.constraint))
            assert a.body == c.body and a.head == c.head
        else:
            assert a == c
    assert ah.notes[-1].startswith("implicit predicate abstraction over 9")


def test_eq_preds_shape():
    x, y = Var("x"), Var("y")
    p = parse_formula("(> x 0)", [x])
    e = eq_preds([p], {x: y})
    assert isinstance(e, Op) and e.op == "="
    assert set(free_vars(e)) == {x, y}


@requires_solver
def test_monotonicity_queries_valid(ss, tmp_path):
    s, preds = ss
    queries = monotonicity_queries(transform(s), preds, s.v_vocab)
    assert len(queries) == 3
    res = check_many([q for _, q in queries], SolverConfig(timeout=60, workdir=tmp_path), "mono")
    assert [r.status for r in res] == ["valid"] * 3


def test_full_atomic_predicates_are_precise():
    """Abstracting with every state variable as a predicate changes no verdict."""
    rng = random.Random(3)
    for _ in range(25):
        s = random_bool_scheme(rng)
        h = transform(s)
        preds = [v for v in s.v_vocab if v.sort == BOOL]
        ah = abstract_horn(h, preds, s.v_vocab, s.w_vocab)
        assert horn_sat_finite(ah) == horn_sat_finite(h)


def test_coarse_abstraction_is_sound():
    """Abstraction only ever loses satisfiability (its models are models of the concrete system)."""
    rng = random.Random(5)
    for _ in range(25):
        s = random_bool_scheme(rng)
        h = transform(s)
        ah = abstract_horn(h, [s.v_vocab[0]], s.v_vocab, s.w_vocab)
        if horn_sat_finite(ah):
            assert horn_sat_finite(h)
