from __future__ import annotations

import itertools

import pytest

from hyperhorn.composition import Composition, Schedule, schedules
from hyperhorn.formula import FALSE, TRUE, Var, compile_formula, parse_formula, print_formula
from hyperhorn.oracle import enumerate_system, valid_schedules
from hyperhorn.system import InputError, load_spec, load_system, parse_spec, parse_system, totalize


@pytest.fixture
def ss(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum.sys"))
    return Composition([ts], load_spec(fixtures / "squares_sum.spec", [ts]))


def test_schedules_order():
    assert [str(m) for m in schedules(2)] == ["{1}", "{2}", "{1,2}"]
    assert [str(m) for m in schedules(1)] == ["{1}"]
    assert len(schedules(3)) == 7
    assert [m.tag() for m in schedules(2)] == ["m1", "m2", "m1_2"]


def test_bad_constraint(ss):
    assert print_formula(ss.bad_constraint()) == "(and (>= a@1 b@1) (>= a@2 b@2) (not (> c@1 c@2)))"


def test_bad_is_false_for_true_phi(fixtures):
    ts = load_system(fixtures / "squares_sum.sys")
    spec = parse_spec("(spec (forall 2) (observe 1 true) (observe 2 true) (global true))", [ts])
    assert Composition([ts], spec).bad_constraint() == FALSE


def test_gni_bad(fixtures):
    ts = load_system(fixtures / "gni_masked.sys")
    comp = Composition([ts], load_spec(fixtures / "gni.spec", [ts]))
    text = print_formula(comp.bad_constraint())
    assert text.startswith("(and (= pc@1 1) (= pc@2 1) (= pc@3 1) (not (and (= h@1 h@3)")


def test_valid_constraints(ss):
    s1, _, s12 = schedules(2)
    assert print_formula(ss.valid_constraint(s1)) == "(not (>= a@1 b@1))"
    assert print_formula(ss.valid_constraint(s12)) == (
        "(or (and (not (>= a@1 b@1)) (not (>= a@2 b@2))) (and (>= a@1 b@1) (>= a@2 b@2)))"
    )


def test_valid_full_schedule_single_trace_is_tautology(fixtures):
    ts = load_system(fixtures / "squares_sum.sys")
    spec = parse_spec("(spec (forall 1) (observe 1 (>= a b)) (global true))", [ts])
    f = compile_formula(Composition([ts], spec).valid_constraint(Schedule((1,))))
    for a, b in itertools.product(range(3), repeat=2):
        assert f({Var("a", copy=1): a, Var("b", copy=1): b})


def test_delta_big_shapes(ss):
    s1, _, s12 = schedules(2)
    d1 = print_formula(ss.delta_big(s1))
    assert "(= a@2 a@2')" in d1 and "c@1'" in d1
    d12 = print_formula(ss.delta_big(s12))
    assert "c@1'" in d12 and "c@2'" in d12 and "(= a@2 a@2')" not in d12


def test_concrete_choice_forces_increment(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum_nondet.sys"))
    comp = Composition([ts], load_spec(fixtures / "squares_sum_nondet.spec", [ts]))
    d = compile_formula(comp.delta_concrete_choice(Schedule((2,)), ["i"]))
    env = {Var(n, copy=i): v for i in (1, 2) for n, v in zip("abc", (1, 3, 0))}
    env.update({Var(n, copy=1, primed=True): v for n, v in zip("abc", (1, 3, 0))})
    env.update({Var("a", copy=2, primed=True): 2, Var("b", copy=2, primed=True): 3})
    env[Var("l", copy=1)] = 0
    assert d({**env, Var("c", copy=2, primed=True): 1})
    assert not d({**env, Var("c", copy=2, primed=True): 0})
    with pytest.raises(InputError):
        comp.delta_concrete_choice(Schedule((2,)), ["q"])


def test_restriction_may_not_mention_primes_or_labels(ss):
    with pytest.raises(InputError):
        ss.allowed(Schedule((1,)), parse_formula("(> a@1' 0)", ss.vocab))


def test_allowed_trivial_cases(ss):
    assert ss.allowed(Schedule((1,)), FALSE) == FALSE


# ----------------------------------------------------- enumeration of delta_{M,p}

TOY = """(system
  (vars (x Int) (f Bool))
  (label (l Int))
  (init (= x 0))
  (tr (and (= x' (ite (= l 1) (ite (= x 3) 0 (+ x 1)) (ite (= l 2) 0 x)))
           (= f' (ite (= l 1) (not f) f)))))
"""
TOY_SPEC = """(spec (forall 1) (exists 1) (pre true)
  (observe 1 (< x 2)) (observe 2 (< x 2)) (global (= x@1 x@2)))"""
LABELS = (0, 1, 2)


def _toy():
    ts = totalize(parse_system(TOY))
    spec = parse_spec(TOY_SPEC, [ts])
    return ts, Composition([ts], spec)


def _states():
    return list(itertools.product(range(4), (False, True)))


def _env(comp, s1, s2, primed=False):
    env = {}
    for i, (x, f) in ((1, s1), (2, s2)):
        env[Var("x", copy=i, primed=primed)] = x
        env[Var("f", copy=i, primed=primed, sort=comp.vocab[1].sort)] = f
    return env


def _domains(v):
    if v.name == "l":
        return LABELS
    if v.name == "x":
        return range(4)
    return (False, True)


RESTRICTIONS = ["true", "false", "(= x@1 x@2)", "(and f@2 (= x@2 0))", "(< x@1 x@2)"]


@pytest.mark.parametrize("p_text", RESTRICTIONS)
def test_delta_restricted_matches_restrict_sharp(p_text):
    ts, comp = _toy()
    ex = enumerate_system(ts, {"x": range(4), "f": (False, True), "l": LABELS})
    p = parse_formula(p_text, comp.vocab)
    p_fn = compile_formula(p)
    for m in comp.schedules():
        d = compile_formula(comp.delta_restricted(m, p), _domains)
        for s1, s2 in itertools.product(_states(), repeat=2):
            for l1 in LABELS:
                base = {**_env(comp, s1, s2), Var("l", copy=1): l1}
                expected = set()
                every = set()
                for l2 in LABELS:
                    nxt = []
                    for i, (s, lab) in ((1, (s1, l1)), (2, (s2, l2))):
                        if i in m:
                            tgt = [ex.states[t] for lb, t in ex.succ[ex.index[s]] if lb == lab]
                        else:
                            tgt = [s]
                        nxt.append(tgt)
                    for t1, t2 in itertools.product(*nxt):
                        every.add((t1, t2))
                        if p_fn(_env(comp, t1, t2)):
                            expected.add((t1, t2))
                if not expected:
                    expected = every  # vacuous restrictions are lifted
                got = {
                    (t1, t2)
                    for t1, t2 in itertools.product(_states(), repeat=2)
                    if d({**base, **_env(comp, t1, t2, primed=True)})
                }
                assert got == expected
                assert got, "delta_{M,p} must have a successor"


def test_delta_restricted_true_equals_unrestricted():
    ts, comp = _toy()
    for m in comp.schedules():
        d_true = compile_formula(comp.delta_restricted(m, TRUE), _domains)
        from hyperhorn.formula import exists

        d_plain = compile_formula(exists(comp.exists_labels, comp.delta_big(m)), _domains)
        for s1, s2, t1, t2 in itertools.product(_states(), repeat=4):
            for l1 in LABELS:
                env = {**_env(comp, s1, s2), **_env(comp, t1, t2, primed=True), Var("l", copy=1): l1}
                assert d_true(env) == d_plain(env)


def test_valid_schedule_coverage_by_enumeration(fixtures):
    ts = totalize(load_system(fixtures / "squares_sum.sys"))
    comp = Composition([ts], load_spec(fixtures / "squares_sum.spec", [ts]))
    valids = {m: compile_formula(comp.valid_constraint(m)) for m in comp.schedules()}
    obs = [compile_formula(comp.obs(i)) for i in (1, 2)]
    for vals in itertools.product(range(4), repeat=4):
        env = {Var("a", copy=1): vals[0], Var("b", copy=1): vals[1], Var("a", copy=2): vals[2], Var("b", copy=2): vals[3]}
        chosen = [m.members for m, f in valids.items() if f(env)]
        assert chosen
        assert chosen == valid_schedules([bool(o(env)) for o in obs])
