"""Implicit predicate abstraction of the consecution clauses of a Horn system.

A consecution constraint ``delta(V, V')`` becomes

    EQ(V, Vh) and delta(Vh, Vh') and EQ(Vh', V')

where ``EQ(X, Y)`` states that every user predicate has the same truth value
on ``X`` and ``Y``.  The hatted copies are fresh clause-level universals.
Initiation, safety and validity clauses stay concrete.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from hyperhorn.formula import (
    BOOL,
    Term,
    Var,
    all_vars,
    and_,
    check_sorts,
    free_vars,
    iff,
    implies,
    pred_apps,
    substitute,
)
from hyperhorn.horn import HornClause, HornSystem
from hyperhorn.system import InputError


def check_predicates(preds: Sequence[Term], v_vocab: Sequence[Var], w_vocab: Sequence[Var] = ()) -> None:
    if not preds:
        raise InputError("the predicate set is empty")
    allowed = set(v_vocab) | set(w_vocab)
    for p in preds:
        if pred_apps(p):
            raise InputError(f"abstraction predicate {p} applies an unknown predicate")
        if check_sorts(p) != BOOL:
            raise InputError(f"abstraction predicate {p} is not Boolean")
        stray = [v for v in free_vars(p) if v not in allowed]
        if stray:
            raise InputError(
                f"abstraction predicate {p} mentions {', '.join(map(str, stray))} outside the composed vocabulary"
            )


def hat(v: Var, taken: set[tuple]) -> Var:
    n = 0
    while True:
        name = f"{v.name}__h" if n == 0 else f"{v.name}__h{n}"
        cand = Var(name, v.sort, v.copy, v.primed)
        if cand.key not in taken:
            return cand
        n += 1


def eq_preds(preds: Sequence[Term], mapping: dict[Var, Var]) -> Term:
    """EQ(X, Xh): each predicate agrees on X and its image under ``mapping``."""
    return and_(*(iff(p, substitute(p, mapping)) for p in preds))


def abstract_clause(
    c: HornClause, preds: Sequence[Term], v_vocab: Sequence[Var]
) -> tuple[HornClause, tuple[Var, ...]]:
    vp = [v.prime() for v in v_vocab]
    taken = {x.key for x in all_vars(c.constraint)} | {x.key for x in c.universals}
    hats: dict[Var, Var] = {}
    for v in (*v_vocab, *vp):
        h = hat(v, taken)
        taken.add(h.key)
        hats[v] = h
    pre_map = {v: hats[v] for v in v_vocab}
    post_map = {v.prime(): hats[v.prime()] for v in v_vocab}
    primed_preds = [substitute(p, {v: v.prime() for v in v_vocab}) for p in preds]
    constraint = and_(
        eq_preds(preds, pre_map),
        substitute(c.constraint, {**pre_map, **post_map}),
        eq_preds(primed_preds, post_map),
    )
    new_vars = tuple(hats[v] for v in (*v_vocab, *vp))
    universals = c.universals + tuple(x for x in new_vars if x not in c.universals)
    return replace(c, universals=universals, constraint=constraint, provenance=c.provenance + "+abs"), new_vars


def abstract_horn(
    h: HornSystem, preds: Sequence[Term], v_vocab: Sequence[Var], w_vocab: Sequence[Var] = ()
) -> HornSystem:
    check_predicates(preds, v_vocab, w_vocab)
    if not h.scheme_derived:
        raise InputError("abstraction expects a scheme-derived Horn system")
    clauses = []
    for c in h.clauses:
        if c.provenance.startswith("consecution"):
            clauses.append(abstract_clause(c, preds, v_vocab)[0])
        else:
            clauses.append(c)
    note = f"implicit predicate abstraction over {len(preds)} predicates"
    return replace(h, clauses=tuple(clauses), notes=h.notes + (note,))


def monotonicity_queries(
    concrete: HornSystem, preds: Sequence[Term], v_vocab: Sequence[Var]
) -> list[tuple[str, Term]]:
    """Per consecution clause: the concrete constraint implies its abstraction.

    The existential over the hatted copies is discharged by instantiating
    them with the concrete variables, which keeps each query quantifier-free.
    """
    out = []
    vs = (*v_vocab, *(v.prime() for v in v_vocab))
    for c in concrete.clauses:
        if not c.provenance.startswith("consecution"):
            continue
        ac, hats = abstract_clause(c, preds, v_vocab)
        witness = substitute(ac.constraint, dict(zip(hats, vs)))
        out.append((c.provenance, implies(c.constraint, witness)))
    return out
