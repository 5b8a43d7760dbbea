"""Transformation of a scheme system into constrained Horn clauses over doomed-state predicates.

For every choice ``u`` an unknown ``D_u(V, W)`` describes the states that are
doomed once ``u`` is chosen.  The transformed system has ``1 + 3|U|``
clauses; solutions translate in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from hyperhorn.formula import (
    FALSE,
    Op,
    PredApp,
    Quant,
    Term,
    Var,
    and_,
    all_vars,
    apply_definitions,
    forall,
    free_vars,
    fresh_var,
    iff,
    implies,
    not_,
    or_,
    pred_apps,
    substitute,
)
from hyperhorn.scheme import INV, SchemeSystem, arbiter_name, obligations


@dataclass(frozen=True)
class HornClause:
    universals: tuple[Var, ...]
    body: tuple[PredApp, ...]
    constraint: Term
    head: PredApp | None
    provenance: str = ""

    def as_formula(self) -> Term:
        """The clause as a closed implication."""
        head: Term = self.head if self.head is not None else FALSE
        return forall(self.universals, implies(and_(*self.body, self.constraint), head))

    def open_formula(self) -> Term:
        head: Term = self.head if self.head is not None else FALSE
        return implies(and_(*self.body, self.constraint), head)


@dataclass(frozen=True)
class HornSystem:
    unknowns: Mapping[str, tuple[Var, ...]]
    clauses: tuple[HornClause, ...]
    choice_tags: tuple[str, ...] = ()
    scheme_derived: bool = True
    notes: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class Definition:
    params: tuple[Var, ...]
    body: Term


Solution = dict[str, Definition]


def doomed_name(tag: str) -> str:
    return f"D_{tag}"


# --------------------------------------------------------------------- hoisting


def hoist_exists(constraint: Term, taken: set[Var]) -> tuple[Term, list[Var]]:
    """Lift existentials in positive top-level conjunct positions to clause universals."""
    new_vars: list[Var] = []

    def go(t: Term) -> Term:
        if isinstance(t, Quant) and t.kind == "exists":
            mapping = {}
            for v in t.vars:
                nv = v if v not in taken else fresh_var(v, taken | all_vars(t.body))
                taken.add(nv)
                new_vars.append(nv)
                if nv != v:
                    mapping[v] = nv
            return go(substitute(t.body, mapping) if mapping else t.body)
        if isinstance(t, Op) and t.op == "and":
            return and_(*(go(a) for a in t.args))
        return t

    # Bound names already in use anywhere in the clause must not be reused.
    return go(constraint), new_vars


def make_clause(
    body: Sequence[PredApp], constraint: Term, head: PredApp | None, fixed: Sequence[Var], provenance: str
) -> HornClause:
    taken = set(fixed)
    for p in body:
        taken |= set(free_vars(p))
    if head is not None:
        taken |= set(free_vars(head))
    taken |= all_vars(constraint) - set(free_vars(constraint))
    taken |= set(free_vars(constraint))
    c, hoisted = hoist_exists(constraint, set(taken))
    universals = list(fixed)
    for v in hoisted:
        if v not in universals:
            universals.append(v)
    for v in free_vars(c):
        if v not in universals:
            universals.append(v)
    return HornClause(tuple(universals), tuple(body), c, head, provenance)


# -------------------------------------------------------------------- transform


def transform(s: SchemeSystem) -> HornSystem:
    v, w = s.v_vocab, s.w_vocab
    vp = tuple(x.prime() for x in v)
    wp = tuple(x.prime() for x in w)
    params = v + w
    tags = s.tags
    unknowns = {doomed_name(t): params for t in tags}

    def d(t: str, args: Sequence[Var]) -> PredApp:
        return PredApp(doomed_name(t), tuple(args))

    clauses = [make_clause([d(t, params) for t in tags], s.alpha, None, params, "initiation")]
    for t in tags:
        clauses.append(make_clause([], s.beta, d(t, params), params, f"safety[{t}]"))
    for t in tags:
        clauses.append(make_clause([], s.gamma[t], d(t, params), params, f"validity[{t}]"))
    for t in tags:
        clauses.append(
            make_clause(
                [d(u, vp + wp) for u in tags],
                s.delta[t],
                d(t, params),
                params + vp + wp,
                f"consecution[{t}]",
            )
        )
    return HornSystem(unknowns, tuple(clauses), tags, True)


def lint_horn(h: HornSystem) -> list[str]:
    diags: list[str] = []
    for idx, c in enumerate(h.clauses):
        where = f"clause {idx} ({c.provenance})"
        if pred_apps(c.constraint):
            diags.append(f"{where}: constraint contains an unknown predicate")
        for p in (*c.body, *([c.head] if c.head is not None else [])):
            if p.name not in h.unknowns:
                diags.append(f"{where}: undeclared predicate {p.name}")
            elif len(p.args) != len(h.unknowns[p.name]):
                diags.append(f"{where}: {p.name} applied to {len(p.args)} arguments")
            elif tuple(x.sort for x in h.unknowns[p.name]) != tuple(
                getattr(a, "sort", None) for a in p.args
            ):
                diags.append(f"{where}: argument sorts of {p.name} do not match")
        if free_vars(c.open_formula()) and not set(free_vars(c.open_formula())) <= set(c.universals):
            stray = set(free_vars(c.open_formula())) - set(c.universals)
            diags.append(f"{where}: unbound variables {', '.join(sorted(map(str, stray)))}")
        if len(set(c.universals)) != len(c.universals):
            diags.append(f"{where}: duplicate universals")
    if h.scheme_derived:
        n = len(h.choice_tags)
        if len(h.clauses) != 1 + 3 * n:
            diags.append(f"expected {1 + 3 * n} clauses for |U|={n}, found {len(h.clauses)}")
    return diags


# ------------------------------------------------------- solution translations


def _check_defined(sol: Mapping[str, Definition], names: Sequence[str]) -> None:
    missing = [n for n in names if n not in sol]
    if missing:
        raise KeyError(f"solution lacks definitions for {', '.join(missing)}")


def _defs(sol: Mapping[str, Definition]) -> dict[str, tuple[tuple[Var, ...], Term]]:
    return {n: (d.params, d.body) for n, d in sol.items()}


def solution_fol_to_chc(sol: Mapping[str, Definition], s: SchemeSystem) -> Solution:
    """D_u(V, W) := not (Inv(V) and A_u(V, W))."""
    _check_defined(sol, [INV, *(arbiter_name(t) for t in s.tags)])
    params = s.v_vocab + s.w_vocab
    defs = _defs(sol)
    out: Solution = {}
    for t in s.tags:
        raw = not_(and_(PredApp(INV, s.v_vocab), PredApp(arbiter_name(t), params)))
        out[doomed_name(t)] = Definition(params, apply_definitions(raw, defs))
    return out


def solution_chc_to_fol(sol: Mapping[str, Definition], s: SchemeSystem) -> Solution:
    """Inv(V) := forall W. OR_u not D_u(V, W);  A_u := not D_u."""
    _check_defined(sol, [doomed_name(t) for t in s.tags])
    params = s.v_vocab + s.w_vocab
    defs = _defs(sol)
    inv_raw = forall(s.w_vocab, or_(*(not_(PredApp(doomed_name(t), params)) for t in s.tags)))
    out: Solution = {INV: Definition(s.v_vocab, apply_definitions(inv_raw, defs))}
    for t in s.tags:
        out[arbiter_name(t)] = Definition(
            params, apply_definitions(not_(PredApp(doomed_name(t), params)), defs)
        )
    return out


def instantiate(f: Term, sol: Mapping[str, Definition]) -> Term:
    return apply_definitions(f, _defs(sol))


# ------------------------------------------------------------------ certificates


@dataclass(frozen=True)
class Certificate:
    name: str
    formula: Term  # closed; valid iff the translation step is sound


def _shape_scheme(s: SchemeSystem) -> SchemeSystem:
    """The same scheme with every constraint replaced by an uninterpreted relation."""
    v, w = s.v_vocab, s.w_vocab
    vp = tuple(x.prime() for x in v)
    return SchemeSystem(
        v,
        w,
        s.choices,
        PredApp("alpha", v),
        PredApp("beta", v),
        {t: PredApp(f"gamma_{t}", v + w) for t in s.tags},
        {t: PredApp(f"delta_{t}", v + vp + w) for t in s.tags},
        s.mode,
        checked=False,
    )


def _closed(f: Term) -> Term:
    return forall(free_vars(f), f)


def emit_translation_certificates(s: SchemeSystem) -> list[Certificate]:
    """Validity queries, in quantified EUF, that both model translations map models to models.

    The constraints alpha, beta, gamma_u and delta_u are abstracted to
    uninterpreted relations, so each certificate covers every instance of the
    scheme's shape (its V, W sorts and its |U|).
    """
    shape = _shape_scheme(s)
    h = transform(shape)
    v, w = s.v_vocab, s.w_vocab
    params = v + w
    scheme_axioms = [_closed(o.formula) for o in obligations(shape)]
    horn_axioms = [c.as_formula() for c in h.clauses]
    inv = PredApp(INV, v)
    d_defs = [
        _closed(iff(PredApp(doomed_name(t), params), not_(and_(inv, PredApp(arbiter_name(t), params)))))
        for t in s.tags
    ]
    inv_def = _closed(
        iff(inv, forall(w, or_(*(not_(PredApp(doomed_name(t), params)) for t in s.tags))))
    )
    a_defs = [
        _closed(iff(PredApp(arbiter_name(t), params), not_(PredApp(doomed_name(t), params))))
        for t in s.tags
    ]
    certs: list[Certificate] = []
    for c in h.clauses:
        certs.append(
            Certificate(f"fol->chc {c.provenance}", implies(and_(*scheme_axioms, *d_defs), c.as_formula()))
        )
    for o, closed in zip(obligations(shape), scheme_axioms):
        certs.append(
            Certificate(f"chc->fol {o.name}", implies(and_(*horn_axioms, inv_def, *a_defs), closed))
        )
    return certs
