"""First-order systems of the generic shape: alpha, beta, gamma_u, delta_u over V and W.

The implied unknowns are ``Inv(V)`` and ``A_u(V, W)``; they never occur inside
the constraints themselves.  :func:`obligations` instantiates the five rows of
the shape with concrete applications of those unknowns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from hyperhorn.composition import Composition, Schedule
from hyperhorn.formula import (
    FALSE,
    PredApp,
    Term,
    Var,
    and_,
    free_vars,
    implies,
    not_,
    or_,
    pred_apps,
    print_formula,
)
from hyperhorn.system import HyperSpec, InputError, TransitionSystem

KSAFETY = "ksafety"
GAME_FINITE = "game_finite"
GAME_RESTRICTED = "game_restricted"
MODES = (KSAFETY, GAME_FINITE, GAME_RESTRICTED)


def _label_token(text: str) -> str:
    return text.replace("-", "n")


@dataclass(frozen=True)
class ChoiceTag:
    schedule: Schedule
    kind: str = "none"  # "none" | "labels" | "restriction"
    labels: tuple[int, ...] = ()
    label_text: tuple[str, ...] = ()
    restriction: Term | None = None
    restriction_index: int | None = None

    def tag(self) -> str:
        base = self.schedule.tag()
        if self.kind == "labels":
            return base + "__l" + "_".join(_label_token(t) for t in self.label_text)
        if self.kind == "restriction":
            return f"{base}__r{self.restriction_index}"
        return base

    def describe(self) -> str:
        if self.kind == "labels":
            return f"M={self.schedule}, exists-labels=({', '.join(self.label_text)})"
        if self.kind == "restriction":
            return f"M={self.schedule}, restriction #{self.restriction_index}: {print_formula(self.restriction)}"  # type: ignore[arg-type]
        return f"M={self.schedule}"


@dataclass(frozen=True)
class SchemeSystem:
    v_vocab: tuple[Var, ...]
    w_vocab: tuple[Var, ...]
    choices: tuple[ChoiceTag, ...]
    alpha: Term
    beta: Term
    gamma: Mapping[str, Term]
    delta: Mapping[str, Term]
    mode: str
    checked: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.checked:
            return
        problems = check_scheme(self)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(c.tag() for c in self.choices)

    def choice(self, tag: str) -> ChoiceTag:
        for c in self.choices:
            if c.tag() == tag:
                return c
        raise KeyError(tag)


def check_scheme(s: SchemeSystem) -> list[str]:
    out: list[str] = []
    if not s.choices:
        out.append("the choice set U is empty")
    tags = [c.tag() for c in s.choices]
    if len(set(tags)) != len(tags):
        out.append("choice tags are not unique")
    kinds = {c.kind for c in s.choices}
    if len(kinds) > 1:
        out.append("choice tags mix witness kinds")
    if s.mode not in MODES:
        out.append(f"unknown mode {s.mode!r}")
    v = set(s.v_vocab)
    w = set(s.w_vocab)
    vp = {x.prime() for x in s.v_vocab}
    if v & w:
        out.append("V and W overlap")

    def scope(name: str, f: Term, allowed: set[Var]) -> None:
        if pred_apps(f):
            out.append(f"{name} contains an unknown predicate")
        stray = [x for x in free_vars(f) if x not in allowed]
        if stray:
            out.append(f"{name} mentions {', '.join(map(str, stray))} outside its vocabulary")

    scope("alpha", s.alpha, v)
    scope("beta", s.beta, v)
    for t in tags:
        if t not in s.gamma or t not in s.delta:
            out.append(f"choice {t} lacks gamma or delta")
            continue
        scope(f"gamma[{t}]", s.gamma[t], v | w)
        scope(f"delta[{t}]", s.delta[t], v | vp | w)
    if set(s.gamma) != set(tags) or set(s.delta) != set(tags):
        out.append("gamma/delta keys do not match U")
    return out


# ---------------------------------------------------------------------- builders


def build_ksafety_scheme(systems: Sequence[TransitionSystem], spec: HyperSpec) -> SchemeSystem:
    if spec.l != spec.k:
        raise InputError(
            f"k-safety mode needs only universal traces; the spec has {spec.k - spec.l} existential"
        )
    comp = Composition(systems, spec)
    choices = tuple(ChoiceTag(m) for m in comp.schedules())
    gamma = {c.tag(): not_(comp.valid_constraint(c.schedule)) for c in choices}
    delta = {c.tag(): comp.delta_exists_labels(c.schedule) for c in choices}
    return SchemeSystem(
        comp.vocab, (), choices, comp.init_constraint(), comp.bad_constraint(), gamma, delta, KSAFETY
    )


def exists_label_choices(comp: Composition) -> list[tuple[tuple[int, ...], tuple[str, ...]]]:
    domains = []
    for j in comp.spec.existential:
        ts = comp.systems[j - 1]
        if ts.label_domain is None:
            raise InputError(
                f"trace {j} has an infinite label domain; declare (domain ...) in the system "
                "or use the restricted mode"
            )
        domains.append([(v, ts.label_spelling(v)) for v in ts.label_domain])
    out = []
    for combo in itertools.product(*domains):
        out.append((tuple(v for v, _ in combo), tuple(t for _, t in combo)))
    return out


def build_game_finite_scheme(
    systems: Sequence[TransitionSystem], spec: HyperSpec, *, allow_no_exists: bool = False
) -> SchemeSystem:
    """Finite-branching game scheme; W is the vector of universal labels."""
    if spec.l == spec.k and not allow_no_exists:
        raise InputError("the spec has no existential traces; use the ksafety mode instead")
    comp = Composition(systems, spec)
    choices = []
    for m in comp.schedules():
        for values, texts in exists_label_choices(comp):
            choices.append(ChoiceTag(m, "labels", values, texts))
    gamma = {c.tag(): not_(comp.valid_constraint(c.schedule)) for c in choices}
    delta = {c.tag(): comp.delta_concrete_choice(c.schedule, c.labels) for c in choices}
    return SchemeSystem(
        comp.vocab,
        comp.forall_labels,
        tuple(choices),
        comp.init_constraint(),
        comp.bad_constraint(),
        gamma,
        delta,
        GAME_FINITE,
    )


def build_game_restricted_scheme(
    systems: Sequence[TransitionSystem], spec: HyperSpec, restrictions: Sequence[Term]
) -> SchemeSystem:
    if spec.l == spec.k:
        raise InputError("the spec has no existential traces; use the ksafety mode instead")
    if not restrictions:
        raise InputError("the restriction list is empty; (restrictions true) gives the unrestricted game")
    comp = Composition(systems, spec)
    choices = tuple(
        ChoiceTag(m, "restriction", restriction=p, restriction_index=idx)
        for m in comp.schedules()
        for idx, p in enumerate(restrictions)
    )
    gamma = {c.tag(): not_(comp.valid_constraint(c.schedule)) for c in choices}
    delta = {
        c.tag(): comp.delta_restricted(c.schedule, c.restriction)  # type: ignore[arg-type]
        for c in choices
    }
    return SchemeSystem(
        comp.vocab,
        comp.forall_labels,
        choices,
        comp.init_constraint(),
        comp.bad_constraint(),
        gamma,
        delta,
        GAME_RESTRICTED,
    )


# ------------------------------------------------------------------ obligations

INV = "Inv"


def arbiter_name(tag: str) -> str:
    return f"A_{tag}"


def fol_signature(s: SchemeSystem) -> dict[str, tuple[Var, ...]]:
    sig = {INV: s.v_vocab}
    for t in s.tags:
        sig[arbiter_name(t)] = s.v_vocab + s.w_vocab
    return sig


@dataclass(frozen=True)
class Obligation:
    name: str
    formula: Term


def obligations(s: SchemeSystem) -> list[Obligation]:
    """The 2 + 2|U| + 1 formulas of the shape, with Inv and A_u as predicate applications."""
    v, w = s.v_vocab, s.w_vocab
    vp = tuple(x.prime() for x in v)
    inv = PredApp(INV, v)
    inv_next = PredApp(INV, vp)

    def arb(t: str) -> PredApp:
        return PredApp(arbiter_name(t), v + w)

    out = [
        Obligation("initiation", implies(s.alpha, inv)),
        Obligation("safety", implies(and_(inv, s.beta), FALSE)),
    ]
    for t in s.tags:
        out.append(Obligation(f"validity[{t}]", implies(and_(inv, arb(t), s.gamma[t]), FALSE)))
    for t in s.tags:
        out.append(Obligation(f"consecution[{t}]", implies(and_(inv, arb(t), s.delta[t]), inv_next)))
    out.append(Obligation("coverage", implies(inv, or_(*(arb(t) for t in s.tags)))))
    return out


def dump_scheme(s: SchemeSystem) -> str:
    """Human-readable listing of the scheme's vocabularies, choices and constraints."""
    lines = [
        f"; mode: {s.mode}",
        f"; V: {' '.join(v.spelled() for v in s.v_vocab)}",
        f"; W: {' '.join(v.spelled() for v in s.w_vocab) or '(empty)'}",
        f"; |U| = {len(s.choices)}",
        f"alpha: {print_formula(s.alpha)}",
        f"beta: {print_formula(s.beta)}",
    ]
    for c in s.choices:
        t = c.tag()
        lines.append(f"choice {t}: {c.describe()}")
        lines.append(f"  gamma: {print_formula(s.gamma[t])}")
        lines.append(f"  delta: {print_formula(s.delta[t])}")
    return "\n".join(lines) + "\n"
