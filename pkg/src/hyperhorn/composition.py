"""Constraints over the self-composed system: schedules, Bad, valid_M and the delta family."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from hyperhorn.formula import (
    IntLit,
    Term,
    Var,
    and_,
    eq,
    exists,
    free_vars,
    implies,
    not_,
    or_,
    pred_apps,
    prime,
    rename_copy,
    substitute,
)
from hyperhorn.system import HyperSpec, InputError, TransitionSystem, eliminate_exists, expand_systems


@dataclass(frozen=True, order=True)
class Schedule:
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a schedule must be nonempty")
        if list(self.members) != sorted(set(self.members)) or self.members[0] < 1:
            raise ValueError(f"schedule members must be sorted distinct positive indices: {self.members}")

    def tag(self) -> str:
        return "m" + "_".join(str(i) for i in self.members)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.members) + "}"

    def __contains__(self, i: object) -> bool:
        return i in self.members


def schedules(k: int) -> list[Schedule]:
    """All nonempty subsets of 1..k in binary-counter order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return [
        Schedule(tuple(i + 1 for i in range(k) if n >> i & 1)) for n in range(1, 2**k)
    ]


def copy_vocab(ts: TransitionSystem, i: int) -> tuple[Var, ...]:
    return tuple(v.with_copy(i) for v in ts.vocab)


def label_var(ts: TransitionSystem, i: int) -> Var:
    return ts.label.with_copy(i)


def check_restriction(p: Term, composed: Sequence[Var]) -> None:
    if pred_apps(p):
        raise InputError(f"restriction {p} applies an unknown predicate")
    allowed = set(composed)
    for v in free_vars(p):
        if v.primed:
            raise InputError(f"restriction {p} mentions primed variable {v}")
        if v not in allowed:
            raise InputError(f"restriction {p} mentions {v}, outside the composed state vocabulary")


class Composition:
    """The k-fold self-composition of one (or k) transition systems."""

    def __init__(self, systems: Sequence[TransitionSystem], spec: HyperSpec):
        self.spec = spec
        self.k = spec.k
        self.systems = expand_systems(systems, spec.k)

    @property
    def vocab(self) -> tuple[Var, ...]:
        return tuple(v for i in range(1, self.k + 1) for v in copy_vocab(self.systems[i - 1], i))

    @property
    def primed_vocab(self) -> tuple[Var, ...]:
        return tuple(v.prime() for v in self.vocab)

    def labels(self, idx: Sequence[int] | range) -> tuple[Var, ...]:
        return tuple(label_var(self.systems[i - 1], i) for i in idx)

    @property
    def forall_labels(self) -> tuple[Var, ...]:
        return self.labels(self.spec.universal)

    @property
    def exists_labels(self) -> tuple[Var, ...]:
        return self.labels(self.spec.existential)

    def schedules(self) -> list[Schedule]:
        return schedules(self.k)

    # -------------------------------------------------------------- constraints

    def obs(self, i: int) -> Term:
        return rename_copy(self.spec.obs[i - 1], i)

    def init_constraint(self) -> Term:
        inits = [rename_copy(ts.init, i) for i, ts in enumerate(self.systems, start=1)]
        return and_(*inits, self.spec.pre)

    def bad_constraint(self) -> Term:
        return and_(*(self.obs(i) for i in range(1, self.k + 1)), not_(self.spec.phi))

    def valid_constraint(self, m: Schedule) -> Term:
        if len(m.members) == self.k:
            unobserved = and_(*(not_(self.obs(i)) for i in range(1, self.k + 1)))
            observed = and_(*(self.obs(i) for i in range(1, self.k + 1)))
            return or_(unobserved, observed)
        return and_(*(not_(self.obs(i)) for i in m.members))

    def tr_copy(self, i: int) -> Term:
        return rename_copy(self.systems[i - 1].tr, i)

    def delta_big(self, m: Schedule) -> Term:
        """Delta_M over V, V' and the labels of the scheduled copies."""
        parts: list[Term] = []
        for i in range(1, self.k + 1):
            if i in m:
                parts.append(self.tr_copy(i))
            else:
                parts.extend(eq(v, v.prime()) for v in copy_vocab(self.systems[i - 1], i))
        return and_(*parts)

    def delta_exists_labels(self, m: Schedule) -> Term:
        return exists(self.labels(range(1, self.k + 1)), self.delta_big(m))

    def delta_concrete_choice(self, m: Schedule, ell_exists: Sequence[int | str]) -> Term:
        ex = self.exists_labels
        if len(ell_exists) != len(ex):
            raise InputError(f"expected {len(ex)} existential labels, got {len(ell_exists)}")
        mapping: dict[Var, Term] = {}
        for j, (lv, value) in zip(self.spec.existential, zip(ex, ell_exists)):
            ts = self.systems[j - 1]
            if ts.label_domain is None:
                raise InputError(f"system for trace {j} has no finite label domain")
            mapping[lv] = IntLit(ts.label_value(value))
        return substitute(self.delta_big(m), mapping)

    def allowed(self, m: Schedule, p: Term) -> Term:
        """exists V', L_exists. Delta_M and p(V'), reduced by the one-point rule where possible."""
        check_restriction(p, self.vocab)
        body = and_(self.delta_big(m), prime(p))
        return eliminate_exists((*self.primed_vocab, *self.exists_labels), body)

    def delta_restricted(self, m: Schedule, p: Term) -> Term:
        step = exists(self.exists_labels, self.delta_big(m))
        return and_(step, implies(self.allowed(m, p), prime(p)))
