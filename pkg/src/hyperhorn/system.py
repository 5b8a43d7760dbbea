"""Symbolic labeled transition systems and forall*exists* specifications."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

from hyperhorn.formula import (
    BOOL,
    FALSE,
    INT,
    TRUE,
    FormulaError,
    IntLit,
    Op,
    Quant,
    Term,
    Var,
    all_vars,
    and_,
    eq,
    forall,
    free_vars,
    not_,
    or_,
    parse_formula,
    parse_sort,
    substitute,
    vars_equal,
)
from hyperhorn.sexpr import Atom, SExpr, SExprError, SList, read_all

if TYPE_CHECKING:
    from hyperhorn.backend import SolverConfig


class InputError(ValueError):
    """A system, spec, restriction or predicate file failed to parse or validate."""


@dataclass(frozen=True)
class TransitionSystem:
    vocab: tuple[Var, ...]
    label: Var
    init: Term
    tr: Term
    label_domain: tuple[int, ...] | None = None
    label_names: tuple[tuple[str, int], ...] = ()
    name: str = "system"

    @property
    def primed_vocab(self) -> tuple[Var, ...]:
        return tuple(v.prime() for v in self.vocab)

    @property
    def is_finite_branching(self) -> bool:
        return self.label_domain is not None

    def label_value(self, name: str | int) -> int:
        if isinstance(name, int):
            value = name
        else:
            names = dict(self.label_names)
            if name in names:
                value = names[name]
            else:
                try:
                    value = int(name)
                except ValueError:
                    raise InputError(f"unknown label constant {name!r}") from None
        if self.label_domain is not None and value not in self.label_domain:
            raise InputError(f"label {name!r} is outside the declared finite domain")
        return value

    def label_spelling(self, value: int) -> str:
        for n, v in self.label_names:
            if v == value:
                return n
        return str(value)


@dataclass(frozen=True)
class HyperSpec:
    k: int
    l: int
    pre: Term
    obs: tuple[Term, ...]
    phi: Term

    @property
    def universal(self) -> range:
        return range(1, self.l + 1)

    @property
    def existential(self) -> range:
        return range(self.l + 1, self.k + 1)


# --------------------------------------------------------------------- totality


_DNF_CAP = 4096


def _linear(t: Term) -> dict[Term | None, int]:
    """Integer term as coefficients over non-arithmetic atoms; the key None holds the constant."""
    if isinstance(t, IntLit):
        return {None: t.value}
    if isinstance(t, Op) and t.op == "+":
        out: dict[Term | None, int] = {}
        for a in t.args:
            for k, c in _linear(a).items():
                out[k] = out.get(k, 0) + c
        return out
    if isinstance(t, Op) and t.op == "-":
        parts = [_linear(a) for a in t.args]
        if len(parts) == 1:
            return {k: -c for k, c in parts[0].items()}
        out = dict(parts[0])
        for p in parts[1:]:
            for k, c in p.items():
                out[k] = out.get(k, 0) - c
        return out
    if isinstance(t, Op) and t.op == "*":
        parts = [_linear(a) for a in t.args]
        consts = [p[None] for p in parts if set(p) == {None}]
        others = [p for p in parts if set(p) != {None}]
        if len(others) <= 1:
            scale = 1
            for c in consts:
                scale *= c
            base = others[0] if others else {None: 1}
            return {k: scale * c for k, c in base.items()}
    return {t: 1}


def _from_linear(lin: Mapping[Term | None, int]) -> Term:
    terms: list[Term] = []
    for k, c in lin.items():
        if c == 0:
            continue
        if k is None:
            terms.append(IntLit(c))
        else:
            terms.append(k if c == 1 else Op("*", (IntLit(c), k)))
    if not terms:
        return IntLit(0)
    return terms[0] if len(terms) == 1 else Op("+", tuple(terms))


def _solve_for(x: Var, lhs: Term, rhs: Term) -> Term | None:
    """A term t with (lhs = rhs) iff (x = t), when x occurs with a unit coefficient."""
    if isinstance(lhs, Var) and lhs == x and x not in all_vars(rhs):
        return rhs
    if isinstance(rhs, Var) and rhs == x and x not in all_vars(lhs):
        return lhs
    if x.sort != INT:
        return None
    lin = _linear(Op("-", (lhs, rhs)))
    c = lin.pop(x, 0)
    if c not in (1, -1) or any(k is not None and x in all_vars(k) for k in lin):
        return None
    return _from_linear({k: -c * v for k, v in lin.items()})


def _bound(x: Var, c: Term) -> tuple[str, dict[Term | None, int]] | None:
    """Read c as an integer bound lo <= x or x <= hi with x at unit coefficient."""
    if x.sort != INT or not (isinstance(c, Op) and c.op in ("<", "<=", ">", ">=") and len(c.args) == 2):
        return None
    lin = _linear(Op("-", c.args))
    coef = lin.pop(x, 0)
    if coef not in (1, -1) or any(k is not None and x in all_vars(k) for k in lin):
        return None
    # coef*x + r  op  0, with strict comparisons tightened over the integers
    if c.op in ("<", "<="):
        k = -1 if c.op == "<" else 0
        side = "hi" if coef == 1 else "lo"
    else:
        k = 1 if c.op == ">" else 0
        side = "lo" if coef == 1 else "hi"
    # coef*x <= k - r (or >=); with coef = +-1 the bound is coef*(k - r)
    bound = {key: -coef * v for key, v in lin.items()}
    bound[None] = bound.get(None, 0) + coef * k
    return side, bound


def _project_bounds(x: Var, conjuncts: list[Term]) -> list[Term] | None:
    """Exact integer projection of x when every conjunct mentioning it is a unit bound."""
    lows, highs, rest = [], [], []
    for c in conjuncts:
        if x not in free_vars(c):
            rest.append(c)
            continue
        b = _bound(x, c)
        if b is None:
            return None
        (lows if b[0] == "lo" else highs).append(b[1])
    pairs = [Op("<=", (_from_linear(lo), _from_linear(hi))) for lo in lows for hi in highs]
    return rest + pairs


def _or_size(t: Term) -> int:
    return len(t.args) if isinstance(t, Op) and t.op == "or" else 1


_SPLIT_CAP = 16


def _equation_sides(x: Var, t: Term, out: list[Term]) -> bool:
    """Collect the t_i of every atom x = t_i; False if x occurs anywhere else."""
    if t == x:
        return False
    if isinstance(t, Op):
        if t.op == "=" and len(t.args) == 2 and x in t.args:
            other = t.args[1] if t.args[0] == x else t.args[0]
            if x in all_vars(other):
                return False
            if other not in out:
                out.append(other)
            return True
        return all(_equation_sides(x, a, out) for a in t.args)
    if isinstance(t, Quant):
        return x in t.vars or _equation_sides(x, t.body, out)
    return True


def _drop_equations(x: Var, t: Term) -> Term:
    if isinstance(t, Op):
        if t.op == "=" and len(t.args) == 2 and x in t.args:
            return FALSE
        return Op(t.op, tuple(_drop_equations(x, a) for a in t.args))
    if isinstance(t, Quant) and x not in t.vars:
        return Quant(t.kind, t.vars, _drop_equations(x, t.body))
    return t


def _split_values(x: Var, body: Term) -> Term | None:
    """Exact case split for a variable compared only by equality.

    A Boolean is replaced by both constants.  An integer that occurs only in
    atoms x = t_i takes one of the t_i or, the integers being infinite, a
    value different from all of them, which falsifies every such atom.
    """
    if x.sort == BOOL:
        return or_(substitute(body, {x: TRUE}), substitute(body, {x: FALSE}))
    if x.sort != INT:
        return None
    sides: list[Term] = []
    if not _equation_sides(x, body, sides) or len(sides) > _SPLIT_CAP:
        return None
    return or_(*(substitute(body, {x: t}) for t in sides), _drop_equations(x, body))


def eliminate_exists(vs: Sequence[Var], body: Term) -> Term:
    """Exists-closure of ``body`` simplified by the one-point rule.

    Distributes over disjunction (also inside conjunctions, up to a size cap)
    and eliminates a bound variable whenever a top-level conjunct is an
    equation that determines it, directly or through a unit-coefficient
    linear term.  An integer variable bounded only by unit-coefficient
    inequalities is projected exactly by pairing its lower and upper bounds,
    and one compared only by equality is eliminated by a finite case split.
    Whatever cannot be eliminated stays explicitly quantified, so the result
    is always equivalent to ``exists vs. body``.
    """
    bound = list(vs)
    if isinstance(body, Op) and body.op == "or":
        return or_(*(eliminate_exists(bound, d) for d in body.args))
    conjuncts = list(body.args) if isinstance(body, Op) and body.op == "and" else [body]
    split = [
        i for i, c in enumerate(conjuncts)
        if _or_size(c) > 1 and any(v in free_vars(c) for v in bound)
    ]
    if split:
        size = 1
        for i in split:
            size *= _or_size(conjuncts[i])
        if size <= _DNF_CAP:
            i = split[0]
            rest = conjuncts[:i] + conjuncts[i + 1 :]
            return or_(*(eliminate_exists(bound, and_(*rest, d)) for d in conjuncts[i].args))  # type: ignore[union-attr]
    remaining = [v for v in bound]
    changed = True
    while changed and remaining:
        changed = False
        for idx, c in enumerate(conjuncts):
            if not (isinstance(c, Op) and c.op == "=" and len(c.args) == 2):
                continue
            for x in remaining:
                t = _solve_for(x, *c.args)
                if t is None:
                    continue
                rest = conjuncts[:idx] + conjuncts[idx + 1 :]
                conjuncts = [substitute(r, {x: t}) for r in rest]
                remaining.remove(x)
                changed = True
                break
            if changed:
                break
    for x in list(remaining):
        projected = _project_bounds(x, conjuncts)
        if projected is not None:
            conjuncts = projected
            remaining.remove(x)
    result = and_(*conjuncts)
    live = [v for v in remaining if v in free_vars(result)]
    if not live:
        return result
    for x in list(live):
        split = _split_values(x, result)
        if split is not None:
            rest = [v for v in live if v != x]
            return eliminate_exists(rest, split) if rest else split
    inner = [c for c in conjuncts if any(v in free_vars(c) for v in live)]
    outer = [c for c in conjuncts if not any(v in free_vars(c) for v in live)]
    return and_(*outer, Quant("exists", tuple(live), and_(*inner)))


def enabled(ts: TransitionSystem) -> Term:
    """States with at least one outgoing transition: exists l, V'. Tr."""
    return eliminate_exists((ts.label, *ts.primed_vocab), ts.tr)


def stuck(ts: TransitionSystem) -> Term:
    en = enabled(ts)
    if isinstance(en, Quant) or _contains_quant(en):
        return forall((ts.label, *ts.primed_vocab), not_(ts.tr))
    return not_(en)


def _contains_quant(t: Term) -> bool:
    from hyperhorn.formula import has_quantifier

    return has_quantifier(t)


def totalize(ts: TransitionSystem) -> TransitionSystem:
    """Add self loops to states without successors.

    The stuck-state guard is ``forall l, V'. not Tr``; when the one-point rule
    turns its dual into a quantifier-free formula the guard is emitted in
    that equivalent quantifier-free form.
    """
    frame = vars_equal(ts.primed_vocab, ts.vocab)
    return replace(ts, tr=or_(ts.tr, and_(stuck(ts), frame)))


# ------------------------------------------------------------------ determinism


@dataclass(frozen=True)
class DeterminismResult:
    status: str  # "deterministic" | "nondeterministic" | "unknown"
    witness: Mapping[str, object] = field(default_factory=dict)
    reason: str = ""


def determinism_query(ts: TransitionSystem) -> tuple[Term, dict[Var, Var]]:
    """Tr(V,l,V') and Tr(V,l,V'') and V' != V''."""
    dup = {v.prime(): Var(v.name + "__alt", v.sort, None, True) for v in ts.vocab}
    tr2 = substitute(ts.tr, dup)
    differ = or_(*(not_(eq(p, d)) for p, d in dup.items()))
    return and_(ts.tr, tr2, differ), dup


def check_determinism(ts: TransitionSystem, config: "SolverConfig") -> DeterminismResult:
    from hyperhorn.backend import check_sat

    query, _ = determinism_query(ts)
    res = check_sat(query, config)
    if res.status == "unsat":
        return DeterminismResult("deterministic")
    if res.status == "sat":
        return DeterminismResult("nondeterministic", res.model)
    return DeterminismResult("unknown", reason=res.reason)


# ---------------------------------------------------------------------- checks


def validate_system(ts: TransitionSystem) -> list[str]:
    diags: list[str] = []
    base = set(ts.vocab)
    names = [v.name for v in ts.vocab]
    if len(set(names)) != len(names):
        diags.append(f"{ts.name}: duplicate state variable")
    if ts.label.name in names:
        diags.append(f"{ts.name}: label {ts.label.name} clashes with a state variable")
    for v in free_vars(ts.init):
        if v not in base:
            diags.append(f"{ts.name}: init mentions {v}, which is not an unprimed state variable")
    allowed = base | set(ts.primed_vocab) | {ts.label}
    for v in free_vars(ts.tr):
        if v not in allowed:
            diags.append(f"{ts.name}: tr mentions {v} outside V, V' and the label")
    return diags


def validate_spec(systems: Sequence[TransitionSystem], spec: HyperSpec) -> list[str]:
    """Diagnostics for a spec against the per-trace systems (one per copy)."""
    diags: list[str] = []
    if spec.k < 1:
        diags.append(f"k must be at least 1, got {spec.k}")
    if not 1 <= spec.l <= spec.k:
        diags.append(f"number of universals l={spec.l} must lie in 1..k (k={spec.k})")
    if len(spec.obs) != spec.k:
        diags.append(f"expected {spec.k} observation formulas, got {len(spec.obs)}")
    if len(systems) not in (1, spec.k):
        diags.append(f"expected 1 or {spec.k} systems, got {len(systems)}")
        return diags
    for ts in systems:
        diags.extend(validate_system(ts))
    per_copy = expand_systems(systems, spec.k)
    for i, xi in enumerate(spec.obs, start=1):
        ts = per_copy[i - 1] if i <= len(per_copy) else per_copy[-1]
        for v in free_vars(xi):
            if v.copy is not None:
                diags.append(f"observation {i} mentions copy-indexed {v}")
            elif v.primed:
                diags.append(f"observation {i} mentions primed {v}")
            elif v not in ts.vocab:
                diags.append(f"observation {i} mentions {v}, not a state variable")
    composed = {v.with_copy(i + 1) for i, ts in enumerate(per_copy) for v in ts.vocab}
    for what, f in (("pre", spec.pre), ("global", spec.phi)):
        for v in free_vars(f):
            if v.primed:
                diags.append(f"{what} mentions primed {v}")
            elif v.copy is None:
                diags.append(f"{what} mentions {v} without a copy index")
            elif not 1 <= v.copy <= spec.k:
                diags.append(f"{what} mentions {v} with copy index outside 1..{spec.k}")
            elif v not in composed:
                diags.append(f"{what} mentions unknown variable {v}")
    return diags


def expand_systems(systems: Sequence[TransitionSystem], k: int) -> tuple[TransitionSystem, ...]:
    if len(systems) == 1:
        return tuple(systems) * k
    if len(systems) != k:
        raise InputError(f"expected 1 or {k} systems, got {len(systems)}")
    return tuple(systems)


# ----------------------------------------------------------------------- files


def _forms(node: SExpr, head: str) -> list[SList]:
    if not isinstance(node, SList) or node.head() != head:
        raise InputError(f"expected a ({head} ...) form")
    out = []
    for item in node.items[1:]:
        if not isinstance(item, SList) or item.head() is None:
            raise InputError(f"malformed entry in ({head} ...) at offset {item.pos}")
        out.append(item)
    return out


def _read_single(text: str, head: str) -> SExpr:
    try:
        nodes = read_all(text)
    except SExprError as exc:
        raise InputError(str(exc)) from exc
    if len(nodes) != 1:
        raise InputError(f"expected exactly one ({head} ...) form, found {len(nodes)}")
    return nodes[0]


def _binding(node: SExpr) -> Var:
    if not (isinstance(node, SList) and len(node) == 2 and isinstance(node[0], Atom)):
        raise InputError(f"malformed variable declaration at offset {node.pos}")
    try:
        return Var(node[0].text, parse_sort(node[1]))
    except FormulaError as exc:
        raise InputError(str(exc)) from exc


def parse_system(text: str, name: str = "system") -> TransitionSystem:
    """Parse ``(system (vars ...) (label (l Int)) [(domain c ...)] (init F) (tr F))``."""
    node = _read_single(text, "system")
    sections: dict[str, SList] = {}
    for form in _forms(node, "system"):
        key = form.head()
        if key in sections:
            raise InputError(f"duplicate ({key} ...) section")
        sections[key] = form  # type: ignore[index]
    for need in ("vars", "init", "tr"):
        if need not in sections:
            raise InputError(f"system is missing its ({need} ...) section")
    unknown = set(sections) - {"vars", "label", "domain", "init", "tr"}
    if unknown:
        raise InputError(f"unknown system section(s): {', '.join(sorted(unknown))}")
    vocab = tuple(_binding(b) for b in sections["vars"].items[1:])
    if "label" in sections:
        if len(sections["label"]) != 2:
            raise InputError("label section must declare exactly one variable")
        label = _binding(sections["label"][1])
    else:
        label = Var("l", INT)
    if label.sort not in (INT, BOOL):
        raise InputError("label sort must be Int or Bool")
    domain: tuple[int, ...] | None = None
    names: list[tuple[str, int]] = []
    if "domain" in sections:
        values: list[int] = []
        for idx, item in enumerate(sections["domain"].items[1:]):
            if not isinstance(item, Atom):
                raise InputError("label domain entries must be symbols or integers")
            try:
                values.append(int(item.text))
            except ValueError:
                names.append((item.text, idx))
                values.append(idx)
        if names and len(names) != len(values):
            raise InputError("label domain mixes named constants and integers")
        if not values or len(set(values)) != len(values):
            raise InputError("label domain must be a nonempty list of distinct values")
        domain = tuple(values)
    constants = {n: IntLit(v) for n, v in names}
    env = (*vocab, label)
    try:
        init = parse_formula(_only(sections["init"]), vocab)
        tr = parse_formula(_only(sections["tr"]), env, constants=constants)
    except FormulaError as exc:
        raise InputError(f"{name}: {exc}") from exc
    ts = TransitionSystem(vocab, label, init, tr, domain, tuple(names), name)
    diags = validate_system(ts)
    if diags:
        raise InputError("; ".join(diags))
    return ts


def _only(form: SList) -> SExpr:
    if len(form) != 2:
        raise InputError(f"({form.head()} ...) expects exactly one formula")
    return form[1]


def composed_vocab(systems: Sequence[TransitionSystem], k: int) -> tuple[Var, ...]:
    return tuple(v.with_copy(i + 1) for i, ts in enumerate(expand_systems(systems, k)) for v in ts.vocab)


def parse_spec(text: str, systems: Sequence[TransitionSystem]) -> HyperSpec:
    """Parse ``(spec (forall l) (exists k-l) (pre F) (observe i F)... (global F))``."""
    node = _read_single(text, "spec")
    l = None
    e = 0
    pre_node = phi_node = None
    obs_nodes: dict[int, SExpr] = {}
    for form in _forms(node, "spec"):
        key = form.head()
        if key in ("forall", "exists"):
            if len(form) != 2 or not isinstance(form[1], Atom) or not form[1].text.isdigit():
                raise InputError(f"({key} n) expects a natural number")
            if key == "forall":
                l = int(form[1].text)
            else:
                e = int(form[1].text)
        elif key == "pre":
            pre_node = _only(form)
        elif key == "global":
            phi_node = _only(form)
        elif key == "observe":
            if len(form) != 3 or not isinstance(form[1], Atom) or not form[1].text.isdigit():
                raise InputError("(observe i F) expects a trace index and a formula")
            i = int(form[1].text)
            if i in obs_nodes:
                raise InputError(f"duplicate observation for trace {i}")
            obs_nodes[i] = form[2]
        else:
            raise InputError(f"unknown spec section ({key} ...)")
    if l is None:
        raise InputError("spec is missing (forall l)")
    k = l + e
    if k < 1 or l < 1:
        raise InputError("spec needs at least one universal trace")
    if sorted(obs_nodes) != list(range(1, k + 1)):
        raise InputError(f"spec must give one (observe i F) for each i in 1..{k}")
    per_copy = expand_systems(systems, k)
    names: dict[str, Var] = {}
    for ts in per_copy:
        for v in ts.vocab:
            if names.setdefault(v.name, v).sort != v.sort:
                raise InputError(f"variable {v.name} has different sorts across systems")
    try:
        obs = tuple(parse_formula(obs_nodes[i], per_copy[i - 1].vocab) for i in range(1, k + 1))
        pre = parse_formula(pre_node, tuple(names.values())) if pre_node is not None else parse_formula("true")
        phi = parse_formula(phi_node, tuple(names.values())) if phi_node is not None else parse_formula("true")
    except FormulaError as exc:
        raise InputError(f"spec: {exc}") from exc
    spec = HyperSpec(k, l, pre, obs, phi)
    diags = validate_spec(per_copy, spec)
    if diags:
        raise InputError("; ".join(diags))
    return spec


def parse_formula_list(
    text: str, head: str, vocab: Sequence[Var], extra: Sequence[Var] = ()
) -> tuple[Term, ...]:
    """Parse ``(head F1 F2 ...)`` with every formula over ``vocab`` (plus ``extra``)."""
    node = _read_single(text, head)
    if not isinstance(node, SList) or node.head() != head:
        raise InputError(f"expected a ({head} ...) form")
    allowed = set(vocab) | set(extra)
    base = {v.name: v for v in (*vocab, *extra)}
    out = []
    for item in node.items[1:]:
        try:
            f = parse_formula(item, tuple(base.values()))
        except FormulaError as exc:
            raise InputError(f"{head}: {exc}") from exc
        for v in free_vars(f):
            if v not in allowed:
                raise InputError(f"{head}: {v} is not in the composed unprimed vocabulary")
        out.append(f)
    return tuple(out)


def load_system(path: str | Path) -> TransitionSystem:
    p = Path(path)
    return parse_system(p.read_text(), name=p.stem)


def load_spec(path: str | Path, systems: Sequence[TransitionSystem]) -> HyperSpec:
    return parse_spec(Path(path).read_text(), systems)
