"""Many-sorted first-order terms and formulas.

Formulas are immutable trees built from :class:`Var`, literals, interpreted
operator applications (:class:`Op`), quantifiers (:class:`Quant`) and
applications of unknown predicates (:class:`PredApp`).  A variable carries an
optional trace-copy index and a primed flag as fields; the textual format
spells them ``x@2`` and ``x'``.

Textual grammar (one s-expression per formula)::

    term  ::= INT | true | false | IDENT ["@" INT] ["'"]
            | (OP term*)
            | (forall ((IDENT sort)*) term) | (exists ((IDENT sort)*) term)
    sort  ::= Int | Bool | (Array sort sort)
    OP    ::= and or not => = < <= > >= + - * ite select store | <unknown>
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from hyperhorn.sexpr import Atom, SExpr, SExprError, SList, read_one


class FormulaError(ValueError):
    """Raised for unbound symbols, sort and arity mismatches."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        where = f" (at offset {pos})" if pos is not None else ""
        super().__init__(f"{message}{where}")


class SortError(FormulaError):
    pass


# --------------------------------------------------------------------------- sorts


@dataclass(frozen=True)
class Sort:
    kind: str
    index: "Sort | None" = None
    elem: "Sort | None" = None

    def __str__(self) -> str:
        if self.kind == "Array":
            return f"(Array {self.index} {self.elem})"
        return self.kind

    @property
    def is_array(self) -> bool:
        return self.kind == "Array"


INT = Sort("Int")
BOOL = Sort("Bool")


def array_sort(index: Sort, elem: Sort) -> Sort:
    return Sort("Array", index, elem)


def parse_sort(node: SExpr) -> Sort:
    if isinstance(node, Atom):
        if node.text == "Int":
            return INT
        if node.text == "Bool":
            return BOOL
        raise SortError(f"unknown sort {node.text!r}", node.pos)
    if len(node) == 3 and node.head() == "Array":
        return array_sort(parse_sort(node[1]), parse_sort(node[2]))
    raise SortError("malformed sort", node.pos)


# --------------------------------------------------------------------------- terms


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True, eq=True)
class Var(Term):
    name: str
    sort: Sort = INT
    copy: int | None = None
    primed: bool = False

    @property
    def key(self) -> tuple[str, int | None, bool]:
        return (self.name, self.copy, self.primed)

    def with_copy(self, i: int | None) -> "Var":
        return Var(self.name, self.sort, i, self.primed)

    def prime(self) -> "Var":
        return Var(self.name, self.sort, self.copy, True)

    def unprime(self) -> "Var":
        return Var(self.name, self.sort, self.copy, False)

    def spelled(self) -> str:
        s = self.name
        if self.copy is not None:
            s += f"@{self.copy}"
        if self.primed:
            s += "'"
        return s

    def __str__(self) -> str:
        return self.spelled()


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool


@dataclass(frozen=True)
class Op(Term):
    op: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Quant(Term):
    kind: str  # "forall" | "exists"
    vars: tuple[Var, ...]
    body: Term


@dataclass(frozen=True)
class PredApp(Term):
    name: str
    args: tuple[Term, ...]


TRUE = BoolLit(True)
FALSE = BoolLit(False)

Vocabulary = tuple[Var, ...]
Signature = Mapping[str, Sequence[Sort]]

BOOL_OPS = {"and", "or", "not", "=>"}
CMP_OPS = {"<", "<=", ">", ">="}
ARITH_OPS = {"+", "-", "*"}
OPS = BOOL_OPS | CMP_OPS | ARITH_OPS | {"=", "ite", "select", "store"}


# ------------------------------------------------------------------ constructors
# These fold trivial constants; the parser never uses them so that printed
# formulas read back structurally identical.


def and_(*fs: Term | Iterable[Term]) -> Term:
    flat: list[Term] = []
    for f in _flatten_args(fs):
        if isinstance(f, Op) and f.op == "and":
            flat.extend(f.args)
        elif f == TRUE:
            continue
        elif f == FALSE:
            return FALSE
        else:
            flat.append(f)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return Op("and", tuple(flat))


def or_(*fs: Term | Iterable[Term]) -> Term:
    flat: list[Term] = []
    for f in _flatten_args(fs):
        if isinstance(f, Op) and f.op == "or":
            flat.extend(f.args)
        elif f == FALSE:
            continue
        elif f == TRUE:
            return TRUE
        else:
            flat.append(f)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Op("or", tuple(flat))


def not_(f: Term) -> Term:
    if isinstance(f, BoolLit):
        return BoolLit(not f.value)
    if isinstance(f, Op) and f.op == "not":
        return f.args[0]
    return Op("not", (f,))


def implies(a: Term, b: Term) -> Term:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    if b == FALSE:
        return not_(a)
    return Op("=>", (a, b))


def eq(a: Term, b: Term) -> Term:
    if a == b:
        return TRUE
    return Op("=", (a, b))


def iff(a: Term, b: Term) -> Term:
    return eq(a, b)


def exists(vs: Sequence[Var], body: Term) -> Term:
    vs = tuple(v for v in vs if v in free_vars_set(body))
    if not vs:
        return body
    return Quant("exists", vs, body)


def forall(vs: Sequence[Var], body: Term) -> Term:
    vs = tuple(v for v in vs if v in free_vars_set(body))
    if not vs:
        return body
    return Quant("forall", vs, body)


def vars_equal(xs: Sequence[Var], ys: Sequence[Var]) -> Term:
    return and_(*(eq(x, y) for x, y in zip(xs, ys, strict=True)))


def _flatten_args(fs) -> list[Term]:
    out: list[Term] = []
    for f in fs:
        if isinstance(f, Term):
            out.append(f)
        else:
            out.extend(f)
    return out


# ----------------------------------------------------------------------- sorting


def sort_of(t: Term) -> Sort:
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, IntLit):
        return INT
    if isinstance(t, (BoolLit, Quant, PredApp)):
        return BOOL
    if isinstance(t, Op):
        if t.op in BOOL_OPS or t.op in CMP_OPS or t.op == "=":
            return BOOL
        if t.op in ARITH_OPS:
            return INT
        if t.op == "ite":
            return sort_of(t.args[1])
        if t.op == "select":
            s = sort_of(t.args[0])
            assert s.elem is not None
            return s.elem
        if t.op == "store":
            return sort_of(t.args[0])
    raise SortError(f"cannot determine sort of {t!r}")


def check_sorts(t: Term, unknowns: Signature | None = None, pos: int | None = None) -> Sort:
    """Sort-check ``t`` recursively and return its sort."""
    if isinstance(t, (Var, IntLit, BoolLit)):
        return sort_of(t)
    if isinstance(t, Quant):
        if check_sorts(t.body, unknowns, pos) != BOOL:
            raise SortError(f"quantifier body must be Bool in {t}", pos)
        return BOOL
    if isinstance(t, PredApp):
        arg_sorts = tuple(check_sorts(a, unknowns, pos) for a in t.args)
        if unknowns is not None:
            if t.name not in unknowns:
                raise FormulaError(f"undeclared unknown predicate {t.name!r}", pos)
            want = tuple(unknowns[t.name])
            if len(want) != len(arg_sorts):
                raise FormulaError(
                    f"{t.name} expects {len(want)} arguments, got {len(arg_sorts)}", pos
                )
            if want != arg_sorts:
                raise SortError(f"argument sorts of {t.name} do not match its signature", pos)
        return BOOL
    assert isinstance(t, Op)
    sorts = [check_sorts(a, unknowns, pos) for a in t.args]
    op, n = t.op, len(sorts)

    def need(cond: bool, what: str) -> None:
        if not cond:
            raise SortError(f"'{op}' {what}; got {' '.join(map(str, sorts))}", pos)

    if op in ("and", "or"):
        need(n >= 1 and all(s == BOOL for s in sorts), "expects Bool arguments")
        return BOOL
    if op == "not":
        need(n == 1 and sorts[0] == BOOL, "expects one Bool argument")
        return BOOL
    if op == "=>":
        need(n >= 2 and all(s == BOOL for s in sorts), "expects Bool arguments")
        return BOOL
    if op == "=":
        need(n >= 2 and all(s == sorts[0] for s in sorts), "expects arguments of one sort")
        return BOOL
    if op in CMP_OPS:
        need(n >= 2 and all(s == INT for s in sorts), "expects Int arguments")
        return BOOL
    if op in ("+", "*"):
        need(n >= 1 and all(s == INT for s in sorts), "expects Int arguments")
        return INT
    if op == "-":
        need(n >= 1 and all(s == INT for s in sorts), "expects Int arguments")
        return INT
    if op == "ite":
        need(n == 3 and sorts[0] == BOOL and sorts[1] == sorts[2], "expects (Bool, T, T)")
        return sorts[1]
    if op == "select":
        need(n == 2 and sorts[0].is_array and sorts[0].index == sorts[1], "expects (Array I E, I)")
        return sorts[0].elem  # type: ignore[return-value]
    if op == "store":
        need(
            n == 3
            and sorts[0].is_array
            and sorts[0].index == sorts[1]
            and sorts[0].elem == sorts[2],
            "expects (Array I E, I, E)",
        )
        return sorts[0]
    raise FormulaError(f"unknown operator {op!r}", pos)


# ------------------------------------------------------------------ traversal


def free_vars(t: Term) -> Vocabulary:
    """Free variables of ``t`` in order of first occurrence."""
    seen: dict[Var, None] = {}

    def go(u: Term, bound: frozenset[Var]) -> None:
        if isinstance(u, Var):
            if u not in bound:
                seen.setdefault(u, None)
        elif isinstance(u, (Op, PredApp)):
            for a in u.args:
                go(a, bound)
        elif isinstance(u, Quant):
            go(u.body, bound | frozenset(u.vars))

    go(t, frozenset())
    return tuple(seen)


def free_vars_set(t: Term) -> frozenset[Var]:
    return frozenset(free_vars(t))


def all_vars(t: Term) -> set[Var]:
    out: set[Var] = set()

    def go(u: Term) -> None:
        if isinstance(u, Var):
            out.add(u)
        elif isinstance(u, (Op, PredApp)):
            for a in u.args:
                go(a)
        elif isinstance(u, Quant):
            out.update(u.vars)
            go(u.body)

    go(t)
    return out


def pred_apps(t: Term) -> list[PredApp]:
    out: list[PredApp] = []

    def go(u: Term) -> None:
        if isinstance(u, PredApp):
            out.append(u)
            for a in u.args:
                go(a)
        elif isinstance(u, Op):
            for a in u.args:
                go(a)
        elif isinstance(u, Quant):
            go(u.body)

    go(t)
    return out


def has_quantifier(t: Term) -> bool:
    if isinstance(t, Quant):
        return True
    if isinstance(t, (Op, PredApp)):
        return any(has_quantifier(a) for a in t.args)
    return False


def map_vars(t: Term, fn: Callable[[Var], Var]) -> Term:
    """Rename every variable occurrence, bound ones included."""
    if isinstance(t, Var):
        return fn(t)
    if isinstance(t, Op):
        return Op(t.op, tuple(map_vars(a, fn) for a in t.args))
    if isinstance(t, PredApp):
        return PredApp(t.name, tuple(map_vars(a, fn) for a in t.args))
    if isinstance(t, Quant):
        return Quant(t.kind, tuple(fn(v) for v in t.vars), map_vars(t.body, fn))
    return t


# ------------------------------------------------------------------ substitution


def fresh_var(v: Var, avoid: set[Var] | frozenset[Var]) -> Var:
    taken = {u.key for u in avoid}
    for n in itertools.count(1):
        cand = Var(f"{v.name}_{n}", v.sort, v.copy, v.primed)
        if cand.key not in taken:
            return cand
    raise AssertionError("unreachable")


def substitute(t: Term, mapping: Mapping[Var, Term]) -> Term:
    """Simultaneous, capture-avoiding substitution of free variables."""
    for v, r in mapping.items():
        rs = sort_of(r)
        if rs != v.sort:
            raise SortError(f"cannot substitute {r} of sort {rs} for {v} of sort {v.sort}")
    if not mapping:
        return t
    return _subst(t, dict(mapping))


def _subst(t: Term, m: dict[Var, Term]) -> Term:
    if isinstance(t, Var):
        return m.get(t, t)
    if isinstance(t, Op):
        return Op(t.op, tuple(_subst(a, m) for a in t.args))
    if isinstance(t, PredApp):
        return PredApp(t.name, tuple(_subst(a, m) for a in t.args))
    if isinstance(t, Quant):
        inner = {k: v for k, v in m.items() if k not in t.vars}
        if not inner:
            return t
        body_free = free_vars_set(t.body)
        inner = {k: v for k, v in inner.items() if k in body_free}
        if not inner:
            return t
        range_free: set[Var] = set()
        for r in inner.values():
            range_free |= free_vars_set(r)
        new_vars = []
        avoid = range_free | all_vars(t.body) | set(inner)
        for v in t.vars:
            if v in range_free:
                nv = fresh_var(v, avoid)
                avoid.add(nv)
                inner[v] = nv
                new_vars.append(nv)
            else:
                new_vars.append(v)
        return Quant(t.kind, tuple(new_vars), _subst(t.body, inner))
    return t


def rename_copy(t: Term, i: int) -> Term:
    """Move a copy-free formula over V (and V') to the i-th trace copy."""
    if i < 1:
        raise FormulaError(f"copy index must be positive, got {i}")
    for v in all_vars(t):
        if v.copy is not None:
            raise FormulaError(f"variable {v} already carries a copy index")
    return map_vars(t, lambda v: v.with_copy(i))


def prime(t: Term, only: Iterable[Var] | None = None) -> Term:
    """Prime the free (optionally: selected) unprimed variables of ``t``."""
    fv = free_vars(t)
    targets = set(only) if only is not None else {v for v in fv if not v.primed}
    return substitute(t, {v: v.prime() for v in fv if v in targets})


def apply_definitions(t: Term, defs: Mapping[str, tuple[Vocabulary, Term]]) -> Term:
    """Replace unknown-predicate applications by their defining formulas."""
    if isinstance(t, PredApp):
        args = tuple(apply_definitions(a, defs) for a in t.args)
        if t.name not in defs:
            return PredApp(t.name, args)
        params, body = defs[t.name]
        return substitute(body, dict(zip(params, args, strict=True)))
    if isinstance(t, Op):
        return Op(t.op, tuple(apply_definitions(a, defs) for a in t.args))
    if isinstance(t, Quant):
        body = apply_definitions(t.body, defs)
        clash = set()
        for params, d in defs.values():
            clash |= free_vars_set(d) - set(params)
        if clash & set(t.vars):
            raise FormulaError("definition would capture a bound variable")
        return Quant(t.kind, t.vars, body)
    return t


def normalize_bound(t: Term) -> Term:
    """Rename bound variables canonically (``_b0``, ``_b1``, ... in binding order)."""
    counter = itertools.count()

    def go(u: Term, env: dict[Var, Var]) -> Term:
        if isinstance(u, Var):
            return env.get(u, u)
        if isinstance(u, Op):
            return Op(u.op, tuple(go(a, env) for a in u.args))
        if isinstance(u, PredApp):
            return PredApp(u.name, tuple(go(a, env) for a in u.args))
        if isinstance(u, Quant):
            inner = dict(env)
            nv = []
            for v in u.vars:
                w = Var(f"_b{next(counter)}", v.sort)
                inner[v] = w
                nv.append(w)
            return Quant(u.kind, tuple(nv), go(u.body, inner))
        return u

    return go(t, {})


# ---------------------------------------------------------------------- printing

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.!$?~]*$")
_SPELLED = re.compile(r"^([A-Za-z_][A-Za-z0-9_.!$?~]*)(?:@([0-9]+))?(')?$")


def print_formula(t: Term) -> str:
    """Deterministic s-expression rendering (inverse of :func:`parse_formula`)."""
    parts: list[str] = []
    _print(t, parts)
    return "".join(parts)


def _print(t: Term, out: list[str]) -> None:
    if isinstance(t, Var):
        out.append(t.spelled())
    elif isinstance(t, BoolLit):
        out.append("true" if t.value else "false")
    elif isinstance(t, IntLit):
        out.append(str(t.value))
    elif isinstance(t, Op):
        out.append("(" + t.op)
        for a in t.args:
            out.append(" ")
            _print(a, out)
        out.append(")")
    elif isinstance(t, PredApp):
        if not t.args:
            out.append(t.name)
            return
        out.append("(" + t.name)
        for a in t.args:
            out.append(" ")
            _print(a, out)
        out.append(")")
    elif isinstance(t, Quant):
        binders = " ".join(f"({v.spelled()} {v.sort})" for v in t.vars)
        out.append(f"({t.kind} ({binders}) ")
        _print(t.body, out)
        out.append(")")
    else:  # pragma: no cover
        raise TypeError(t)


# ----------------------------------------------------------------------- parsing


def split_spelling(text: str) -> tuple[str, int | None, bool] | None:
    m = _SPELLED.match(text)
    if not m:
        return None
    copy = int(m.group(2)) if m.group(2) is not None else None
    return m.group(1), copy, m.group(3) is not None


def parse_formula(
    text: str | SExpr,
    vocab: Iterable[Var] = (),
    unknowns: Signature | None = None,
    constants: Mapping[str, Term] | None = None,
    expect_bool: bool = True,
) -> Term:
    """Parse an s-expression against a vocabulary and an unknown-predicate signature.

    ``vocab`` supplies the sort of each base name; copy suffixes and primes
    are accepted on any vocabulary name.  ``constants`` maps extra symbols
    (label constants) to terms.
    """
    try:
        node = read_one(text) if isinstance(text, str) else text
    except SExprError as exc:
        raise FormulaError(str(exc)) from exc
    sorts: dict[str, Sort] = {}
    for v in vocab:
        prev = sorts.setdefault(v.name, v.sort)
        if prev != v.sort:
            raise SortError(f"vocabulary declares {v.name} with two sorts")
    p = _Parser(sorts, dict(unknowns or {}), dict(constants or {}))
    t = p.term(node, {})
    s = check_sorts(t, p.unknowns, getattr(node, "pos", None))
    if expect_bool and s != BOOL:
        raise SortError(f"expected a formula, got a term of sort {s}", getattr(node, "pos", None))
    return t


class _Parser:
    def __init__(self, sorts: dict[str, Sort], unknowns: dict, constants: dict):
        self.sorts = sorts
        self.unknowns = unknowns
        self.constants = constants

    def term(self, node: SExpr, bound: dict[tuple, Var]) -> Term:
        if isinstance(node, Atom):
            return self.atom(node, bound)
        if not node.items:
            raise FormulaError("empty application", node.pos)
        head = node[0]
        if not isinstance(head, Atom):
            raise FormulaError("operator position must be a symbol", node.pos)
        op = head.text
        if op in ("forall", "exists"):
            if len(node) != 3 or not isinstance(node[1], SList):
                raise FormulaError(f"malformed {op}", node.pos)
            inner = dict(bound)
            vs = []
            for b in node[1].items:
                if not (isinstance(b, SList) and len(b) == 2 and isinstance(b[0], Atom)):
                    raise FormulaError("malformed binder", getattr(b, "pos", node.pos))
                spelled = split_spelling(b[0].text)
                if spelled is None:
                    raise FormulaError(f"bad variable name {b[0].text!r}", b[0].pos)
                v = Var(spelled[0], parse_sort(b[1]), spelled[1], spelled[2])
                inner[v.key] = v
                vs.append(v)
            if not vs:
                raise FormulaError(f"{op} binds no variables", node.pos)
            return Quant(op, tuple(vs), self.term(node[2], inner))
        args = tuple(self.term(a, bound) for a in node.items[1:])
        if op in OPS:
            t = Op(op, args)
            check_sorts(t, self.unknowns, node.pos)
            return t
        if op in self.unknowns:
            t = PredApp(op, args)
            check_sorts(t, self.unknowns, node.pos)
            return t
        raise FormulaError(f"unbound function symbol {op!r}", head.pos)

    def atom(self, node: Atom, bound: dict[tuple, Var]) -> Term:
        text = node.text
        if not node.quoted:
            if text == "true":
                return TRUE
            if text == "false":
                return FALSE
            if re.fullmatch(r"-?[0-9]+", text):
                return IntLit(int(text))
        if text in self.constants:
            return self.constants[text]
        spelled = split_spelling(text)
        if spelled is None:
            raise FormulaError(f"unbound symbol {text!r}", node.pos)
        if spelled in bound:
            return bound[spelled]
        name, copy, primed = spelled
        if name in self.sorts:
            return Var(name, self.sorts[name], copy, primed)
        if text in self.unknowns and len(self.unknowns[text]) == 0:
            return PredApp(text, ())
        raise FormulaError(f"unbound symbol {text!r}", node.pos)


# -------------------------------------------------------------------- evaluation


class EvaluationError(ValueError):
    pass


class OutOfBounds(EvaluationError):
    """A select/store touched an index outside the finite array model."""


def _select(a, i):
    if not isinstance(i, int) or i < 0 or i >= len(a):
        raise OutOfBounds(f"array index {i} outside [0, {len(a)})")
    return a[i]


def _store(a, i, v):
    if not isinstance(i, int) or i < 0 or i >= len(a):
        raise OutOfBounds(f"array index {i} outside [0, {len(a)})")
    return a[:i] + (v,) + a[i + 1 :]


Env = Mapping[Var, object]
Domains = Callable[[Var], Iterable[object]]


def compile_formula(
    t: Term,
    domains: Domains | None = None,
    preds: Mapping[str, Callable[..., bool]] | None = None,
) -> Callable[[Env], object]:
    """Compile ``t`` into a Python closure over an environment.

    Arrays are modelled as tuples indexed from 0.  Quantifiers range over
    ``domains(var)``; unknown predicates are looked up in ``preds``.
    """

    def c(u: Term) -> Callable[[Env], object]:
        if isinstance(u, Var):
            def get(env, u=u):
                try:
                    return env[u]
                except KeyError:
                    raise EvaluationError(f"no value for {u}") from None
            return get
        if isinstance(u, (IntLit, BoolLit)):
            val = u.value
            return lambda env: val
        if isinstance(u, PredApp):
            if preds is None or u.name not in preds:
                raise EvaluationError(f"no interpretation for {u.name}")
            fn = preds[u.name]
            cargs = [c(a) for a in u.args]
            return lambda env: bool(fn(*(g(env) for g in cargs)))
        if isinstance(u, Quant):
            if domains is None:
                raise EvaluationError("quantifier evaluation needs finite domains")
            body = c(u.body)
            qvars = u.vars
            want = u.kind == "exists"

            def quant(env):
                doms = [list(domains(v)) for v in qvars]
                for vals in itertools.product(*doms):
                    inner = dict(env)
                    inner.update(zip(qvars, vals))
                    if bool(body(inner)) == want:
                        return want
                return not want

            return quant
        assert isinstance(u, Op)
        gs = [c(a) for a in u.args]
        op = u.op
        if op == "and":
            return lambda env: all(g(env) for g in gs)
        if op == "or":
            return lambda env: any(g(env) for g in gs)
        if op == "not":
            g0 = gs[0]
            return lambda env: not g0(env)
        if op == "=>":
            def imp(env):
                vals = gs
                # right-associative chain
                res = vals[-1](env)
                for g in reversed(vals[:-1]):
                    res = (not g(env)) or res
                return res
            return imp
        if op == "=":
            def equal(env):
                first = gs[0](env)
                return all(g(env) == first for g in gs[1:])
            return equal
        if op in CMP_OPS:
            import operator as _o
            f = {"<": _o.lt, "<=": _o.le, ">": _o.gt, ">=": _o.ge}[op]

            def cmp(env):
                vals = [g(env) for g in gs]
                return all(f(x, y) for x, y in zip(vals, vals[1:]))

            return cmp
        if op == "+":
            return lambda env: sum(g(env) for g in gs)
        if op == "*":
            def mul(env):
                r = 1
                for g in gs:
                    r *= g(env)
                return r
            return mul
        if op == "-":
            if len(gs) == 1:
                g0 = gs[0]
                return lambda env: -g0(env)
            def sub(env):
                r = gs[0](env)
                for g in gs[1:]:
                    r -= g(env)
                return r
            return sub
        if op == "ite":
            gc, gt, ge = gs
            return lambda env: gt(env) if gc(env) else ge(env)
        if op == "select":
            ga, gi = gs
            return lambda env: _select(ga(env), gi(env))
        if op == "store":
            ga, gi, gv = gs
            return lambda env: _store(ga(env), gi(env), gv(env))
        raise EvaluationError(f"cannot evaluate operator {op!r}")

    return c(t)


def evaluate(
    t: Term,
    env: Env,
    domains: Domains | None = None,
    preds: Mapping[str, Callable[..., bool]] | None = None,
) -> object:
    return compile_formula(t, domains, preds)(env)
