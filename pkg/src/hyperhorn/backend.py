"""SMT-LIB serialization and external solver sessions.

Every query is written to a file and handed to ``<executable> <args> <file>``;
nothing is linked in-process.  The executable defaults to ``z3`` on ``PATH``
and can be overridden with the ``HYPERHORN_SOLVER`` environment variable.
"""

from __future__ import annotations

import os
import re
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from hyperhorn.formula import (
    BOOL,
    BoolLit,
    IntLit,
    Op,
    PredApp,
    Quant,
    Sort,
    Term,
    Var,
    check_sorts,
    free_vars,
    not_,
    parse_sort,
    pred_apps,
    sort_of,
)
from hyperhorn.horn import Definition, HornSystem, Solution
from hyperhorn.sexpr import Atom, SExpr, SExprError, SList, read_all

ENV_SOLVER = "HYPERHORN_SOLVER"


class BackendError(RuntimeError):
    pass


class ModelParseError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    executable: str | None = None
    args: tuple[str, ...] = ()
    timeout: float = 300.0
    workdir: Path | None = None
    grace: float = 2.0

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def resolve(self) -> str:
        exe = os.environ.get(ENV_SOLVER) or self.executable or "z3"
        found = shutil.which(exe)
        if found is None:
            raise BackendError(f"solver executable {exe!r} not found")
        return found


# ------------------------------------------------------------------ printing

_SIMPLE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.!$?~]*$")
_RESERVED = {"and", "or", "not", "=>", "ite", "let", "forall", "exists", "true", "false", "_", "!", "as"}


def smt_symbol(name: str) -> str:
    if _SIMPLE.match(name) and name not in _RESERVED:
        return name
    if "|" in name or "\\" in name:
        raise BackendError(f"symbol {name!r} cannot be quoted")
    return f"|{name}|"


def smt_var(v: Var) -> str:
    return smt_symbol(v.spelled())


def smt_sort(s: Sort) -> str:
    return str(s)


def smt_term(t: Term) -> str:
    out: list[str] = []
    _emit(t, out)
    return "".join(out)


def _emit(t: Term, out: list[str]) -> None:
    if isinstance(t, Var):
        out.append(smt_var(t))
    elif isinstance(t, BoolLit):
        out.append("true" if t.value else "false")
    elif isinstance(t, IntLit):
        out.append(str(t.value) if t.value >= 0 else f"(- {-t.value})")
    elif isinstance(t, Op):
        out.append("(" + t.op)
        for a in t.args:
            out.append(" ")
            _emit(a, out)
        out.append(")")
    elif isinstance(t, PredApp):
        if not t.args:
            out.append(smt_symbol(t.name))
            return
        out.append("(" + smt_symbol(t.name))
        for a in t.args:
            out.append(" ")
            _emit(a, out)
        out.append(")")
    elif isinstance(t, Quant):
        binders = " ".join(f"({smt_var(v)} {smt_sort(v.sort)})" for v in t.vars)
        out.append(f"({t.kind} ({binders}) ")
        _emit(t.body, out)
        out.append(")")
    else:  # pragma: no cover
        raise TypeError(t)


def emit_horn_text(h: HornSystem) -> str:
    """Deterministic SMT-LIB 2.6 rendering with logic HORN."""
    lines = ["(set-logic HORN)"]
    for name in sorted(h.unknowns):
        sorts = " ".join(smt_sort(v.sort) for v in h.unknowns[name])
        lines.append(f"(declare-fun {smt_symbol(name)} ({sorts}) Bool)")
    for c in h.clauses:
        body_parts = [smt_term(p) for p in c.body]
        if c.constraint != BoolLit(True) or not body_parts:
            body_parts.append(smt_term(c.constraint))
        body = body_parts[0] if len(body_parts) == 1 else "(and " + " ".join(body_parts) + ")"
        head = smt_term(c.head) if c.head is not None else "false"
        imp = f"(=> {body} {head})"
        if c.universals:
            binders = " ".join(f"({smt_var(v)} {smt_sort(v.sort)})" for v in c.universals)
            lines.append(f"(assert (forall ({binders}) {imp}))")
        else:
            lines.append(f"(assert {imp})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def declarations(formulas: Sequence[Term]) -> list[str]:
    """declare-const / declare-fun lines for the free symbols of ``formulas``."""
    consts: dict[str, Sort] = {}
    funs: dict[str, tuple[Sort, ...]] = {}
    for f in formulas:
        for v in free_vars(f):
            consts.setdefault(smt_var(v), v.sort)
        for p in pred_apps(f):
            sig = tuple(sort_of(a) for a in p.args)
            prev = funs.setdefault(p.name, sig)
            if prev != sig:
                raise BackendError(f"predicate {p.name} used with two signatures")
    lines = [f"(declare-const {n} {smt_sort(s)})" for n, s in consts.items()]
    for n, sig in funs.items():
        lines.append(f"(declare-fun {smt_symbol(n)} ({' '.join(map(smt_sort, sig))}) Bool)")
    return lines


# ------------------------------------------------------------------ sessions


@dataclass
class RunResult:
    status: str  # sat | unsat | unknown | timeout | error
    stdout: str
    stderr: str
    elapsed: float
    returncode: int | None
    query_path: Path | None = None


def run_solver(text: str, config: SolverConfig, stem: str = "query") -> RunResult:
    """Run one solver session on ``text``; the process group is killed on timeout."""
    exe = config.resolve()
    if config.workdir is not None:
        config.workdir.mkdir(parents=True, exist_ok=True)
        path = config.workdir / f"{stem}.smt2"
        path.write_text(text)
        cleanup = False
    else:
        fd, name = tempfile.mkstemp(prefix=f"hyperhorn-{stem}-", suffix=".smt2")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        path = Path(name)
        cleanup = True
    start = time.monotonic()
    proc = subprocess.Popen(
        [exe, *config.args, str(path)],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=config.timeout)
        status = _status_of(out)
        rc: int | None = proc.returncode
        if status == "error" and rc == 0:
            status = "unknown"
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        out, err = proc.communicate()
        status, rc = "timeout", None
    finally:
        if proc.poll() is None:  # pragma: no cover - defensive
            _kill_group(proc)
            proc.wait()
        if cleanup:
            path.unlink(missing_ok=True)
    elapsed = time.monotonic() - start
    if config.workdir is not None:
        (config.workdir / f"{stem}.transcript.txt").write_text(
            f"# command: {exe} {' '.join(config.args)} {path}\n# status: {status}\n"
            f"# elapsed: {elapsed:.3f}s\n# returncode: {rc}\n--- stdout\n{out}--- stderr\n{err}"
        )
    return RunResult(status, out, err, elapsed, rc, None if cleanup else path)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _status_of(out: str) -> str:
    for line in out.splitlines():
        s = line.strip()
        if s in ("sat", "unsat", "unknown"):
            return s
        if s.startswith("(error") or s.startswith("(:reason-unknown"):
            continue
        if s:
            break
    return "error"


# ------------------------------------------------------------- Horn solving


@dataclass
class SolverOutcome:
    status: str  # sat | unsat | unknown | timeout
    solution: Solution | None = None
    reason: str = ""
    transcript: str = ""
    elapsed: float = 0.0
    query_path: Path | None = None


def solve(h: HornSystem, config: SolverConfig, stem: str = "horn") -> SolverOutcome:
    text = emit_horn_text(h)
    try:
        run = run_solver(text, config, stem)
    except BackendError as exc:
        return SolverOutcome("unknown", reason=str(exc))
    transcript = run.stdout + ("\n--- stderr\n" + run.stderr if run.stderr else "")
    if run.status == "sat":
        try:
            sol = parse_model(_after_status(run.stdout), h.unknowns)
        except ModelParseError as exc:
            return SolverOutcome("unknown", None, f"unparsable model: {exc}", transcript, run.elapsed, run.query_path)
        return SolverOutcome("sat", sol, "", transcript, run.elapsed, run.query_path)
    if run.status == "unsat":
        return SolverOutcome("unsat", None, "", transcript, run.elapsed, run.query_path)
    if run.status == "timeout":
        return SolverOutcome("timeout", None, f"no answer within {config.timeout}s", transcript, run.elapsed, run.query_path)
    reason = "solver answered unknown" if run.status == "unknown" else f"solver failed (exit {run.returncode})"
    return SolverOutcome("unknown", None, reason, transcript, run.elapsed, run.query_path)


def _after_status(out: str) -> str:
    lines = out.splitlines()
    for i, line in enumerate(lines):
        if line.strip() in ("sat", "unsat", "unknown"):
            return "\n".join(lines[i + 1 :])
    return out


def parse_model(text: str, signatures: Mapping[str, Sequence[Var]]) -> Solution:
    """Parse define-fun forms for every unknown; parameters are renamed positionally."""
    try:
        nodes = read_all(text)
    except SExprError as exc:
        raise ModelParseError(str(exc)) from exc
    defs: list[SList] = []

    def collect(n: SExpr) -> None:
        if isinstance(n, SList):
            if n.head() == "define-fun":
                defs.append(n)
            elif n.head() == "model" or n.head() is None:
                for c in n.items[1:] if n.head() == "model" else n.items:
                    collect(c)
            elif n.head() == "error":
                raise ModelParseError(f"solver reported an error: {n}")
            else:
                raise ModelParseError(f"unexpected form ({n.head()} ...) at offset {n.pos}")

    for n in nodes:
        collect(n)
    sol: Solution = {}
    for d in defs:
        if len(d) != 5 or not isinstance(d[1], Atom) or not isinstance(d[2], SList):
            raise ModelParseError(f"malformed define-fun at offset {d.pos}")
        name = d[1].text
        if name not in signatures:
            # auxiliary definitions are tolerated only if unreferenced
            raise ModelParseError(f"definition of undeclared symbol {name!r}")
        if name in sol:
            raise ModelParseError(f"duplicate definition of {name}")
        params = tuple(signatures[name])
        if len(d[2]) != len(params):
            raise ModelParseError(f"{name}: expected {len(params)} parameters, got {len(d[2])}")
        env: dict[str, Term] = {}
        for p, v in zip(d[2].items, params):
            if not (isinstance(p, SList) and len(p) == 2 and isinstance(p[0], Atom)):
                raise ModelParseError(f"{name}: malformed parameter")
            try:
                ps = parse_sort(p[1])
            except ValueError as exc:
                raise ModelParseError(f"{name}: {exc}") from exc
            if ps != v.sort:
                raise ModelParseError(f"{name}: parameter {p[0].text} has sort {ps}, expected {v.sort}")
            env[p[0].text] = v
        try:
            if parse_sort(d[3]) != BOOL:
                raise ModelParseError(f"{name}: result sort must be Bool")
        except ValueError as exc:
            raise ModelParseError(f"{name}: {exc}") from exc
        body = smt_to_term(d[4], env)
        try:
            if check_sorts(body) != BOOL:
                raise ModelParseError(f"{name}: body is not Boolean")
        except ValueError as exc:
            raise ModelParseError(f"{name}: {exc}") from exc
        sol[name] = Definition(params, body)
    missing = [n for n in signatures if n not in sol]
    if missing:
        raise ModelParseError(f"model lacks definitions for {', '.join(sorted(missing))}")
    return sol


_SMT_OPS = {"and", "or", "not", "=>", "=", "<", "<=", ">", ">=", "+", "-", "*", "ite", "select", "store"}


def smt_to_term(node: SExpr, env: Mapping[str, Term]) -> Term:
    """Convert a solver-produced SMT-LIB term; ``let`` is expanded away."""
    if isinstance(node, Atom):
        text = node.text
        if text in env:
            return env[text]
        if not node.quoted:
            if text == "true":
                return BoolLit(True)
            if text == "false":
                return BoolLit(False)
            if text.isdigit():
                return IntLit(int(text))
        raise ModelParseError(f"unbound symbol {text!r} at offset {node.pos}")
    if not node.items:
        raise ModelParseError(f"empty form at offset {node.pos}")
    head = node.head()
    if head == "let":
        if len(node) != 3 or not isinstance(node[1], SList):
            raise ModelParseError(f"malformed let at offset {node.pos}")
        inner = dict(env)
        for b in node[1].items:
            if not (isinstance(b, SList) and len(b) == 2 and isinstance(b[0], Atom)):
                raise ModelParseError(f"malformed let binding at offset {node.pos}")
            inner[b[0].text] = smt_to_term(b[1], env)
        return smt_to_term(node[2], inner)
    if head in ("forall", "exists"):
        if len(node) != 3 or not isinstance(node[1], SList):
            raise ModelParseError(f"malformed {head} at offset {node.pos}")
        inner = dict(env)
        vs = []
        for n, b in enumerate(node[1].items):
            if not (isinstance(b, SList) and len(b) == 2 and isinstance(b[0], Atom)):
                raise ModelParseError(f"malformed binder at offset {node.pos}")
            v = Var(f"_q{node.pos}_{n}", parse_sort(b[1]))
            inner[b[0].text] = v
            vs.append(v)
        return Quant(head, tuple(vs), smt_to_term(node[2], inner))
    args = [smt_to_term(a, env) for a in node.items[1:]]
    if head == "-" and len(args) == 1 and isinstance(args[0], IntLit):
        return IntLit(-args[0].value)
    if head == "distinct":
        pairs = [not_(Op("=", (a, b))) for i, a in enumerate(args) for b in args[i + 1 :]]
        return pairs[0] if len(pairs) == 1 else Op("and", tuple(pairs))
    if head in _SMT_OPS:
        if head in ("and", "or") and not args:
            return BoolLit(head == "and")
        if head in ("and", "or") and len(args) == 1:
            return args[0]
        return Op(head, tuple(args))
    raise ModelParseError(f"unsupported operator {head!r} at offset {node.pos}")


def solution_text(sol: Solution) -> str:
    """Render a solution in define-fun style (parse_model's input format)."""
    lines = ["("]
    for name in sorted(sol):
        d = sol[name]
        params = " ".join(f"({smt_var(v)} {smt_sort(v.sort)})" for v in d.params)
        lines.append(f"  (define-fun {smt_symbol(name)} ({params}) Bool {smt_term(d.body)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------- satisfiability queries


@dataclass
class SatResult:
    status: str  # sat | unsat | unknown
    model: dict[str, object] = field(default_factory=dict)
    reason: str = ""
    elapsed: float = 0.0


def check_sat(f: Term, config: SolverConfig, stem: str = "sat", want_model: bool = True) -> SatResult:
    lines = declarations([f])
    lines.append(f"(assert {smt_term(f)})")
    lines.append("(check-sat)")
    if want_model:
        lines.append("(get-model)")
    try:
        run = run_solver("\n".join(lines) + "\n", config, stem)
    except BackendError as exc:
        return SatResult("unknown", reason=str(exc))
    if run.status == "sat":
        model = _parse_values(_after_status(run.stdout)) if want_model else {}
        return SatResult("sat", model, elapsed=run.elapsed)
    if run.status == "unsat":
        return SatResult("unsat", elapsed=run.elapsed)
    reason = "timeout" if run.status == "timeout" else (run.stdout + run.stderr).strip()[:500] or run.status
    return SatResult("unknown", reason=reason, elapsed=run.elapsed)


def _parse_values(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    try:
        nodes = read_all(text)
    except SExprError:
        return out
    stack = list(nodes)
    while stack:
        n = stack.pop(0)
        if not isinstance(n, SList):
            continue
        if n.head() == "define-fun" and len(n) == 5 and isinstance(n[2], SList) and len(n[2]) == 0:
            out[str(n[1])] = _value(n[4])
        elif n.head() in (None, "model"):
            stack.extend(n.items)
    return out


def _value(n: SExpr) -> object:
    if isinstance(n, Atom):
        if n.text == "true":
            return True
        if n.text == "false":
            return False
        if n.text.isdigit():
            return int(n.text)
        return n.text
    if n.head() == "-" and len(n) == 2 and isinstance(n[1], Atom) and n[1].text.isdigit():
        return -int(n[1].text)
    return _render(n)


def _render(n: SExpr) -> str:
    if isinstance(n, Atom):
        return f"|{n.text}|" if n.quoted else n.text
    return "(" + " ".join(_render(c) for c in n.items) + ")"


@dataclass
class ValidityResult:
    status: str  # valid | invalid | unknown
    counter_model: dict[str, object] = field(default_factory=dict)
    reason: str = ""
    elapsed: float = 0.0


def check_validity(f: Term, config: SolverConfig, stem: str = "validity") -> ValidityResult:
    """f is valid iff not f is unsatisfiable (free variables read universally)."""
    res = check_sat(not_(f), config, stem)
    if res.status == "unsat":
        return ValidityResult("valid", elapsed=res.elapsed)
    if res.status == "sat":
        return ValidityResult("invalid", res.model, elapsed=res.elapsed)
    return ValidityResult("unknown", reason=res.reason, elapsed=res.elapsed)


def check_many(
    formulas: Sequence[Term], config: SolverConfig, stem: str = "validity", workers: int | None = None
) -> list[ValidityResult]:
    """Independent validity sessions, run concurrently."""
    n = workers or min(8, max(1, os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(check_validity, f, config, f"{stem}-{i:03d}") for i, f in enumerate(formulas)]
        return [fut.result() for fut in futures]
