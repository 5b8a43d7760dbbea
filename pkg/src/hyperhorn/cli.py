"""Command-line driver: parse, build the scheme, transform, abstract, solve, decide and report."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from hyperhorn.abstraction import abstract_horn
from hyperhorn.backend import SolverConfig, check_many, emit_horn_text, solve
from hyperhorn.formula import FormulaError, Term
from hyperhorn.horn import emit_translation_certificates, lint_horn, transform
from hyperhorn.oracle import OracleError, array_values, build_explicit_game, int_range, solve_attractor
from hyperhorn.scheme import (
    GAME_FINITE,
    GAME_RESTRICTED,
    KSAFETY,
    SchemeSystem,
    build_game_finite_scheme,
    build_game_restricted_scheme,
    build_ksafety_scheme,
    dump_scheme,
)
from hyperhorn.sexpr import SExprError
from hyperhorn.system import (
    HyperSpec,
    InputError,
    TransitionSystem,
    check_determinism,
    expand_systems,
    load_spec,
    load_system,
    parse_formula_list,
    totalize,
)
from hyperhorn.verdict import (
    INCONCLUSIVE,
    Verdict,
    decide_verdict,
    reconstruct_witness,
    report_dict,
    report_json,
    report_text,
    validate_witness,
)

MODE_NAMES = {
    "ksafety": KSAFETY,
    "forall-exists-finite": GAME_FINITE,
    "forall-exists-restricted": GAME_RESTRICTED,
}
EXIT_ERROR = 3


class StageError(RuntimeError):
    def __init__(self, stage: str, msg: str) -> None:
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


@dataclass
class RunConfig:
    systems: list[Path]
    spec: Path
    mode: str = KSAFETY
    predicates: Path | None = None
    restrictions: Path | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    out: Path = Path("hyperhorn-out")
    emit_only: bool = False
    check_determinism: bool = False
    allow_nondeterministic: bool = False
    certify_transformation: bool = False

    def __post_init__(self) -> None:
        if self.mode == GAME_RESTRICTED and self.restrictions is None:
            raise InputError("the restricted mode requires --restrictions")
        if self.mode != GAME_RESTRICTED and self.restrictions is not None:
            raise InputError("--restrictions is only meaningful in the restricted mode")


@dataclass
class Pipeline:
    systems: tuple[TransitionSystem, ...]
    spec: HyperSpec
    scheme: SchemeSystem
    horn_text: str
    abstracted: bool
    horn: object


def _stage(name: str):
    """Re-raise input and parse failures tagged with the pipeline stage."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if ev is not None and isinstance(ev, (InputError, FormulaError, SExprError, OSError, ValueError, KeyError)):
                raise StageError(name, str(ev)) from ev
            return False

    return _Ctx()


def load_inputs(cfg: RunConfig) -> tuple[tuple[TransitionSystem, ...], HyperSpec]:
    with _stage("parse"):
        raw = [load_system(p) for p in cfg.systems]
        spec = load_spec(cfg.spec, raw)
        if len(raw) not in (1, spec.k):
            raise InputError(f"give one shared system or exactly {spec.k}, got {len(raw)}")
    with _stage("totalize"):
        systems = tuple(totalize(ts) for ts in raw)
    return systems, spec


def build_scheme(cfg: RunConfig, systems: Sequence[TransitionSystem], spec: HyperSpec) -> SchemeSystem:
    with _stage("scheme"):
        if cfg.mode == KSAFETY:
            return build_ksafety_scheme(systems, spec)
        if cfg.mode == GAME_FINITE:
            return build_game_finite_scheme(systems, spec)
        from hyperhorn.composition import Composition

        comp = Composition(systems, spec)
        restrictions = parse_formula_list(Path(cfg.restrictions).read_text(), "restrictions", comp.vocab)  # type: ignore[arg-type]
        return build_game_restricted_scheme(systems, spec, restrictions)


def load_predicates(path: Path, scheme: SchemeSystem) -> tuple[Term, ...]:
    with _stage("predicates"):
        return parse_formula_list(path.read_text(), "predicates", scheme.v_vocab, scheme.w_vocab)


def prepare(cfg: RunConfig) -> Pipeline:
    systems, spec = load_inputs(cfg)
    scheme = build_scheme(cfg, systems, spec)
    with _stage("transform"):
        horn = transform(scheme)
        diags = lint_horn(horn)
        if diags:
            raise StageError("transform", "; ".join(diags))
    abstracted = cfg.predicates is not None
    if abstracted:
        preds = load_predicates(cfg.predicates, scheme)  # type: ignore[arg-type]
        with _stage("abstract"):
            horn = abstract_horn(horn, preds, scheme.v_vocab, scheme.w_vocab)
            diags = lint_horn(horn)
            if diags:
                raise StageError("abstract", "; ".join(diags))
    return Pipeline(systems, spec, scheme, emit_horn_text(horn), abstracted, horn)


def _determinism(
    cfg: RunConfig, checks: SolverConfig, systems: Sequence[TransitionSystem], spec: HyperSpec
) -> dict:
    out = {}
    seen: set[int] = set()
    for ts in expand_systems(systems, spec.k):
        if id(ts) in seen:
            continue
        seen.add(id(ts))
        res = check_determinism(ts, checks)
        out[ts.name] = {"status": res.status, **({"witness": {k: str(v) for k, v in res.witness.items()}} if res.witness else {})}
        if res.status == "nondeterministic" and cfg.mode != KSAFETY and not cfg.allow_nondeterministic:
            raise StageError(
                "determinism",
                f"system {ts.name} is nondeterministic (witness {out[ts.name].get('witness', {})}); "
                "the game modes assume deterministic systems, pass --allow-nondeterministic to override",
            )
    return out


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute the pipeline and write its artifacts; returns the exit code and the report document."""
    timings: dict[str, float] = {}
    t0 = time.monotonic()
    p = prepare(cfg)
    timings["build"] = time.monotonic() - t0
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "scheme.txt").write_text(dump_scheme(p.scheme))
    (cfg.out / "horn.smt2").write_text(p.horn_text)
    extra: dict = {"clauses": len(p.horn.clauses), "choices": len(p.scheme.choices)}  # type: ignore[attr-defined]
    if cfg.emit_only:
        doc = {"verdict": "emitted", "mode": p.scheme.mode, "horn": str(cfg.out / "horn.smt2"), **extra}
        return 0, doc
    solver = SolverConfig(cfg.solver.executable, cfg.solver.args, cfg.solver.timeout, cfg.out, cfg.solver.grace)
    checks = SolverConfig(cfg.solver.executable, (), cfg.solver.timeout, cfg.out / "checks", cfg.solver.grace)
    if cfg.check_determinism or p.scheme.mode != KSAFETY:
        t = time.monotonic()
        extra["determinism"] = _determinism(cfg, checks, p.systems, p.spec)
        timings["determinism"] = time.monotonic() - t
    cert_ok = True
    if cfg.certify_transformation:
        t = time.monotonic()
        certs = emit_translation_certificates(p.scheme)
        results = check_many([c.formula for c in certs], checks, "certificate")
        extra["certificates"] = [{"name": c.name, "status": r.status} for c, r in zip(certs, results)]
        cert_ok = all(r.status == "valid" for r in results)
        timings["certify"] = time.monotonic() - t
    t = time.monotonic()
    outcome = solve(p.horn, solver, "horn")  # type: ignore[arg-type]
    timings["solve"] = time.monotonic() - t
    verdict = decide_verdict(outcome.status, p.scheme.mode, p.abstracted)
    if outcome.reason and verdict.kind == INCONCLUSIVE and outcome.status != "unsat":
        verdict = Verdict(INCONCLUSIVE, outcome.reason)
    validation = None
    if outcome.status == "sat" and outcome.solution is not None:
        t = time.monotonic()
        witness = reconstruct_witness(outcome.solution, p.scheme)
        validation = validate_witness(witness, p.scheme, checks)
        timings["validate"] = time.monotonic() - t
        if validation.ok:
            verdict = Verdict(verdict.kind, verdict.reason, witness)
        else:
            names = ", ".join(f"{r.name}={r.status}" for r in validation.failures())
            verdict = Verdict(INCONCLUSIVE, f"witness validation failed: {names}", witness)
    if not cert_ok:
        verdict = Verdict(INCONCLUSIVE, "a transformation certificate was not confirmed valid", verdict.witness)
    timings["total"] = time.monotonic() - t0
    doc = report_dict(
        verdict,
        mode=p.scheme.mode,
        abstracted=p.abstracted,
        solver_status=outcome.status,
        timings=timings,
        validation=validation,
        extra=extra,
    )
    (cfg.out / "report.txt").write_text(report_text(doc))
    (cfg.out / "report.json").write_text(report_json(doc))
    return verdict.exit_code, doc


# ----------------------------------------------------------------- arguments


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors must not collide with verdict codes
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hyperhorn", description="Verify k-safety and forall-exists hyperproperties via CHC solving.")
    ap.add_argument("--mode", choices=sorted(MODE_NAMES), default="ksafety")
    ap.add_argument("--system", action="append", required=True, type=Path, help="system file (one shared, or one per trace)")
    ap.add_argument("--spec", required=True, type=Path)
    ap.add_argument("--predicates", type=Path, help="predicates for implicit abstraction")
    ap.add_argument("--restrictions", type=Path, help="restriction set (restricted mode)")
    ap.add_argument("--solver", help="CHC solver executable (default: z3; HYPERHORN_SOLVER overrides)")
    ap.add_argument("--solver-arg", action="append", default=[], help="extra solver argument (repeatable)")
    ap.add_argument("--timeout", type=float, default=300.0, help="seconds per solver session")
    ap.add_argument("--out", type=Path, default=Path("hyperhorn-out"))
    ap.add_argument("--emit-only", action="store_true", help="write the Horn file and stop")
    ap.add_argument("--check-determinism", action="store_true", help="also check determinism in ksafety mode")
    ap.add_argument("--allow-nondeterministic", action="store_true", help="run game modes on nondeterministic systems")
    ap.add_argument("--certify-transformation", action="store_true", help="check the model translations by validity queries")
    ap.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    return ap


def _bound(text: str) -> tuple[str, tuple]:
    """NAME=LO:HI for integers, NAME=SIZE:LO:HI for arrays."""
    name, _, rng = text.partition("=")
    parts = [int(x) for x in rng.split(":")]
    if len(parts) == 2:
        return name, int_range(*parts)
    if len(parts) == 3:
        return name, array_values(parts[0], int_range(parts[1], parts[2]))
    raise argparse.ArgumentTypeError(f"bad bound {text!r}")


def build_oracle_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hyperhorn oracle", description=argparse.SUPPRESS)
    ap.add_argument("--system", action="append", required=True, type=Path)
    ap.add_argument("--spec", required=True, type=Path)
    ap.add_argument("--bound", action="append", default=[], type=_bound, help="NAME=LO:HI or NAME=SIZE:LO:HI")
    return ap


def oracle_main(argv: Sequence[str]) -> int:
    args = build_oracle_parser().parse_args(argv)
    cfg = RunConfig(list(args.system), args.spec)
    systems, spec = load_inputs(cfg)
    try:
        res = solve_attractor(build_explicit_game(systems, spec, dict(args.bound)))
    except OracleError as exc:
        raise StageError("oracle", str(exc)) from exc
    winner = "verifier" if res.verifier_wins else "falsifier"
    print(f"winner: {winner}")
    print(f"trusted: {str(res.trusted).lower()}")
    print(f"falsifier states: {res.falsifier_states}, attractor: {res.attractor_size}, cut: {str(res.cut).lower()}")
    if not res.trusted:
        return 2
    return 0 if res.verifier_wins else 1


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "oracle":
            return oracle_main(argv[1:])
        args = build_parser().parse_args(argv)
        cfg = RunConfig(
            systems=list(args.system),
            spec=args.spec,
            mode=MODE_NAMES[args.mode],
            predicates=args.predicates,
            restrictions=args.restrictions,
            solver=SolverConfig(args.solver, tuple(args.solver_arg), args.timeout),
            out=args.out,
            emit_only=args.emit_only,
            check_determinism=args.check_determinism,
            allow_nondeterministic=args.allow_nondeterministic,
            certify_transformation=args.certify_transformation,
        )
        code, doc = run(cfg)
    except StageError as exc:
        print(f"hyperhorn: error {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (InputError, ValueError) as exc:
        print(f"hyperhorn: error [config] {exc}", file=sys.stderr)
        return EXIT_ERROR
    if doc.get("verdict") == "emitted":
        print(f"emitted {doc['horn']} ({doc['clauses']} clauses)")
    elif args.json:
        sys.stdout.write(report_json(doc))
    else:
        sys.stdout.write(report_text(doc))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
