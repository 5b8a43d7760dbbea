"""Verdicts, witness reconstruction and independent witness validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from hyperhorn.backend import SolverConfig, ValidityResult, check_many
from hyperhorn.formula import Term, has_quantifier, print_formula
from hyperhorn.horn import Definition, HornSystem, instantiate, solution_chc_to_fol
from hyperhorn.scheme import GAME_FINITE, GAME_RESTRICTED, INV, KSAFETY, SchemeSystem, arbiter_name, obligations

VERIFIED = "verified"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

EXIT_CODES = {VERIFIED: 0, VIOLATED: 1, INCONCLUSIVE: 2}


@dataclass
class Witness:
    invariant: Definition
    arbiter: dict[str, Definition]
    mode: str
    notes: list[str] = field(default_factory=list)

    def as_solution(self) -> dict[str, Definition]:
        sol = {INV: self.invariant}
        sol.update({arbiter_name(t): d for t, d in self.arbiter.items()})
        return sol


@dataclass
class Verdict:
    kind: str
    reason: str = ""
    witness: Witness | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]


def reconstruct_witness(d_solution: Mapping[str, Definition], scheme: SchemeSystem) -> Witness:
    fol = solution_chc_to_fol(d_solution, scheme)
    notes = []
    inv = fol[INV]
    if scheme.w_vocab and has_quantifier(inv.body):
        notes.append(
            "the invariant quantifies universally over the universal-trace labels "
            f"({', '.join(map(str, scheme.w_vocab))}); it is reported without quantifier elimination"
        )
    arbiter = {t: fol[arbiter_name(t)] for t in scheme.tags}
    return Witness(inv, arbiter, scheme.mode, notes)


@dataclass
class ObligationResult:
    name: str
    status: str  # valid | invalid | unknown
    formula: str
    counter_model: Mapping[str, object] = field(default_factory=dict)
    reason: str = ""


@dataclass
class ValidationReport:
    results: list[ObligationResult]

    @property
    def ok(self) -> bool:
        return all(r.status == "valid" for r in self.results)

    def failures(self) -> list[ObligationResult]:
        return [r for r in self.results if r.status != "valid"]


def _report(names: Sequence[str], formulas: Sequence[Term], results: Sequence[ValidityResult]) -> ValidationReport:
    return ValidationReport(
        [
            ObligationResult(n, r.status, print_formula(f), r.counter_model, r.reason)
            for n, f, r in zip(names, formulas, results)
        ]
    )


def validate_witness(witness: Witness, scheme: SchemeSystem, config: SolverConfig) -> ValidationReport:
    """Check every scheme obligation with Inv and A_u replaced by the witness formulas."""
    sol = witness.as_solution()
    obls = obligations(scheme)
    formulas = [instantiate(o.formula, sol) for o in obls]
    return _report([o.name for o in obls], formulas, check_many(formulas, config, "witness"))


def validate_solution(sol: Mapping[str, Definition], horn: HornSystem, config: SolverConfig) -> ValidationReport:
    """Check every Horn clause with the unknowns replaced by ``sol``."""
    formulas = [instantiate(c.open_formula(), sol) for c in horn.clauses]
    names = [c.provenance for c in horn.clauses]
    return _report(names, formulas, check_many(formulas, config, "clause"))


def decide_verdict(status: str, mode: str, abstracted: bool) -> Verdict:
    """Map a solver status to a verdict; unsat is conclusive only where the encoding is complete."""
    if status == "sat":
        return Verdict(VERIFIED)
    if status == "unsat":
        if abstracted:
            return Verdict(INCONCLUSIVE, "abstraction incomplete: unsat under predicate abstraction")
        if mode in (KSAFETY, GAME_FINITE):
            return Verdict(VIOLATED, "the initial states are doomed for every choice")
        if mode == GAME_RESTRICTED:
            return Verdict(INCONCLUSIVE, "restriction incomplete: the restricted game encoding is sound only")
        return Verdict(INCONCLUSIVE, f"unknown mode {mode}")
    if status == "timeout":
        return Verdict(INCONCLUSIVE, "solver timeout")
    return Verdict(INCONCLUSIVE, "solver returned unknown")


# ----------------------------------------------------------------------- report


def report_dict(
    verdict: Verdict,
    *,
    mode: str,
    abstracted: bool,
    solver_status: str,
    timings: Mapping[str, float],
    validation: ValidationReport | None = None,
    extra: Mapping[str, object] | None = None,
) -> dict:
    doc: dict = {
        "verdict": verdict.kind,
        "reason": verdict.reason,
        "mode": mode,
        "abstracted": abstracted,
        "solver_status": solver_status,
        "timings": dict(timings),
    }
    if verdict.witness is not None:
        w = verdict.witness
        doc["witness"] = {
            "invariant": print_formula(w.invariant.body),
            "invariant_params": [v.spelled() for v in w.invariant.params],
            "arbiter": {t: print_formula(d.body) for t, d in w.arbiter.items()},
            "notes": list(w.notes),
        }
    if validation is not None:
        doc["obligations"] = [
            {
                "name": r.name,
                "status": r.status,
                **({"formula": r.formula} if r.status != "valid" else {}),
                **({"counter_model": {k: str(v) for k, v in r.counter_model.items()}} if r.counter_model else {}),
                **({"reason": r.reason} if r.reason else {}),
            }
            for r in validation.results
        ]
    if verdict.kind == VIOLATED:
        doc["counterexample"] = "not reconstructed; see the solver transcript"
    if extra:
        doc.update(extra)
    return doc


def report_text(doc: Mapping) -> str:
    lines = [f"verdict: {doc['verdict'].upper()}"]
    if doc.get("reason"):
        lines.append(f"reason: {doc['reason']}")
    lines.append(f"mode: {doc['mode']}{' (abstracted)' if doc.get('abstracted') else ''}")
    lines.append(f"solver: {doc['solver_status']}")
    for k, v in doc.get("timings", {}).items():
        lines.append(f"time[{k}]: {v:.3f}s")
    w = doc.get("witness")
    if w:
        lines.append(f"invariant({', '.join(w['invariant_params'])}):")
        lines.append(f"  {w['invariant']}")
        lines.append("arbiter:")
        for t, f in w["arbiter"].items():
            lines.append(f"  A_{t}: {f}")
        for n in w["notes"]:
            lines.append(f"note: {n}")
    obl = doc.get("obligations")
    if obl:
        bad = [o for o in obl if o["status"] != "valid"]
        lines.append(f"obligations: {len(obl) - len(bad)}/{len(obl)} valid")
        for o in bad:
            lines.append(f"  {o['name']}: {o['status']}")
            if "formula" in o:
                lines.append(f"    {o['formula']}")
    if doc.get("counterexample"):
        lines.append(f"counterexample: {doc['counterexample']}")
    return "\n".join(lines) + "\n"


def report_json(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
