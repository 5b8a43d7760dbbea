from __future__ import annotations

import json
import stat
import sys

import pytest
from conftest import requires_solver

from hyperhorn.cli import EXIT_ERROR, RunConfig, StageError, main, run
from hyperhorn.system import InputError


def _args(fixtures, tmp_path, *extra, system="squares_sum.sys", spec="squares_sum.spec"):
    return ["--system", str(fixtures / system), "--spec", str(fixtures / spec), "--out", str(tmp_path / "out"), *extra]


def test_emit_only_writes_artifacts(fixtures, tmp_path, capsys):
    code = main(_args(fixtures, tmp_path, "--emit-only"))
    assert code == 0
    out = tmp_path / "out"
    assert (out / "horn.smt2").read_text().startswith("(set-logic HORN)")
    assert (out / "scheme.txt").read_text().startswith("; mode: ksafety")
    assert not (out / "horn.transcript.txt").exists()
    assert "10 clauses" in capsys.readouterr().out


def test_emit_only_is_deterministic(fixtures, tmp_path):
    texts = []
    for n in range(2):
        main(_args(fixtures, tmp_path / str(n), "--emit-only"))
        texts.append((tmp_path / str(n) / "out" / "horn.smt2").read_bytes())
    assert texts[0] == texts[1]


def _fake_solver(tmp_path, answer: str):
    path = tmp_path / "fake-solver"
    path.write_text(f"#!{sys.executable}\nprint({answer!r})\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_emit_only_matches_solver_input(fixtures, tmp_path):
    main(_args(fixtures, tmp_path / "a", "--emit-only"))
    fake = _fake_solver(tmp_path, "unknown")
    code = main(_args(fixtures, tmp_path / "b", "--solver", fake))
    assert code == 2
    emitted = (tmp_path / "a" / "out" / "horn.smt2").read_bytes()
    sent = (tmp_path / "b" / "out" / "horn.smt2").read_bytes()
    assert emitted == sent
    transcript = (tmp_path / "b" / "out" / "horn.transcript.txt").read_text()
    assert str(tmp_path / "b" / "out" / "horn.smt2") in transcript


def test_exit_code_follows_verdict(fixtures, tmp_path, capsys):
    fake = _fake_solver(tmp_path, "unsat")
    assert main(_args(fixtures, tmp_path, "--solver", fake, "--json")) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "violated" and doc["solver_status"] == "unsat"
    assert (tmp_path / "out" / "report.txt").read_text().startswith("verdict: VIOLATED")


def test_unsat_under_abstraction_is_inconclusive(fixtures, tmp_path):
    fake = _fake_solver(tmp_path, "unsat")
    preds = str(fixtures / "squares_sum.preds")
    assert main(_args(fixtures, tmp_path, "--solver", fake, "--predicates", preds)) == 2
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert "abstraction incomplete" in doc["reason"]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["--spec", "x.spec"],
        ["--system", "a.sys", "--spec", "b.spec", "--mode", "bogus"],
        ["--system", "a.sys", "--spec", "b.spec", "--timeout", "soon"],
    ],
)
def test_usage_errors_exit_3(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_ERROR


def test_missing_file_is_stage_error(fixtures, tmp_path, capsys):
    code = main(["--system", str(tmp_path / "none.sys"), "--spec", str(fixtures / "squares_sum.spec")])
    assert code == EXIT_ERROR
    assert "[parse]" in capsys.readouterr().err


def test_parse_error_is_tagged(fixtures, tmp_path, capsys):
    bad = tmp_path / "bad.sys"
    bad.write_text("(system (vars (a Int)) (init (> a)) (tr true))")
    code = main(["--system", str(bad), "--spec", str(fixtures / "squares_sum.spec"), "--emit-only"])
    assert code == EXIT_ERROR
    assert "[parse]" in capsys.readouterr().err


def test_restrictions_requirements(fixtures, tmp_path):
    with pytest.raises(InputError):
        RunConfig([fixtures / "array_sum.sys"], fixtures / "array_sum.spec", mode="game_restricted")
    with pytest.raises(InputError):
        RunConfig([fixtures / "squares_sum.sys"], fixtures / "squares_sum.spec", restrictions=fixtures / "x")
    code = main(_args(fixtures, tmp_path, "--mode", "forall-exists-restricted", system="array_sum.sys", spec="array_sum.spec"))
    assert code == EXIT_ERROR


def test_mode_mismatch_is_scheme_error(fixtures, tmp_path):
    cfg = RunConfig(
        [fixtures / "squares_sum.sys"], fixtures / "squares_sum.spec", mode="game_finite", out=tmp_path, emit_only=True
    )
    with pytest.raises(StageError, match=r"\[scheme\]"):
        run(cfg)


def test_restricted_emit(fixtures, tmp_path, capsys):
    argv = _args(
        fixtures,
        tmp_path,
        "--mode",
        "forall-exists-restricted",
        "--restrictions",
        str(fixtures / "array_sum.restrictions"),
        "--emit-only",
        system="array_sum.sys",
        spec="array_sum.spec",
    )
    assert main(argv) == 0
    assert "46 clauses" in capsys.readouterr().out


def test_oracle_subcommand(fixtures, capsys):
    base = ["oracle", "--system", str(fixtures / "squares_sum.sys"), "--bound", "a=1:4", "--bound", "b=1:4", "--bound", "c=0:30"]
    assert main(base + ["--spec", str(fixtures / "squares_sum_flipped.spec")]) == 1
    assert "winner: falsifier" in capsys.readouterr().out
    assert main(base + ["--spec", str(fixtures / "squares_sum.spec")]) == 0
    assert "trusted: true" in capsys.readouterr().out


@requires_solver
def test_game_mode_refuses_nondeterminism(fixtures, tmp_path, capsys):
    argv = _args(
        fixtures,
        tmp_path,
        "--mode",
        "forall-exists-restricted",
        "--restrictions",
        str(fixtures / "array_sum.restrictions"),
        "--timeout",
        "30",
        system="array_sum_unlabeled.sys",
        spec="array_sum.spec",
    )
    assert main(argv) == EXIT_ERROR
    assert "nondeterministic" in capsys.readouterr().err


@requires_solver
def test_abstracted_squares_sum_verified(fixtures, tmp_path):
    preds = str(fixtures / "squares_sum.preds")
    assert main(_args(fixtures, tmp_path, "--predicates", preds, "--timeout", "60")) == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["verdict"] == "verified"
    assert all(o["status"] == "valid" for o in doc["obligations"])
