from __future__ import annotations

import os
import random
import stat
import sys
from pathlib import Path

from cycproof.oracle import (
    BoundedOracle,
    BoundedValid,
    Invalid,
    SmtOracle,
    Unknown,
    Valid,
    emit_smtlib,
)
from cycproof.parser import parse_fml
from cycproof.terms import eval_bool


def test_case_split_lemma_is_bounded_valid(oracle):
    out = oracle.valid_sequent([parse_fml("v - m >= 0")], [parse_fml("v - m > 0 || v - m <= 0")])
    assert isinstance(out, BoundedValid)


def test_loop_exit_equality_is_bounded_valid(oracle):
    out = oracle.valid_sequent(
        [parse_fml("v - m >= 0"), parse_fml("v - m <= 0")],
        [parse_fml("((2 * v - m + 1) * m) / 2 == ((v + 1) * v) / 2")],
    )
    assert isinstance(out, BoundedValid)


def test_invalid_comes_with_witness(oracle):
    out = oracle.valid_sequent([], [parse_fml("0 > 0")])
    assert isinstance(out, Invalid)
    out2 = oracle.valid_sequent([], [parse_fml("x > 0")])
    assert isinstance(out2, Invalid)
    rho = out2.witness_map()
    assert not eval_bool(rho, parse_fml("x > 0")).value


def test_bounded_mode_never_claims_validity(oracle):
    out = oracle.valid_sequent([], [parse_fml("0 <= 0")])
    assert isinstance(out, BoundedValid) and not isinstance(out, Valid)


def test_bounded_agrees_with_truth_table():
    oracle = BoundedOracle(-3, 3)
    rng = random.Random(9)
    from conftest import random_fml

    for _ in range(60):
        gamma = [random_fml(rng, ["x", "y"], 1)]
        delta = [random_fml(rng, ["x", "y"], 1)]
        out = oracle.valid_sequent(gamma, delta)
        brute = True
        witness = None
        for x in range(-3, 4):
            for y in range(-3, 4):
                rho = {"x": x, "y": y}
                try:
                    if eval_bool(rho, gamma[0], (-3, 3)).value and not eval_bool(
                        rho, delta[0], (-3, 3)
                    ).value:
                        brute = False
                        witness = rho
                        break
                except ArithmeticError:
                    brute = None
                    break
            if brute is not True:
                break
        if brute is None:
            assert isinstance(out, Unknown)
        elif brute:
            assert isinstance(out, BoundedValid)
        else:
            assert isinstance(out, Invalid)
            assert out.witness_map() is not None


def test_grid_cap_returns_unknown():
    oracle = BoundedOracle(-50, 50, max_points=100)
    out = oracle.valid_sequent([], [parse_fml("x + y + z <= 200")])
    assert isinstance(out, Unknown)


# ---------------------------------------------------------------------------
# SMT-LIB emission and the external solver protocol
# ---------------------------------------------------------------------------

def test_emission_shape():
    text = emit_smtlib(
        [parse_fml("x / 2 >= 0")], [parse_fml("x >= 0")]
    )
    assert text.splitlines()[0] == "(set-logic QF_NIA)"
    assert "(declare-const x Int)" in text
    assert "tdiv" in text
    assert "(assert (not (= 2 0)))" in text  # divisor guard
    assert "(check-sat)" in text


def test_emission_rejects_quantifiers():
    oracle = SmtOracle([sys.executable, "-c", "pass"])
    out = oracle.valid_sequent([], [parse_fml("forall x . x <= x")])
    assert isinstance(out, Unknown)


def _fake_solver(tmp_path: Path, body: str) -> str:
    path = tmp_path / "solver.py"
    path.write_text(body)
    return f"{sys.executable} {path}"


def test_unsat_maps_to_valid(tmp_path):
    cmd = _fake_solver(tmp_path, "import sys; sys.stdin.read(); print('unsat')\n")
    out = SmtOracle(cmd).valid_sequent([], [parse_fml("0 <= 0")])
    assert isinstance(out, Valid)


def test_sat_maps_to_invalid_with_model(tmp_path):
    cmd = _fake_solver(
        tmp_path,
        "import sys; sys.stdin.read()\n"
        "print('sat')\n"
        "print('(model (define-fun x () Int (- 3)) (define-fun y () Int 7))')\n",
    )
    out = SmtOracle(cmd).valid_sequent([], [parse_fml("x > y")])
    assert isinstance(out, Invalid)
    assert out.witness_map() == {"x": -3, "y": 7}


def test_unknown_and_garbage_map_to_unknown(tmp_path):
    cmd = _fake_solver(tmp_path, "import sys; sys.stdin.read(); print('unknown')\n")
    assert isinstance(SmtOracle(cmd).valid_sequent([], [parse_fml("x <= x")]), Unknown)
    cmd2 = _fake_solver(tmp_path, "import sys; sys.stdin.read(); print('howdy')\n")
    assert isinstance(SmtOracle(cmd2).valid_sequent([], [parse_fml("x <= x")]), Unknown)


def test_missing_solver_is_unknown():
    out = SmtOracle(["/nonexistent/solver-binary"]).valid_sequent([], [parse_fml("x <= x")])
    assert isinstance(out, Unknown)


def test_fake_solver_checks_problem_is_wellformed(tmp_path):
    # the subprocess sees a parsable problem: it must contain one assert
    # and end with (get-model)
    cmd = _fake_solver(
        tmp_path,
        "import sys\n"
        "text = sys.stdin.read()\n"
        "ok = text.count('(check-sat)') == 1 and text.rstrip().endswith('(get-model)')\n"
        "print('unsat' if ok else 'error')\n",
    )
    out = SmtOracle(cmd).valid_sequent([parse_fml("x >= 1")], [parse_fml("x >= 0")])
    assert isinstance(out, Valid)
