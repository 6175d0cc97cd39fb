from __future__ import annotations

import random

import pytest

from conftest import NU1_SRC, PHI1_SRC, SIGMA1_SRC, WP_SRC
from cycproof.formulas import DLabeled, DNot, Sequent
from cycproof.parser import parse_dlp, parse_fml, parse_sequent
from cycproof.semantics import (
    BoundExceeded,
    NotApplicable,
    Verdict,
    counter_example,
    models,
)


def test_models_wp_specification():
    phi = parse_dlp(f"{SIGMA1_SRC} : [{WP_SRC}] ({PHI1_SRC})")
    assert models({"v": 3}, phi, 100) is Verdict.TRUE


def test_terminal_box_collapses_to_the_body():
    rng = random.Random(2)
    boxed = parse_dlp("{x -> w} : [ε] (x <= 3)")
    plain = parse_dlp("{x -> w} : x <= 3")
    for _ in range(30):
        rho = {"w": rng.randint(-5, 5)}
        assert models(rho, boxed, 10) is models(rho, plain, 10)


def test_divergent_diamond_is_unknown():
    phi = parse_dlp("{n -> 0} : <while 1 <= 1 do skip end> true")
    assert models({}, phi, 50) is Verdict.UNKNOWN


def test_divergent_box_is_unknown_not_vacuous():
    phi = parse_dlp("{n -> 0} : [while 1 <= 1 do skip end] false")
    assert models({}, phi, 50) is Verdict.UNKNOWN


def test_duality_on_samples():
    # <a>phi true iff [a]!phi false, whenever neither is unknown
    rng = random.Random(6)
    dia = parse_dlp("{x -> w} : <if x <= 0 then x := 1 else x := x - 1 end> (x <= 1)")
    box_neg = parse_dlp("{x -> w} : [if x <= 0 then x := 1 else x := x - 1 end] !(x <= 1)")
    for _ in range(60):
        rho = {"w": rng.randint(-8, 8)}
        a = models(rho, dia, 100)
        b = models(rho, box_neg, 100)
        if Verdict.UNKNOWN in (a, b):
            continue
        assert (a is Verdict.TRUE) == (b is Verdict.FALSE)


def test_label_distribution_laws():
    rng = random.Random(7)
    conj = parse_dlp("{x -> w} : ([x := x + 1] x > 0 && [x := x * 2] x >= 0)")
    split = parse_dlp("{x -> w} : [x := x + 1] x > 0 && {x -> w} : [x := x * 2] x >= 0")
    neg = parse_dlp("{x -> w} : !([x := x + 1] x > 0)")
    neg_out = DNot(parse_dlp("{x -> w} : [x := x + 1] x > 0"))
    for _ in range(60):
        rho = {"w": rng.randint(-8, 8)}
        assert models(rho, conj, 50) is models(rho, split, 50)
        assert models(rho, neg, 50) is models(rho, neg_out, 50)


def _falsified(v: int):
    tau = parse_dlp(f"{SIGMA1_SRC} : [{WP_SRC}] (s == ((v + 1) * v) / 2 + 1)")
    nu = parse_sequent(f"v >= 0 => {SIGMA1_SRC} : [{WP_SRC}] (s == ((v + 1) * v) / 2 + 1)")
    return tau, nu, {"v": v}


def test_counter_example_of_falsified_postcondition():
    tau, nu, rho = _falsified(3)
    ct = counter_example(rho, tau, nu, 100)
    assert len(ct.paths) == 1
    (path,) = ct.paths
    assert len(path) == 8  # one transition in, one out, two per iteration
    assert path.is_terminal() and path.is_minimum()


def test_counter_example_empty_when_valid():
    tau = parse_dlp(f"{SIGMA1_SRC} : [{WP_SRC}] ({PHI1_SRC})")
    nu = Sequent((), (tau,))
    ct = counter_example({"v": 4}, tau, nu, 100)
    assert ct.is_empty()


def test_counter_example_not_applicable():
    tau, nu, _ = _falsified(3)
    out = counter_example({"v": -2}, tau, nu, 100)
    assert isinstance(out, NotApplicable)


def test_counter_example_bound_exceeded():
    tau = parse_dlp("{n -> 0} : <while 1 <= 1 do skip end> true")
    nu = Sequent((), (tau,))
    with pytest.raises(BoundExceeded):
        counter_example({}, tau, nu, 20)


def test_counter_example_empty_iff_models_true():
    rng = random.Random(8)
    tau_template = "{{x -> w}} : [while x > 0 do x := x - 2 end] (x == {target})"
    for _ in range(40):
        target = rng.choice([0, -1, 1])
        tau = parse_dlp(tau_template.format(target=target))
        nu = Sequent((), (tau,))
        rho = {"w": rng.randint(-6, 6)}
        ct = counter_example(rho, tau, nu, 200)
        assert ct.is_empty() == (models(rho, tau, 200) is Verdict.TRUE)


def test_acceptance_style_agreement():
    phi = parse_dlp(NU1_SRC.split("=>", 1)[1])
    for v in range(0, 9):
        assert models({"v": v}, phi, 10_000) is Verdict.TRUE
