from __future__ import annotations

import random
from pathlib import Path

import pytest

from cycproof.oracle import BoundedOracle
from cycproof.parser import parse_config, parse_expr, parse_fml, parse_prog
from cycproof.terms import (
    AndF,
    BinOp,
    Config,
    Forall,
    Le,
    Lit,
    NotF,
    Var,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

WP_SRC = "while n > 0 do s := s + n ; n := n - 1 end"
PHI1_SRC = "s == ((v + 1) * v) / 2"
SIGMA1_SRC = "{n -> v, s -> 0}"
SIGMA3_SRC = "{n -> v - m, s -> ((2 * v - m + 1) * m) / 2}"
NU1_SRC = f". => v >= 0 -> {SIGMA1_SRC} : [{WP_SRC}] ({PHI1_SRC})"


@pytest.fixture
def oracle():
    return BoundedOracle(-50, 50)


@pytest.fixture
def wp():
    return parse_prog(WP_SRC)


@pytest.fixture
def sigma1():
    return parse_config(SIGMA1_SRC)


@pytest.fixture
def table4_text():
    return (FIXTURES / "table4.dlp").read_text()


# ---------------------------------------------------------------------------
# Random term generators (seeded; shared by round-trip and property tests)
# ---------------------------------------------------------------------------

def random_expr(rng: random.Random, names, depth: int = 3):
    if depth == 0 or rng.random() < 0.35:
        if rng.random() < 0.5:
            return Lit(rng.randint(-5, 5))
        return Var(rng.choice(names))
    op = rng.choice("+-*+-*/")  # division kept rare
    left = random_expr(rng, names, depth - 1)
    right = random_expr(rng, names, depth - 1)
    if op == "/":
        right = Lit(rng.choice([1, 2, 3, -2]))  # nonzero constant divisors
    return BinOp(op, left, right)


def random_fml(rng: random.Random, names, depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        return Le(random_expr(rng, names, 2), random_expr(rng, names, 2))
    kind = rng.randrange(3)
    if kind == 0:
        return NotF(random_fml(rng, names, depth - 1))
    if kind == 1:
        return AndF(random_fml(rng, names, depth - 1), random_fml(rng, names, depth - 1))
    return Forall(rng.choice(names), random_fml(rng, names, depth - 1))


def random_config(rng: random.Random, names):
    chosen = rng.sample(names, rng.randint(0, len(names)))
    return Config(tuple((x, random_expr(rng, names, 2)) for x in chosen))


# ---------------------------------------------------------------------------
# The loop-program termination script for the cyclic prover
# ---------------------------------------------------------------------------

def wp_cyclic_goal():
    from cycproof.whilelang import State

    wp = parse_prog(WP_SRC)
    return [parse_fml("v >= 0")], State(wp, parse_config(SIGMA1_SRC)), parse_expr("v"), []


def wp_cyclic_script():
    """Hand-built script mirroring the loop generalization of the replay."""
    from cycproof.whilelang import State

    wp = parse_prog(WP_SRC)
    sigma3 = parse_config(SIGMA3_SRC)
    prem2 = ((parse_fml("v - m >= 0"),), State(wp, sigma3), parse_expr("v - m"), ())
    prem17 = (
        (parse_fml("v - m >= -1"), parse_fml("v - m >= 0")),
        State(wp, sigma3),
        parse_expr("v - m"),
        (),
    )
    return [
        ("sub", 1, {"m": parse_expr("0")}, prem2),                # -> 2
        ("cut", 2, parse_fml("v - m > 0 || v - m <= 0")),         # -> 3, 4
        ("wk_r", 3, (), True),                                    # -> 5
        ("ter", 5),
        ("or_l", 4, 1),                                           # -> 6, 7
        ("step", 6),                                              # -> 8
        ("step", 8, parse_expr("(v - m) - 1")),                   # -> 9, progress
        ("cut", 9, parse_fml("v - (m + 1) >= -1")),               # -> 10, 11
        ("wk_r", 10, (), True),                                   # -> 12
        ("ter", 12),
        ("cut", 11, parse_fml("v - (m + 1) >= 0")),               # -> 13, 14
        ("wk_r", 13, (), True),                                   # -> 15
        ("ter", 15),
        ("wk_l", 14, (0, 1)),                                     # -> 16
        ("sub", 16, {"m": parse_expr("m + 1")}, prem17),          # -> 17
        ("wk_l", 17, (0,)),                                       # -> 18
        ("backlink", 18, 2),
        ("step", 7),                                              # -> 19
        ("eps", 19),
    ]
