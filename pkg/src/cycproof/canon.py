"""Canonical forms for deciding term identity modulo arithmetic.

Sequent identity (rule side conditions, backlink matching) must recognize
that ``v - 0`` and ``v`` denote the same integer everywhere, and likewise
``((2*v - m + 1) * m) / 2 + (v - m)`` and ``((2*v - (m + 1) + 1) * (m + 1)) / 2``.
Expressions are normalized to polynomials with rational coefficients over
"atoms" (variables plus opaque division nodes).

Division is simplified only when it is provably exact: ``P / c`` for a
nonzero integer constant ``c`` becomes a polynomial exactly when ``c``
divides ``P`` at every integer point, which is decided by testing ``P`` on
the finite grid ``{0..deg_i}`` per variable (the binomial-basis coefficients
of ``P`` are integer combinations of those grid values and vice versa).  In
the exact case truncated division agrees with rational division, so the
rewrite is sound for the truncating evaluator.  Every other division stays
an opaque atom keyed by the canonical forms of its operands.

Known limit: two occurrences of the same opaque division atom cancel, so
``x/y <= x/y`` and ``0 <= 0`` get one key even though the former faults at
``y = 0``.  All equalities used by the kernel compare total values only.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

from .terms import (
    AndF,
    Assign,
    BaseFormula,
    BinOp,
    Config,
    Epsilon,
    Expr,
    Forall,
    If,
    Le,
    Lit,
    NotF,
    Program,
    Seq,
    Skip,
    TermError,
    Var,
    While,
    substitute,
    truncated_div,
)

# A polynomial is a dict: monomial -> Fraction, where a monomial is a sorted
# tuple of (atom, exponent) pairs and an atom is a nested hashable key.

_GRID_LIMIT = 4096

ZERO: dict = {}


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    powers: dict = {}
    for atom, k in m1 + m2:
        powers[atom] = powers.get(atom, 0) + k
    return tuple(sorted(((a, k) for a, k in powers.items() if k), key=repr))


def _add(p1: dict, p2: dict) -> dict:
    out = dict(p1)
    for mono, c in p2.items():
        c2 = out.get(mono, Fraction(0)) + c
        if c2:
            out[mono] = c2
        else:
            out.pop(mono, None)
    return out


def _neg(p: dict) -> dict:
    return {m: -c for m, c in p.items()}


def _mul(p1: dict, p2: dict) -> dict:
    out: dict = {}
    for m1, c1 in p1.items():
        for m2, c2 in p2.items():
            mono = _mono_mul(m1, m2)
            c = out.get(mono, Fraction(0)) + c1 * c2
            if c:
                out[mono] = c
            else:
                out.pop(mono, None)
    return out


def _constant_of(p: dict) -> Fraction | None:
    if not p:
        return Fraction(0)
    if len(p) == 1 and () in p:
        return p[()]
    return None


def poly_key(p: dict) -> tuple:
    items = [(m, (c.numerator, c.denominator)) for m, c in p.items()]
    return tuple(sorted(items, key=repr))


def _atoms_of(p: dict) -> list:
    atoms = set()
    for mono in p:
        for atom, _ in mono:
            atoms.add(atom)
    return sorted(atoms, key=repr)


def _eval_poly(p: dict, assignment: dict) -> Fraction:
    total = Fraction(0)
    for mono, c in p.items():
        term = c
        for atom, k in mono:
            term *= Fraction(assignment[atom]) ** k
        total += term
    return total


def _try_exact_div(p: dict, c: int) -> dict | None:
    """``p / c`` as a polynomial if ``c`` divides ``p`` at every integer point."""
    atoms = _atoms_of(p)
    degrees = []
    for atom in atoms:
        deg = max((k for mono in p for a, k in mono if a == atom), default=0)
        degrees.append(deg)
    size = 1
    for d in degrees:
        size *= d + 1
        if size > _GRID_LIMIT:
            return None
    for point in product(*(range(d + 1) for d in degrees)):
        val = _eval_poly(p, dict(zip(atoms, point)))
        if val.denominator != 1 or val.numerator % c != 0:
            return None
    return {m: coeff / c for m, coeff in p.items()}


def canon_expr(e: Expr) -> dict:
    if isinstance(e, Lit):
        return {(): Fraction(e.value)} if e.value else {}
    if isinstance(e, Var):
        return {((("v", e.name), 1),): Fraction(1)}
    if isinstance(e, BinOp):
        left = canon_expr(e.left)
        right = canon_expr(e.right)
        if e.op == "+":
            return _add(left, right)
        if e.op == "-":
            return _add(left, _neg(right))
        if e.op == "*":
            return _mul(left, right)
        cl = _constant_of(left)
        cr = _constant_of(right)
        if cr is not None and cr != 0 and cr.denominator == 1:
            if cl is not None and cl.denominator == 1:
                return canon_expr(Lit(truncated_div(cl.numerator, cr.numerator)))
            exact = _try_exact_div(left, cr.numerator)
            if exact is not None:
                return exact
        atom = ("div", poly_key(left), poly_key(right))
        return {((atom, 1),): Fraction(1)}
    raise TermError(f"canon_expr: not an expression: {e!r}")


def expr_key(e: Expr) -> tuple:
    return poly_key(canon_expr(e))


def formula_key(phi: BaseFormula, depth: int = 0) -> tuple:
    if isinstance(phi, Le):
        diff = _add(canon_expr(phi.right), _neg(canon_expr(phi.left)))
        return ("le", poly_key(diff))
    if isinstance(phi, NotF):
        return ("not", formula_key(phi.body, depth))
    if isinstance(phi, AndF):
        return ("and", formula_key(phi.left, depth), formula_key(phi.right, depth))
    if isinstance(phi, Forall):
        marker = f"__bound{depth}"
        body = substitute(phi.body, {phi.var: Var(marker)}, frozenset((phi.var,)))
        return ("forall", formula_key(body, depth + 1))
    raise TermError(f"formula_key: not a base formula: {phi!r}")


def program_key(p: Program) -> tuple:
    if isinstance(p, Assign):
        return ("assign", p.target, expr_key(p.expr))
    if isinstance(p, Seq):
        return ("seq", program_key(p.first), program_key(p.second))
    if isinstance(p, If):
        return ("if", formula_key(p.guard), program_key(p.then), program_key(p.orelse))
    if isinstance(p, While):
        return ("while", formula_key(p.guard), program_key(p.body))
    if isinstance(p, Skip):
        return ("skip",)
    if isinstance(p, Epsilon):
        return ("epsilon",)
    key = getattr(p, "canon_key", None)
    if key is not None:
        return key()
    raise TermError(f"program_key: not a program: {p!r}")


def config_key(sigma: Config) -> tuple:
    entries = tuple((x, expr_key(e)) for x, e in sigma.entries)
    if sigma.stack:
        return ("stack", entries)
    return ("store", tuple(sorted(entries, key=repr)))


def term_key(t) -> tuple:
    if isinstance(t, Expr):
        return ("expr", expr_key(t))
    if isinstance(t, BaseFormula):
        return ("fml", formula_key(t))
    if isinstance(t, Program):
        return ("prog", program_key(t))
    if isinstance(t, Config):
        return ("conf", config_key(t))
    raise TermError(f"term_key: not a term: {t!r}")


def terms_equal(a, b) -> bool:
    """Identity modulo arithmetic normalization and bound-variable names."""
    return term_key(a) == term_key(b)
