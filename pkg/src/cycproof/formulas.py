"""Labeled dynamic formulas and two-sided multiset sequents.

A labeled formula pairs a configuration with an unlabeled body; bodies may
nest modalities but never another label, so the two-layer grammar is
enforced by construction.  The diamond modality is kept as distinct syntax
so rules can match on it; its semantics is the dual of the box.

Sequent sides are stored as ordered tuples so rule applications can address
occurrences by index, but identity (backlinks, rule side conditions) is
multiset identity over canonical keys.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import canon, terms
from .terms import BaseFormula, Config, Program, TermError


class DlpFormula:
    __slots__ = ()


class Body:
    __slots__ = ()


@dataclass(frozen=True)
class BBase(Body):
    fml: BaseFormula


@dataclass(frozen=True)
class BNot(Body):
    body: Body


@dataclass(frozen=True)
class BAnd(Body):
    left: Body
    right: Body


@dataclass(frozen=True)
class BBox(Body):
    prog: Program
    body: Body


@dataclass(frozen=True)
class BDia(Body):
    prog: Program
    body: Body


@dataclass(frozen=True)
class DBase(DlpFormula):
    fml: BaseFormula


@dataclass(frozen=True)
class DLabeled(DlpFormula):
    label: object  # Config, or another domain's configuration (e.g. SepState)
    body: Body


@dataclass(frozen=True)
class DNot(DlpFormula):
    arg: DlpFormula


@dataclass(frozen=True)
class DAnd(DlpFormula):
    left: DlpFormula
    right: DlpFormula


def d_or(a: DlpFormula, b: DlpFormula) -> DlpFormula:
    return DNot(DAnd(DNot(a), DNot(b)))


def d_imp(a: DlpFormula, b: DlpFormula) -> DlpFormula:
    return DNot(DAnd(a, DNot(b)))


def boxed(sigma: Config, prog: Program, fml: BaseFormula) -> DlpFormula:
    return DLabeled(sigma, BBox(prog, BBase(fml)))


def diamond(sigma: Config, prog: Program, fml: BaseFormula) -> DlpFormula:
    return DLabeled(sigma, BDia(prog, BBase(fml)))


@dataclass(frozen=True)
class Sequent:
    left: tuple = ()
    right: tuple = ()

    def __post_init__(self) -> None:
        for f in self.left + self.right:
            if not isinstance(f, DlpFormula):
                raise TermError(f"sequent member is not a formula: {f!r}")

    def is_base_only(self) -> bool:
        return all(isinstance(f, DBase) for f in self.left + self.right)


# ---------------------------------------------------------------------------
# Canonical keys
# ---------------------------------------------------------------------------

def body_key(b: Body) -> tuple:
    # Negation/conjunction keys over purely base operands normalize to the
    # base-formula connective, so the two representations get one identity.
    if isinstance(b, BBase):
        return ("base", canon.formula_key(b.fml))
    if isinstance(b, BNot):
        k = body_key(b.body)
        if k[0] == "base":
            return ("base", ("not", k[1]))
        return ("not", k)
    if isinstance(b, BAnd):
        k1 = body_key(b.left)
        k2 = body_key(b.right)
        if k1[0] == "base" and k2[0] == "base":
            return ("base", ("and", k1[1], k2[1]))
        return ("and", k1, k2)
    if isinstance(b, BBox):
        return ("box", canon.program_key(b.prog), body_key(b.body))
    if isinstance(b, BDia):
        return ("dia", canon.program_key(b.prog), body_key(b.body))
    raise TermError(f"body_key: not a body: {b!r}")


def _label_key(label) -> tuple:
    if isinstance(label, Config):
        return canon.config_key(label)
    key = getattr(label, "canon_key", None)
    if key is not None:
        return key()
    raise TermError(f"unsupported label: {label!r}")


def formula_key(f: DlpFormula) -> tuple:
    if isinstance(f, DBase):
        return ("base", canon.formula_key(f.fml))
    if isinstance(f, DLabeled):
        return ("labeled", _label_key(f.label), body_key(f.body))
    if isinstance(f, DNot):
        k = formula_key(f.arg)
        if k[0] == "base":
            return ("base", ("not", k[1]))
        return ("not", k)
    if isinstance(f, DAnd):
        k1 = formula_key(f.left)
        k2 = formula_key(f.right)
        if k1[0] == "base" and k2[0] == "base":
            return ("base", ("and", k1[1], k2[1]))
        return ("and", k1, k2)
    raise TermError(f"formula_key: not a formula: {f!r}")


def sequent_key(nu: Sequent) -> tuple:
    left = tuple(sorted((formula_key(f) for f in nu.left), key=repr))
    right = tuple(sorted((formula_key(f) for f in nu.right), key=repr))
    return (left, right)


def formulas_equal(a: DlpFormula, b: DlpFormula) -> bool:
    return formula_key(a) == formula_key(b)


def sequents_equal(a: Sequent, b: Sequent) -> bool:
    """Multiset identity, insensitive to order and bound-variable names."""
    return sequent_key(a) == sequent_key(b)


def sequent_diff(a: Sequent, b: Sequent):
    """First formula (with side) present in one sequent but not the other."""
    for side in ("left", "right"):
        xs = list(getattr(a, side))
        ys = list(getattr(b, side))
        ykeys = [formula_key(y) for y in ys]
        for x in xs:
            k = formula_key(x)
            if k in ykeys:
                ykeys.remove(k)
            else:
                return side, x
        if ykeys:
            for y in ys:
                if formula_key(y) in ykeys:
                    return side, y
    return None


# ---------------------------------------------------------------------------
# Free variables and substitution
# ---------------------------------------------------------------------------

def body_free_vars(b: Body) -> frozenset:
    if isinstance(b, BBase):
        if not isinstance(b.fml, terms.BaseFormula):
            from .sep import sep_formula_vars

            return sep_formula_vars(b.fml)
        return terms.free_vars(b.fml)
    if isinstance(b, BNot):
        return body_free_vars(b.body)
    if isinstance(b, BAnd):
        return body_free_vars(b.left) | body_free_vars(b.right)
    if isinstance(b, (BBox, BDia)):
        return terms.free_vars(b.prog) | body_free_vars(b.body)
    raise TermError(f"body_free_vars: not a body: {b!r}")


def free_vars(f) -> frozenset:
    """Free variables of a labeled formula, plain formula, or term.

    A configuration's mappings bind the variables of the labeled body but
    the mapped expressions themselves are always free.
    """
    if isinstance(f, DBase):
        return terms.free_vars(f.fml)
    if isinstance(f, DLabeled):
        if not isinstance(f.label, Config):
            # concrete foreign labels (store-heap states) are closed and
            # bind exactly their store variables
            bound = frozenset(x for x, _ in getattr(f.label, "store", ()))
            return body_free_vars(f.body) - bound
        label_fv = terms.free_vars(f.label)
        bound = terms.bound_vars(f.label)
        return label_fv | (body_free_vars(f.body) - bound)
    if isinstance(f, DNot):
        return free_vars(f.arg)
    if isinstance(f, DAnd):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Sequent):
        out: frozenset = frozenset()
        for g in f.left + f.right:
            out |= free_vars(g)
        return out
    return terms.free_vars(f)


def sequent_free_vars(nu: Sequent) -> frozenset:
    return free_vars(nu)


def substitute_body(b: Body, bindings, scope) -> Body:
    if isinstance(b, BBase):
        return BBase(terms.substitute(b.fml, bindings, scope))
    if isinstance(b, BNot):
        return BNot(substitute_body(b.body, bindings, scope))
    if isinstance(b, BAnd):
        return BAnd(
            substitute_body(b.left, bindings, scope),
            substitute_body(b.right, bindings, scope),
        )
    if isinstance(b, (BBox, BDia)):
        cls = BBox if isinstance(b, BBox) else BDia
        return cls(
            terms.substitute(b.prog, bindings, scope),
            substitute_body(b.body, bindings, scope),
        )
    raise TermError(f"substitute_body: not a body: {b!r}")


def substitute(f, bindings, scope=None):
    """Substitution extended to labeled formulas and sequents.

    Under a label the scope shrinks by the configuration's bound variables;
    a replacement whose free variables include one of those would be
    captured, which raises ``CaptureError`` (the binder is not renamable).
    """
    if scope is None:
        scope = frozenset(bindings)
    scope = frozenset(scope)
    if isinstance(f, DBase):
        return DBase(terms.substitute(f.fml, bindings, scope))
    if isinstance(f, DLabeled):
        if not isinstance(f.label, Config):
            raise TermError("substitution over non-store labels is not defined")
        inner = scope - terms.bound_vars(f.label)
        for x in inner & frozenset(bindings) & body_free_vars(f.body):
            clash = terms.free_vars(bindings[x]) & terms.bound_vars(f.label)
            if clash:
                raise terms.CaptureError(
                    f"substituting {x} would capture {sorted(clash)} under a label"
                )
        return DLabeled(
            terms.substitute(f.label, bindings, scope),
            substitute_body(f.body, bindings, inner),
        )
    if isinstance(f, DNot):
        return DNot(substitute(f.arg, bindings, scope))
    if isinstance(f, DAnd):
        return DAnd(
            substitute(f.left, bindings, scope),
            substitute(f.right, bindings, scope),
        )
    if isinstance(f, Sequent):
        return Sequent(
            tuple(substitute(g, bindings, scope) for g in f.left),
            tuple(substitute(g, bindings, scope) for g in f.right),
        )
    return terms.substitute(f, bindings, scope)


def base_formulas(side: tuple) -> list:
    """The plain arithmetic members of a sequent side, unwrapped."""
    return [f.fml for f in side if isinstance(f, DBase)]
