"""Sequent-calculus engine: rule catalog, proof graphs, and trace pairs.

Proofs grow backward: applying a rule to an open goal creates its premises
as children.  Every rule instance records, per premise, a partial map from
conclusion right-side occurrences to premise right-side occurrences; those
maps are what the cyclic checker later stitches into derivation traces.
Context occurrences map by identity and never progress.  A box step always
marks its target pair as progress; a diamond step progresses only when a
termination judgment for the successor state is attached.

Derived rules (imp_r, or_l, le, the cut variant that splits a conjunction
on the left premise) expand into primitive applications internally and
record one visible edge whose trace pairs are the composition, so replayed
derivations keep the node numbering of the source material.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import parser, sep as sepmod
from .formulas import (
    BAnd,
    BBase,
    BBox,
    BDia,
    BNot,
    DAnd,
    DBase,
    DLabeled,
    DNot,
    DlpFormula,
    Sequent,
    base_formulas,
    formula_key,
    formulas_equal,
    sequent_diff,
    sequents_equal,
    substitute,
)
from .oracle import check_obligation, is_accepting
from .terms import (
    AndF,
    BaseFormula,
    Config,
    Epsilon,
    NotF,
    apply_config,
    apply_stack_config,
)
from .whilelang import (
    LoopAnnotations,
    ObligationFailed,
    State,
    TerminationJudgment,
    derive_termination_structural,
    derive_transitions,
)


class KernelError(Exception):
    pass


class SideConditionFailed(KernelError):
    pass


class OccurrenceAmbiguous(KernelError):
    pass


class NotAncestor(KernelError):
    pass


class SequentMismatch(KernelError):
    pass


PRIMITIVE_RULES = frozenset(
    {
        "box", "diamond", "ter", "int", "box_eps", "sub", "sigma_not",
        "sigma_and", "ax", "cut", "wk_l", "wk_r", "con_l", "con_r",
        "not_l", "not_r", "and_l", "and_r",
    }
)
DERIVED_RULES = frozenset({"imp_r", "or_l", "le"})
DOMAIN_RULES = frozenset({"sigma_star", "sigma_frm"})
CATALOG = PRIMITIVE_RULES | DERIVED_RULES | DOMAIN_RULES


@dataclass(frozen=True)
class TracePair:
    src: int
    dst: int
    target: bool = False
    progress: bool = False


@dataclass
class RuleInstance:
    rule: str
    conclusion: Sequent
    premises: tuple
    args: dict
    trace_pairs: tuple  # one tuple of TracePair per premise
    obligations: list = field(default_factory=list)
    expansion: tuple = ()
    consumed: tuple = ()  # right occurrences intentionally without pairs
    termination: TerminationJudgment | None = None


@dataclass
class Node:
    id: int
    sequent: Sequent
    parent: int | None
    rule_instance: RuleInstance | None = None
    children: tuple = ()
    backlink: int | None = None


# --- pattern helpers over both representations of ¬ and ∧ -------------------

def split_not(f: DlpFormula):
    if isinstance(f, DNot):
        return f.arg
    if isinstance(f, DBase) and isinstance(f.fml, NotF):
        return DBase(f.fml.body)
    return None


def split_and(f: DlpFormula):
    if isinstance(f, DAnd):
        return f.left, f.right
    if isinstance(f, DBase) and isinstance(f.fml, AndF):
        return DBase(f.fml.left), DBase(f.fml.right)
    return None


def split_or(f: DlpFormula):
    inner = split_not(f)
    if inner is None:
        return None
    pair = split_and(inner)
    if pair is None:
        return None
    a = split_not(pair[0])
    b = split_not(pair[1])
    if a is None or b is None:
        return None
    return a, b


def split_imp(f: DlpFormula):
    inner = split_not(f)
    if inner is None:
        return None
    pair = split_and(inner)
    if pair is None:
        return None
    b = split_not(pair[1])
    if b is None:
        return None
    return pair[0], b


def conjuncts(f: DlpFormula) -> list:
    pair = split_and(f)
    if pair is None:
        return [f]
    return conjuncts(pair[0]) + conjuncts(pair[1])


def _interpret(label, fml):
    if isinstance(label, Config):
        if label.stack:
            return apply_stack_config(label, fml)
        return apply_config(label, fml)
    if isinstance(label, sepmod.SepState):
        if isinstance(fml, sepmod.SepFormula):
            value = sepmod.sep_app(label, fml)
        else:
            value = sepmod.sep_app(label, sepmod.SBase(fml))
        from .terms import FALSE, TRUE

        return TRUE if value else FALSE
    raise SideConditionFailed(f"no interpretation for label {label!r}")


def _identity_pairs(indices) -> tuple:
    return tuple(TracePair(i, j) for i, j in indices)


def _same_positions(n: int) -> tuple:
    return _identity_pairs((i, i) for i in range(n))


class ProofGraph:
    """Finite proof tree with back-links; single writer."""

    def __init__(self, goal: Sequent, oracle=None, extra_rules=None,
                 path_bound: int = 10_000):
        self.nodes: dict = {1: Node(1, goal, None)}
        self.root = 1
        self._next = 2
        self.backlinks: dict = {}
        self.oracle = oracle
        self.path_bound = path_bound
        # shared by reference: rules registered after construction (script
        # `lift` commands) become available to this graph
        self.extra_rules = extra_rules if extra_rules is not None else {}

    # -- access ---------------------------------------------------------------

    def node(self, node_id: int) -> Node:
        if node_id not in self.nodes:
            raise KernelError(f"no node {node_id}")
        return self.nodes[node_id]

    def open_goals(self) -> list:
        return sorted(
            n.id
            for n in self.nodes.values()
            if n.rule_instance is None and n.backlink is None
        )

    def is_open(self, node_id: int) -> bool:
        n = self.node(node_id)
        return n.rule_instance is None and n.backlink is None

    def ancestors(self, node_id: int):
        walk = self.node(node_id).parent
        while walk is not None:
            yield walk
            walk = self.node(walk).parent

    def obligations(self) -> list:
        out = []
        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            if node.rule_instance is not None:
                out.extend(node.rule_instance.obligations)
        return out

    # -- mutation -------------------------------------------------------------

    def _attach(self, node_id: int, instance: RuleInstance) -> list:
        node = self.node(node_id)
        for ob in instance.obligations:
            if ob.node is None:
                ob.node = node_id
        child_ids = []
        for premise in instance.premises:
            child = Node(self._next, premise, node_id)
            self.nodes[child.id] = child
            child_ids.append(child.id)
            self._next += 1
        node.children = tuple(child_ids)
        node.rule_instance = instance
        self._validate_instance(node)
        return child_ids

    def _require_open(self, node_id: int) -> Node:
        if not self.is_open(node_id):
            raise KernelError(f"node {node_id} is not an open goal")
        return self.node(node_id)

    def _occurrence(self, side: tuple, occ, predicate, what: str) -> int:
        if occ is not None:
            if not (0 <= occ < len(side)):
                raise SideConditionFailed(f"occurrence {occ} out of range for {what}")
            if not predicate(side[occ]):
                raise SideConditionFailed(
                    f"occurrence {occ} does not match {what}: {parser.dlp_src(side[occ])}"
                )
            return occ
        hits = [i for i, f in enumerate(side) if predicate(f)]
        if not hits:
            raise SideConditionFailed(f"no occurrence matches {what}")
        if len(hits) > 1:
            raise OccurrenceAmbiguous(
                f"{what} matches occurrences {hits}; pass an explicit index"
            )
        return hits[0]

    # -- rule dispatch ----------------------------------------------------------

    def apply_rule(self, node_id: int, rule: str, **args) -> list:
        # the catalog is closed: only listed rules and registered lifts apply
        if rule in CATALOG:
            return getattr(self, f"_rule_{rule}")(node_id, **args)
        handler = self.extra_rules.get(rule)
        if handler is None:
            raise KernelError(f"unknown rule {rule!r}")
        return handler(self, node_id, **args)

    # -- primitive rules --------------------------------------------------------

    def _rule_box(self, node_id: int, occ: int | None = None,
                  annotations: LoopAnnotations | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent

        def is_box(f):
            return isinstance(f, DLabeled) and isinstance(f.body, BBox)

        occ = self._occurrence(nu.right, occ, is_box, "a boxed formula")
        target: DLabeled = nu.right[occ]
        if isinstance(target.body.prog, Epsilon):
            raise SideConditionFailed("the box rule requires a non-terminal program")
        gamma = base_formulas(nu.left)
        delta = base_formulas(nu.right[:occ] + nu.right[occ + 1:])
        transitions = derive_transitions(
            gamma, State(target.body.prog, target.label), delta, self.oracle
        )
        premises = []
        pairs = []
        obligations = []
        for t in transitions:
            succ = DLabeled(t.target.config, BBox(t.target.program, target.body.body))
            premises.append(
                Sequent(nu.left, nu.right[:occ] + (succ,) + nu.right[occ + 1:])
            )
            pairs.append(
                _same_positions(len(nu.right))[:occ]
                + (TracePair(occ, occ, target=True, progress=True),)
                + _identity_pairs((i, i) for i in range(occ + 1, len(nu.right)))
            )
            obligations.extend(t.obligations)
        instance = RuleInstance(
            "box",
            nu,
            tuple(premises),
            {"occ": occ, "transitions": [t.describe() for t in transitions]},
            tuple(pairs),
            obligations,
            consumed=(occ,) if not transitions else (),
        )
        return self._attach(node_id, instance)

    def _rule_diamond(
        self,
        node_id: int,
        occ: int | None = None,
        choice: int = 0,
        progress: bool = False,
        annotations: LoopAnnotations | None = None,
    ) -> list:
        node = self._require_open(node_id)
        nu = node.sequent

        def is_dia(f):
            return isinstance(f, DLabeled) and isinstance(f.body, BDia)

        occ = self._occurrence(nu.right, occ, is_dia, "a diamond formula")
        target: DLabeled = nu.right[occ]
        if isinstance(target.body.prog, Epsilon):
            raise SideConditionFailed("the diamond rule requires a non-terminal program")
        gamma = base_formulas(nu.left)
        delta = base_formulas(nu.right[:occ] + nu.right[occ + 1:])
        transitions = derive_transitions(
            gamma, State(target.body.prog, target.label), delta, self.oracle
        )
        if not transitions:
            raise SideConditionFailed("no transition available for the diamond step")
        if not (0 <= choice < len(transitions)):
            raise SideConditionFailed(f"transition choice {choice} out of range")
        t = transitions[choice]
        termination = None
        if progress:
            termination = derive_termination_structural(
                gamma, t.target, delta, self.oracle, annotations=annotations,
                path_bound=self.path_bound,
            )
        succ = DLabeled(t.target.config, BDia(t.target.program, target.body.body))
        premise = Sequent(nu.left, nu.right[:occ] + (succ,) + nu.right[occ + 1:])
        pairs = (
            _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
            + (TracePair(occ, occ, target=True, progress=termination is not None),)
        )
        obligations = list(t.obligations)
        if termination is not None:
            obligations.extend(termination.obligations)
        instance = RuleInstance(
            "diamond",
            nu,
            (premise,),
            {"occ": occ, "choice": choice, "progress": termination is not None},
            (pairs,),
            obligations,
            termination=termination,
        )
        return self._attach(node_id, instance)

    def _rule_ter(self, node_id: int) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        if not nu.is_base_only():
            raise SideConditionFailed("ter needs every formula to be non-dynamic")
        ob = check_obligation(
            self.oracle, base_formulas(nu.left), base_formulas(nu.right), node=node_id
        )
        if not is_accepting(ob.verdict):
            raise ObligationFailed(f"ter obligation failed: {ob.describe()}", ob)
        instance = RuleInstance(
            "ter", nu, (), {}, (), [ob], consumed=tuple(range(len(nu.right)))
        )
        return self._attach(node_id, instance)

    def _rule_ax(self, node_id: int, left_occ: int | None = None,
                 right_occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        if left_occ is None or right_occ is None:
            found = None
            for i, f in enumerate(nu.left):
                for j, g in enumerate(nu.right):
                    if formulas_equal(f, g):
                        found = (i, j)
                        break
                if found:
                    break
            if not found:
                raise SideConditionFailed("no matching formula pair for ax")
            left_occ, right_occ = found
        if not formulas_equal(nu.left[left_occ], nu.right[right_occ]):
            raise SideConditionFailed("ax formulas differ")
        instance = RuleInstance(
            "ax",
            nu,
            (),
            {"left": left_occ, "right": right_occ},
            (),
            consumed=tuple(range(len(nu.right))),
        )
        return self._attach(node_id, instance)

    def _labeled_rewrite(self, node_id: int, rule: str, occ, side: str,
                         matcher, builder) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        formulas = nu.right if side == "right" else nu.left
        occ = self._occurrence(formulas, occ, matcher, rule)
        replacement = builder(formulas[occ])
        new_side = formulas[:occ] + (replacement,) + formulas[occ + 1:]
        if side == "right":
            premise = Sequent(nu.left, new_side)
            pairs = (
                _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
                + (TracePair(occ, occ, target=True),)
            )
        else:
            premise = Sequent(new_side, nu.right)
            pairs = _same_positions(len(nu.right))
        instance = RuleInstance(
            rule, nu, (premise,), {"occ": occ, "side": side}, (pairs,)
        )
        return self._attach(node_id, instance)

    def _rule_int(self, node_id: int, occ: int | None = None, side: str = "right") -> list:
        def matcher(f):
            return isinstance(f, DLabeled) and isinstance(f.body, BBase)

        def builder(f):
            return DBase(_interpret(f.label, f.body.fml))

        return self._labeled_rewrite(node_id, "int", occ, side, matcher, builder)

    def _rule_box_eps(self, node_id: int, occ: int | None = None, side: str = "right") -> list:
        # covers the diamond form as well: the only path from the terminal
        # program is the empty one, so both modalities collapse to the body
        def matcher(f):
            return (
                isinstance(f, DLabeled)
                and isinstance(f.body, (BBox, BDia))
                and isinstance(f.body.prog, Epsilon)
            )

        def builder(f):
            return DLabeled(f.label, f.body.body)

        return self._labeled_rewrite(node_id, "box_eps", occ, side, matcher, builder)

    def _rule_sigma_not(self, node_id: int, occ: int | None = None, side: str = "right") -> list:
        def matcher(f):
            return isinstance(f, DLabeled) and isinstance(f.body, BNot)

        def builder(f):
            return DNot(DLabeled(f.label, f.body.body))

        return self._labeled_rewrite(node_id, "sigma_not", occ, side, matcher, builder)

    def _rule_sigma_and(self, node_id: int, occ: int | None = None, side: str = "right") -> list:
        def matcher(f):
            return isinstance(f, DLabeled) and isinstance(f.body, BAnd)

        def builder(f):
            return DAnd(
                DLabeled(f.label, f.body.left), DLabeled(f.label, f.body.right)
            )

        return self._labeled_rewrite(node_id, "sigma_and", occ, side, matcher, builder)

    def _rule_sub(self, node_id: int, bindings: dict, premise: Sequent) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        if len(premise.left) != len(nu.left) or len(premise.right) != len(nu.right):
            raise SideConditionFailed("sub premise and conclusion differ in shape")
        for side in ("left", "right"):
            for i, (p, c) in enumerate(zip(getattr(premise, side), getattr(nu, side))):
                image = substitute(p, bindings)
                if not formulas_equal(image, c):
                    raise SideConditionFailed(
                        f"sub: substituted premise differs at {side}[{i}]: "
                        f"{parser.dlp_src(image)} vs {parser.dlp_src(c)}"
                    )
        pairs = tuple(
            TracePair(i, i, target=True) for i in range(len(nu.right))
        )
        binding_src = {x: parser.expr_src(e) for x, e in sorted(bindings.items())}
        instance = RuleInstance(
            "sub", nu, (premise,), {"bindings": binding_src}, (pairs,)
        )
        return self._attach(node_id, instance)

    def _rule_cut(self, node_id: int, fml: DlpFormula, split: bool = False) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        right_premise = Sequent(nu.left, nu.right + (fml,))
        parts = tuple(conjuncts(fml)) if split else (fml,)
        left_premise = Sequent(nu.left + parts, nu.right)
        pairs_right = _same_positions(len(nu.right))
        pairs_left = _same_positions(len(nu.right))
        expansion = ("cut", "and_l") if split and len(parts) > 1 else ("cut",)
        instance = RuleInstance(
            "cut",
            nu,
            (right_premise, left_premise),
            {"fml": parser.dlp_src(fml), "split": split},
            (pairs_right, pairs_left),
            expansion=expansion,
        )
        return self._attach(node_id, instance)

    def _rule_wk_l(self, node_id: int, occs) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occs = sorted(set(occs))
        for i in occs:
            if not (0 <= i < len(nu.left)):
                raise SideConditionFailed(f"wk_l occurrence {i} out of range")
        keep = tuple(f for i, f in enumerate(nu.left) if i not in set(occs))
        premise = Sequent(keep, nu.right)
        instance = RuleInstance(
            "wk_l", nu, (premise,), {"occs": occs}, (_same_positions(len(nu.right)),)
        )
        return self._attach(node_id, instance)

    def _rule_wk_r(self, node_id: int, occs) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occs = sorted(set(occs))
        for i in occs:
            if not (0 <= i < len(nu.right)):
                raise SideConditionFailed(f"wk_r occurrence {i} out of range")
        keep = []
        pairs = []
        for i, f in enumerate(nu.right):
            if i not in set(occs):
                pairs.append(TracePair(i, len(keep)))
                keep.append(f)
        premise = Sequent(nu.left, tuple(keep))
        instance = RuleInstance(
            "wk_r", nu, (premise,), {"occs": occs}, (tuple(pairs),),
            consumed=tuple(occs),
        )
        return self._attach(node_id, instance)

    def _rule_con_l(self, node_id: int, occ: int) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        if not (0 <= occ < len(nu.left)):
            raise SideConditionFailed(f"con_l occurrence {occ} out of range")
        premise = Sequent(nu.left + (nu.left[occ],), nu.right)
        instance = RuleInstance(
            "con_l", nu, (premise,), {"occ": occ}, (_same_positions(len(nu.right)),)
        )
        return self._attach(node_id, instance)

    def _rule_con_r(self, node_id: int, occ: int) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        if not (0 <= occ < len(nu.right)):
            raise SideConditionFailed(f"con_r occurrence {occ} out of range")
        premise = Sequent(nu.left, nu.right + (nu.right[occ],))
        pairs = _same_positions(len(nu.right)) + (TracePair(occ, len(nu.right)),)
        instance = RuleInstance("con_r", nu, (premise,), {"occ": occ}, (pairs,))
        return self._attach(node_id, instance)

    def _rule_not_l(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.left, occ, lambda f: split_not(f) is not None,
                               "a negation on the left")
        inner = split_not(nu.left[occ])
        premise = Sequent(
            nu.left[:occ] + nu.left[occ + 1:], nu.right + (inner,)
        )
        instance = RuleInstance(
            "not_l", nu, (premise,), {"occ": occ}, (_same_positions(len(nu.right)),)
        )
        return self._attach(node_id, instance)

    def _rule_not_r(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.right, occ, lambda f: split_not(f) is not None,
                               "a negation on the right")
        inner = split_not(nu.right[occ])
        premise = Sequent(
            nu.left + (inner,), nu.right[:occ] + nu.right[occ + 1:]
        )
        pairs = []
        for i in range(len(nu.right)):
            if i == occ:
                continue
            pairs.append(TracePair(i, i if i < occ else i - 1))
        instance = RuleInstance(
            "not_r", nu, (premise,), {"occ": occ}, (tuple(pairs),), consumed=(occ,)
        )
        return self._attach(node_id, instance)

    def _rule_and_l(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.left, occ, lambda f: split_and(f) is not None,
                               "a conjunction on the left")
        a, b = split_and(nu.left[occ])
        premise = Sequent(nu.left[:occ] + (a, b) + nu.left[occ + 1:], nu.right)
        instance = RuleInstance(
            "and_l", nu, (premise,), {"occ": occ}, (_same_positions(len(nu.right)),)
        )
        return self._attach(node_id, instance)

    def _rule_and_r(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.right, occ, lambda f: split_and(f) is not None,
                               "a conjunction on the right")
        a, b = split_and(nu.right[occ])
        premises = []
        pairs = []
        for part in (a, b):
            premises.append(
                Sequent(nu.left, nu.right[:occ] + (part,) + nu.right[occ + 1:])
            )
            pairs.append(
                _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
                + (TracePair(occ, occ, target=True),)
            )
        instance = RuleInstance(
            "and_r", nu, tuple(premises), {"occ": occ}, tuple(pairs)
        )
        return self._attach(node_id, instance)

    # -- derived rules -----------------------------------------------------------

    def _rule_imp_r(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.right, occ, lambda f: split_imp(f) is not None,
                               "an implication on the right")
        a, b = split_imp(nu.right[occ])
        premise = Sequent(
            nu.left + (a,), nu.right[:occ] + (b,) + nu.right[occ + 1:]
        )
        pairs = _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
        instance = RuleInstance(
            "imp_r", nu, (premise,), {"occ": occ}, (pairs,),
            expansion=("not_r", "and_l", "not_l"), consumed=(occ,),
        )
        return self._attach(node_id, instance)

    def _rule_or_l(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.left, occ, lambda f: split_or(f) is not None,
                               "a disjunction on the left")
        a, b = split_or(nu.left[occ])
        premises = []
        for part in (a, b):
            premises.append(
                Sequent(nu.left[:occ] + (part,) + nu.left[occ + 1:], nu.right)
            )
        pairs = (_same_positions(len(nu.right)), _same_positions(len(nu.right)))
        instance = RuleInstance(
            "or_l", nu, tuple(premises), {"occ": occ}, pairs,
            expansion=("not_l", "and_r", "not_r"),
        )
        return self._attach(node_id, instance)

    def _rule_le(self, node_id: int, target: BaseFormula, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent
        occ = self._occurrence(nu.left, occ, lambda f: isinstance(f, DBase),
                               "a base formula on the left")
        phi = nu.left[occ]
        ob = check_obligation(self.oracle, [phi.fml], [target], node=node_id)
        if not is_accepting(ob.verdict):
            raise ObligationFailed(f"le obligation failed: {ob.describe()}", ob)
        premise = Sequent(
            nu.left[:occ] + (DBase(target),) + nu.left[occ + 1:], nu.right
        )
        instance = RuleInstance(
            "le", nu, (premise,), {"occ": occ, "target": parser.fml_src(target)},
            (_same_positions(len(nu.right)),), [ob],
            expansion=("cut", "wk_l", "ter"),
        )
        return self._attach(node_id, instance)

    # -- separation-logic rules ----------------------------------------------------

    def _rule_sigma_star(self, node_id: int, h1: dict | None = None,
                         h2: dict | None = None, h1_addrs=None, h2_addrs=None,
                         occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent

        def matcher(f):
            return (
                isinstance(f, DLabeled)
                and isinstance(f.label, sepmod.SepState)
                and isinstance(f.body, BBase)
                and isinstance(f.body.fml, sepmod.Star)
            )

        occ = self._occurrence(nu.right, occ, matcher, "a separating conjunction")
        f: DLabeled = nu.right[occ]
        state: sepmod.SepState = f.label
        star: sepmod.Star = f.body.fml
        if h1 is None or h2 is None:
            heap = state.heap_map()
            try:
                h1 = {a: heap[a] for a in (h1_addrs or [])}
                h2 = {a: heap[a] for a in (h2_addrs or [])}
            except KeyError as exc:
                raise SideConditionFailed(f"address {exc} is not in the heap")
        merged = dict(h1)
        merged.update(h2)
        if merged != state.heap_map() or len(merged) != len(h1) + len(h2):
            raise SideConditionFailed("h1 and h2 must split the heap exactly")
        ok = sepmod.disjoint(h1, h2)
        from .terms import FALSE, TRUE

        disjoint_fml = DBase(TRUE if ok else FALSE)
        premises = (
            Sequent(nu.left, nu.right[:occ] + (disjoint_fml,) + nu.right[occ + 1:]),
            Sequent(
                nu.left,
                nu.right[:occ]
                + (DLabeled(state.with_heap(h1), BBase(star.left)),)
                + nu.right[occ + 1:],
            ),
            Sequent(
                nu.left,
                nu.right[:occ]
                + (DLabeled(state.with_heap(h2), BBase(star.right)),)
                + nu.right[occ + 1:],
            ),
        )
        pairs = tuple(
            _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
            + (TracePair(occ, occ, target=True),)
            for _ in premises
        )
        instance = RuleInstance(
            "sigma_star", nu, premises,
            {"occ": occ, "h1": sorted(h1), "h2": sorted(h2), "disjoint": ok},
            pairs,
        )
        return self._attach(node_id, instance)

    def _rule_sigma_frm(self, node_id: int, occ: int | None = None) -> list:
        node = self._require_open(node_id)
        nu = node.sequent

        def matcher(f):
            return (
                isinstance(f, DLabeled)
                and isinstance(f.label, sepmod.SepState)
                and isinstance(f.body, BBase)
                and isinstance(f.body.fml, sepmod.Star)
            )

        occ = self._occurrence(nu.right, occ, matcher, "a separating conjunction")
        f: DLabeled = nu.right[occ]
        state: sepmod.SepState = f.label
        star: sepmod.Star = f.body.fml
        store = state.store_map()
        heap_dom = set(state.heap_map())
        offenders = sorted(
            x for x in sepmod.sep_formula_vars(star.right)
            if store.get(x) in heap_dom
        )
        if offenders:
            raise SideConditionFailed(
                f"frame side condition: {offenders} address mapped heap cells"
            )
        premise = Sequent(
            nu.left,
            nu.right[:occ] + (DLabeled(state, BBase(star.left)),) + nu.right[occ + 1:],
        )
        pairs = (
            _identity_pairs((i, i) for i in range(len(nu.right)) if i != occ)
            + (TracePair(occ, occ, target=True),),
        )
        instance = RuleInstance("sigma_frm", nu, (premise,), {"occ": occ}, pairs)
        return self._attach(node_id, instance)

    # -- backlinks --------------------------------------------------------------

    def link_bud(self, bud_id: int, companion_id: int) -> None:
        bud = self._require_open(bud_id)
        companion = self.node(companion_id)
        if companion_id not in set(self.ancestors(bud_id)):
            raise NotAncestor(f"node {companion_id} is not a proper ancestor of {bud_id}")
        if not sequents_equal(bud.sequent, companion.sequent):
            diff = sequent_diff(bud.sequent, companion.sequent)
            side, fml = diff if diff else ("?", None)
            detail = parser.dlp_src(fml) if fml is not None else "?"
            raise SequentMismatch(
                f"bud {bud_id} differs from companion {companion_id} "
                f"on the {side} side at {detail}"
            )
        bud.backlink = companion_id
        self.backlinks[bud_id] = companion_id

    def backlink_pairs(self, bud_id: int) -> tuple:
        """Identity map on right occurrences across a backlink, by key."""
        bud = self.node(bud_id)
        companion = self.node(self.backlinks[bud_id])
        used = set()
        pairs = []
        comp_keys = [formula_key(f) for f in companion.sequent.right]
        for i, f in enumerate(bud.sequent.right):
            k = formula_key(f)
            for j, ck in enumerate(comp_keys):
                if j not in used and ck == k:
                    pairs.append(TracePair(i, j))
                    used.add(j)
                    break
        return tuple(pairs)

    # -- validation ----------------------------------------------------------------

    def _validate_instance(self, node: Node) -> None:
        inst = node.rule_instance
        n_right = len(node.sequent.right)
        if len(inst.trace_pairs) != len(inst.premises):
            raise KernelError("trace pairs and premises out of step")
        for premise, pairs in zip(inst.premises, inst.trace_pairs):
            covered = set()
            for pair in pairs:
                if not (0 <= pair.src < n_right and 0 <= pair.dst < len(premise.right)):
                    raise KernelError(f"trace pair out of range in rule {inst.rule}")
                covered.add(pair.src)
            missing = set(range(n_right)) - covered - set(inst.consumed)
            if missing and inst.premises:
                raise KernelError(
                    f"rule {inst.rule}: right occurrences {sorted(missing)} have no trace pair"
                )

    def validate(self) -> None:
        for node in self.nodes.values():
            if node.parent is not None:
                parent = self.node(node.parent)
                if node.id not in parent.children:
                    raise KernelError(f"node {node.id} detached from parent")
            if node.backlink is not None:
                if node.backlink not in set(self.ancestors(node.id)):
                    raise KernelError(f"backlink {node.id} -> {node.backlink} not to an ancestor")
                if not sequents_equal(
                    node.sequent, self.node(node.backlink).sequent
                ):
                    raise KernelError(f"backlink {node.id} sequent mismatch")
            if node.rule_instance is not None:
                self._validate_instance(node)

    # -- dump -----------------------------------------------------------------------

    def dump(self) -> str:
        """Stable s-expression rendering used for golden tests."""
        chunks = ["(proof"]
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            seq = parser.sequent_src(node.sequent)
            if node.rule_instance is not None:
                args = node.rule_instance.args
                arg_txt = " ".join(
                    f"{k} {args[k]}" for k in sorted(args) if k != "transitions"
                )
                rule = f"(rule {node.rule_instance.rule}" + (f" {arg_txt})" if arg_txt else ")")
            elif node.backlink is not None:
                rule = "(rule backlink)"
            else:
                rule = "(open)"
            children = " ".join(str(c) for c in node.children)
            chunks.append(f'  (node {node_id} "{seq}" {rule} (children {children}))')
        links = " ".join(f"({b} {c})" for b, c in sorted(self.backlinks.items()))
        chunks.append(f"  (backlinks {links})")
        chunks.append(")")
        return "\n".join(chunks)


def new_proof(goal: Sequent, oracle=None, extra_rules=None) -> ProofGraph:
    return ProofGraph(goal, oracle=oracle, extra_rules=extra_rules)
