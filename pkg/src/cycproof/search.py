"""Bounded backward proof search that emits a replayable script.

The strategy is deliberately plain: saturate each open goal with closure
attempts (ter, ax, backlinks against ancestors) and deterministic
normalizations (label elimination, propositional decomposition, terminal
boxes), then spend depth on symbolic execution steps.  An undecidable guard
reported by the transition derivation is handled by cutting on it.  The
search never invents generalizations, so goals that need one exhaust their
depth instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lifting, parser
from .formulas import BAnd, BBase, BBox, BDia, BNot, DBase, DLabeled, Sequent
from .kernel import (
    KernelError,
    ProofGraph,
    split_and,
    split_imp,
    split_not,
    split_or,
)
from .oracle import BoundedValid
from .terms import Epsilon
from .whilelang import CaseSplitNeeded, ObligationFailed


class DepthExhausted(Exception):
    def __init__(self, node_id: int):
        super().__init__(f"depth exhausted at node {node_id}")
        self.node_id = node_id


@dataclass
class SearchResult:
    graph: ProofGraph
    script: str
    verdict: str
    message: str = ""

    @property
    def proved(self) -> bool:
        return self.verdict in ("Proved", "ProvedBounded")


# rewrites applied without consuming depth, in fixed priority order
_NORMALIZERS = (
    ("box_eps", "right"),
    ("box_eps", "left"),
    ("int", "right"),
    ("int", "left"),
    ("sigma_not", "right"),
    ("sigma_not", "left"),
    ("sigma_and", "right"),
    ("sigma_and", "left"),
)


def _matches(rule: str, f) -> bool:
    if rule == "box_eps":
        return (
            isinstance(f, DLabeled)
            and isinstance(f.body, BBox)
            and isinstance(f.body.prog, Epsilon)
        )
    if rule == "int":
        return isinstance(f, DLabeled) and isinstance(f.body, BBase)
    if rule == "sigma_not":
        return isinstance(f, DLabeled) and isinstance(f.body, BNot)
    if rule == "sigma_and":
        return isinstance(f, DLabeled) and isinstance(f.body, BAnd)
    raise KernelError(rule)


def search(goal: Sequent, oracle, depth: int, path_bound: int = 10_000) -> SearchResult:
    """Prove ``goal`` within ``depth`` symbolic steps per branch."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    graph = ProofGraph(goal, oracle=oracle, extra_rules=lifting.default_registry(),
                       path_bound=path_bound)
    lines = [f"goal {parser.sequent_src(goal)}"]
    budget = {graph.root: depth}

    while True:
        goals = graph.open_goals()
        if not goals:
            break
        node_id = goals[0]
        try:
            _close_or_step(graph, node_id, budget, lines)
        except DepthExhausted as exc:
            return SearchResult(
                graph, "\n".join(lines), "Stuck", f"DepthExhausted at node {exc.node_id}"
            )

    lines.append("qed")
    from . import cyclic

    certificate = cyclic.check_cyclic(graph)
    if not certificate.accepted:
        return SearchResult(graph, "\n".join(lines), "Rejected", certificate.report())
    bounded = any(isinstance(ob.verdict, BoundedValid) for ob in graph.obligations())
    return SearchResult(graph, "\n".join(lines), "ProvedBounded" if bounded else "Proved")


def _inherit(budget, node_id, children, cost=0):
    for child in children:
        budget[child] = budget[node_id] - cost


def _close_or_step(graph: ProofGraph, node_id: int, budget: dict, lines: list) -> None:
    nu = graph.node(node_id).sequent

    # 1. closure: ter on base-only sequents
    if nu.is_base_only():
        try:
            graph.apply_rule(node_id, "ter")
            lines.append(f"apply ter at {node_id}")
            return
        except ObligationFailed:
            pass

    # 2. closure: axiom
    for i, f in enumerate(nu.left):
        for j, g in enumerate(nu.right):
            from .formulas import formulas_equal

            if formulas_equal(f, g):
                graph.apply_rule(node_id, "ax", left_occ=i, right_occ=j)
                lines.append(f"apply ax at {node_id} with left {i} right {j}")
                return

    # 3. closure: backlink to an identical ancestor
    from .formulas import sequents_equal

    for ancestor in graph.ancestors(node_id):
        if sequents_equal(nu, graph.node(ancestor).sequent):
            graph.link_bud(node_id, ancestor)
            lines.append(f"backlink at {node_id} to {ancestor}")
            return

    # 4. label and propositional normalization (free)
    for rule, side in _NORMALIZERS:
        formulas = nu.right if side == "right" else nu.left
        for occ, f in enumerate(formulas):
            if _matches(rule, f):
                children = graph.apply_rule(node_id, rule, occ=occ, side=side)
                lines.append(f"apply {rule} at {node_id} with occ {occ} side {side}")
                _inherit(budget, node_id, children)
                return
    for occ, f in enumerate(nu.right):
        if split_imp(f) is not None:
            children = graph.apply_rule(node_id, "imp_r", occ=occ)
            lines.append(f"apply imp_r at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return
        if split_and(f) is not None and not isinstance(f, DLabeled):
            children = graph.apply_rule(node_id, "and_r", occ=occ)
            lines.append(f"apply and_r at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return
        if split_not(f) is not None and not isinstance(f, DLabeled):
            children = graph.apply_rule(node_id, "not_r", occ=occ)
            lines.append(f"apply not_r at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return
    for occ, f in enumerate(nu.left):
        if isinstance(f, DLabeled):
            continue
        if split_or(f) is not None:
            children = graph.apply_rule(node_id, "or_l", occ=occ)
            lines.append(f"apply or_l at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return
        if split_and(f) is not None:
            children = graph.apply_rule(node_id, "and_l", occ=occ)
            lines.append(f"apply and_l at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return
        if split_not(f) is not None:
            children = graph.apply_rule(node_id, "not_l", occ=occ)
            lines.append(f"apply not_l at {node_id} with occ {occ}")
            _inherit(budget, node_id, children)
            return

    # 5. symbolic execution (consumes depth)
    if budget.get(node_id, 0) <= 0:
        raise DepthExhausted(node_id)
    for occ, f in enumerate(nu.right):
        if isinstance(f, DLabeled) and isinstance(f.body, (BBox, BDia)):
            if isinstance(f.body.prog, Epsilon):
                continue
            rule = "box" if isinstance(f.body, BBox) else "diamond"
            try:
                children = graph.apply_rule(node_id, rule, occ=occ)
                lines.append(f"apply {rule} at {node_id} with occ {occ}")
                _inherit(budget, node_id, children, cost=1)
                return
            except CaseSplitNeeded as exc:
                children = graph.apply_rule(node_id, "cut", fml=DBase(exc.guard), split=False)
                lines.append(f"cut at {node_id} {parser.fml_src(exc.guard)}")
                _inherit(budget, node_id, children, cost=1)
                return
    raise DepthExhausted(node_id)
