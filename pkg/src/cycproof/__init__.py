"""Cyclic-proof verification kernel for labeled dynamic formulas.

The package verifies properties of the form "under this configuration,
after all (or some) runs of this program, that formula holds" by symbolic
execution inside a sequent calculus, closing loops with back-links and
accepting only proof graphs whose cycles carry progressing traces.
"""

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
    boxed,
    d_imp,
    d_or,
    diamond,
    formulas_equal,
    sequents_equal,
)
from .kernel import ProofGraph, RuleInstance, TracePair, new_proof
from .oracle import BoundedOracle, BoundedValid, Invalid, SmtOracle, Unknown, Valid
from .parser import (
    parse_config,
    parse_dlp,
    parse_expr,
    parse_fml,
    parse_prog,
    parse_sequent,
)
from .semantics import CounterExample, Path, Verdict, counter_example, models
from .terms import (
    Config,
    EPSILON,
    Evaluation,
    SKIP,
    apply_config,
    apply_stack_config,
    bound_vars,
    eval_bool,
    evaluate,
    free_vars,
    substitute,
)
from .whilelang import (
    CaseSplitNeeded,
    LoopAnnotations,
    State,
    derive_termination_cyclic,
    derive_termination_structural,
    derive_transitions,
    run,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
