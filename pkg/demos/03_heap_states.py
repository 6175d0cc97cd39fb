"""Store-heap configurations: allocation, aliasing, and the separating star.

After the five statements below, x and y alias one cell, so the separating
conjunction fails where the plain conjunction still holds.
"""

from cycproof.parser import parse_prog
from cycproof.sep import Allocator, PointsTo, SAnd, SepState, Star, sep_app, sep_run
from cycproof.terms import Lit, Var

statements = [
    "x := cons(1)",
    "y := cons(1)",
    "[y] := 37",
    "y := [x + 1]",
    "dispose(x + 1)",
]

states = sep_run(
    SepState.make({"x": 3, "y": 4}),
    [parse_prog(s) for s in statements],
    Allocator(base=37),
)
for label, state in zip(["start"] + statements, states):
    print(f"  {label:<16} {state}")

phi = Star(PointsTo(Var("x"), Lit(1)), PointsTo(Var("y"), Lit(1)))
psi = SAnd(PointsTo(Var("x"), Lit(1)), PointsTo(Var("y"), Lit(1)))
print(f"\n  after two allocations:  x|->1 * y|->1 is {sep_app(states[2], phi)}")
print(f"  after the dispose:      x|->1 * y|->1 is {sep_app(states[5], phi)}")
print(f"  but the plain conjunction x|->1 && y|->1 is {sep_app(states[5], psi)}")
