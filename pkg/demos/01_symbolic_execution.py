"""Walk a loop program step by step, concretely and under a context.

The same summation loop is first run from a closed store, then stepped
symbolically: with the counter unknown, the loop guard cannot be decided
and the transition derivation asks for a case split instead of guessing.
"""

from cycproof.oracle import BoundedOracle
from cycproof.parser import parse_config, parse_fml, parse_prog
from cycproof.whilelang import CaseSplitNeeded, State, derive_transitions, run

LOOP = parse_prog("while n > 0 do s := s + n ; n := n - 1 end")

print("== concrete run from {n -> 3, s -> 0} ==")
states, done = run(State(LOOP, parse_config("{n -> 3, s -> 0}")))
for i, s in enumerate(states):
    print(f"  {i}: {s}")
print(f"  terminal reached: {done}")

print("\n== symbolic step under v - m > 0 ==")
oracle = BoundedOracle(-50, 50)
gamma = [parse_fml("v - m >= 0"), parse_fml("v - m > 0")]
sigma = parse_config("{n -> v - m, s -> ((2 * v - m + 1) * m) / 2}")
(t,) = derive_transitions(gamma, State(LOOP, sigma), [], oracle)
print(f"  {t.describe()}")

print("\n== symbolic step with an undecidable guard ==")
try:
    derive_transitions([], State(LOOP, parse_config("{n -> v, s -> 0}")), [], oracle)
except CaseSplitNeeded as exc:
    print(f"  case split requested on: {exc}")
