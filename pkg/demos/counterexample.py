# A functional whose realized sum does not converge.
#
# For g_a(x) = x^3 sin(a log|x|) the rescaled sum over a Brownian path has
# expectation c_n that alternates in sign along Delta_n = exp(-n pi / a).
# The sequence therefore has two accumulation points.

import numpy as np

from realskew import harness as hn
from realskew import limitlaw as ll

a = ll.find_nondegenerate_a()
A, B = ll.counterexample_coefficients(a)
print(f"a = {a}  A = {A:.6f}  B = {B:.6f}")

for row in ll.counterexample_sequence(a, 6):
    print(f"n={row.n}  Delta={row.delta_n:.3e}  c_n={row.c_n: .8f}")

# The same alternation shows up in simulation
for n in (1, 2):
    mean, se, delta = hn.counterexample_mc_mean(a, n, 1000, seed=n)
    print(f"MC n={n}: mean {mean: .4f} +- {2 * se:.4f}")
