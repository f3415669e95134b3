# Pre-averaging kernels and the constants that enter the noisy variance.
#
# Every kernel g on [0, 1] comes with psi1, psi2, psi3 and a family of
# Phi integrals.  For the default kernel min(x, 1 - x) several of them have
# closed forms, which makes a quick sanity check.

import numpy as np

from realskew.kernels import eval_kernel, kernel_by_name, kernel_constants, min_kernel

g = min_kernel()
c = kernel_constants(g)

print("min(x, 1-x)")
print(f"  psi1 = {c.psi1:.12f}   (exact 1)")
print(f"  psi2 = {c.psi2:.12f}   (exact 1/12 = {1 / 12:.12f})")
print(f"  psi3 = {c.psi3:.12f}   (exact 1/32 = {1 / 32:.12f})")
print(f"  phi22 = {c.phi22:.12e} (exact 151/80640 = {151 / 80640:.12e})")

# Left-limit part of the cubic block: the squared integral is the default,
# the unsquared one is kept for comparison only.
print(f"  phi3-  squared   {c.phi3_minus:.6e}")
print(f"  phi3-  unsquared {c.phi3_minus_unsquared:.6e}")

# The quadratic kernel 4x(1-x) is smooth inside and needs more panels
q = kernel_constants(kernel_by_name("quadratic"))
print("\n4x(1-x)")
for name in ("psi1", "psi2", "psi3", "phi11", "phi12", "phi22"):
    print(f"  {name:6s} {getattr(q, name):.10f}")

# Kernel weights g(p / k) used in the moving windows
k = 8
print("\nweights g(p/8):", np.round([eval_kernel(g, p / k) for p in range(1, k)], 4))
