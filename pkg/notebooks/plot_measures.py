"""
Measures, orderings and the Wasserstein distance
================================================

A discrete volume distribution and its decreasing rearrangement carry the
same information.  Distances between measures are distances between
orderings, which turns optimal transport in one dimension into a sup over
merged plateaus.
"""

from lswsim import (
    make_measure,
    measure_to_ordering,
    ordering_to_measure,
    quantize,
    sup_distance,
    wasserstein,
)

nu = make_measure([(0.0, 1 / 3), (1.0, 1 / 3), (3.0, 1 / 3)])
v = measure_to_ordering(nu)
print("values:", v.values, "breakpoints:", v.breakpoints)
print("back to atoms:", ordering_to_measure(v).atoms())

###############################################################################
# d_inf, d_1 and d_2 against a shifted copy.

mu = make_measure([(0.5, 1 / 3), (1.5, 1 / 3), (2.0, 1 / 3)])
for p in (1, 2, "inf"):
    print(f"W_{p} = {wasserstein(nu, mu, p):.6f}")

###############################################################################
# Quantizing a continuous profile: the error stays below eps.

profile = lambda phi: (1 - phi) ** 2
for eps in (0.2, 0.05, 0.01):
    q = quantize(profile, eps)
    fine = quantize(profile, 1e-6)
    print(f"eps={eps:<5} plateaus={q.n_components:3d} error~{sup_distance(q, fine):.4f}")
