"""Stable manifold of the coupled saddle u1' = -u1, u2' = u2 - u1^2.

The exact manifold is u2 = u1^2 / 3; the Picard solver recovers it from the
half-line fixed-point problem.
"""
import numpy as np

from relaxman import builtin_reduced, default_config, solve_fixed_point, spectral_factorize
from relaxman.manifold import fit_decay_rate, graph_map, verify_invariance

r = builtin_reduced("coupled-saddle")
sd = spectral_factorize(r)
cfg = default_config(r, sd, dt=1e-3, eps1=0.1, eps2=1.0)

print("  a        J_2          a^2/3       iterations")
for a in (0.01, 0.02, 0.04, 0.08):
    pt = solve_fixed_point(r, sd, [a, 0.0], cfg)
    print(f"{a:5.2f}  {pt.J[1]:.6e}  {a * a / 3:.6e}   {pt.iterations}")

pt = solve_fixed_point(r, sd, [0.05, 0.0], cfg)
print("decay rate on [2, 8]:", fit_decay_rate(pt.trajectory, (2.0, 8.0)).rate)
print("invariance defect after tau0=0.5:", verify_invariance(r, sd, pt, 0.5, cfg))

v0, graph = graph_map(r, sd, [0.04, 0.0], cfg)
print("graph over u1=0.04:", graph, " expected", [0.0, 0.04 ** 2 / 3])
