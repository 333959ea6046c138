"""Weighted invertibility of the full linearization around the toy model's equilibrium."""
import numpy as np

from relaxman import builtin_model, scan_invertibility
from relaxman.linearization import empirical_eta1, eta_star, kernel_vs_vperp

m = builtin_model("toy3")
print("eigenvectors of A vs V_perp, margins:", kernel_vs_vperp(m))
print("nearest roots of det(Q' + sA):", empirical_eta1(m, "plus"))
print("admissible weight bound:", eta_star(m, "plus"))

scan = scan_invertibility(m, "plus", 0.01, 50.0, 2001)
print(f"eta=0.01: min sigma {scan.sigma_min.min():.6f}, tail threshold {scan.tail_threshold:.3f},"
      f" certified {scan.passed}")

plain = scan_invertibility(m, "plus", 0.0, 50.0, 2001)
print("eta=0: sigma vanishes at omega =", plain.failures())
