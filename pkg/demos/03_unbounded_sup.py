"""Indicator data on shrinking intervals: the sup norm of K g grows like sqrt(N)."""
from relaxman import example47_lower_bound

print(" N   measured sup   sqrt(N)-bound")
for N in (1, 2, 4, 8, 16):
    res = example47_lower_bound(N)
    print(f"{N:2d}   {res.measured_sup:12.6f}   {res.bound:12.6f}")

res = example47_lower_bound(1)
print("single mode at t=0:", res.single_mode_tau0, " exact integral:", res.closed_form_tau0)
