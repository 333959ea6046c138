"""The bounded-solution operator on u' = -u + f, checked against its closed form."""
import numpy as np

from relaxman import GridFunction, apply_K, apply_Km, builtin_reduced, spectral_factorize

r = builtin_reduced("scalar")
sd = spectral_factorize(r)

f = GridFunction.sample(lambda t: np.exp(-t)[:, None], 0.0, 20.0, 1e-3, lambda t: -np.exp(-t)[:, None])
t = f.tau

Kf = apply_K(r, sd, f)
Kmf = apply_Km(r, sd, f)

print("max |K f   - t e^-t|     =", np.abs(Kf.values[:, 0] - t * np.exp(-t)).max())
print("max |K_m f - (1+t) e^-t| =", np.abs(Kmf.values[:, 0] - (1 + t) * np.exp(-t)).max())

for alpha in (0.0, 0.25, 0.5):
    print(f"alpha={alpha}: |K_m f|_H1 / |f|_H1 = {Kmf.h1(alpha) / f.h1(alpha):.4f}")
