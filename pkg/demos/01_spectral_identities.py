"""Tour of the spectral core: fields, norms, and the advection-term algebra.

Everything lives on the 2pi-periodic square in Fourier coefficients; the
quadratic form B(u, v) = P((u . grad) v) is evaluated pseudospectrally with
two-thirds dealiasing, which keeps its classical identities exact to roundoff
for trigonometric polynomials.
"""

import numpy as np

from intertwine import spectral as sp

grid = sp.Grid(32)
rng = np.random.default_rng(0)

u = sp.random_field(grid, rng, energy=1.0)
v = sp.random_field(grid, rng, energy=1.0)
w = sp.random_field(grid, rng, energy=1.0)

print(f"grid: {grid}")
print(f"|u| = {u.l2:.6f}, |u|_V = {u.h1:.6f}  (Poincare: |u| <= |u|_V)")

# the trilinear form b(u, v, w) = (B(u, v), w) is skew in its last two slots
b_uvw = sp.trilinear_b(u, v, w)
b_uwv = sp.trilinear_b(u, w, v)
print(f"\nskew symmetry: b(u,v,w) + b(u,w,v) = {b_uvw + b_uwv:.3e}")
print(f"energy neutrality: b(u,v,v) = {sp.trilinear_b(u, v, v):.3e}")

# in 2D the advection term is also enstrophy-neutral
Au = sp.stokes_apply(u, 2)
print(f"enstrophy neutrality: b(u,u,Au) = {sp.trilinear_b(u, u, Au):.3e}")

# its polarization, with two fields
Av = sp.stokes_apply(v, 2)
mir = sp.trilinear_b(v, v, Au) + sp.trilinear_b(u, v, Av) + sp.trilinear_b(v, u, Av)
print(f"polarized identity: {mir:.3e}")

# the cellular Taylor-Green flow advects itself onto a pure pressure gradient
tg = sp.taylor_green(grid, 1.0)
print(f"\nTaylor-Green: |B(u,u)| after projection = {sp.bilinear_B(tg, tg).l2:.3e}")

# low/high mode splitting is an exact orthogonal decomposition
lo, hi = sp.project_low(u, 4.0), sp.project_high(u, 4.0)
print(f"Parseval split at K=4: |u|^2 - |P u|^2 - |Q u|^2 = "
      f"{u.l2**2 - lo.l2**2 - hi.l2**2:.3e}")
