#!/usr/bin/env python3
"""Approximate plane targets by lattice orbit points and estimate decay exponents.

A nonzero plane point u has orbit {gamma u} under the integer matrices; for a
generic u the orbit is dense, and d(T) = min over the budget-T ball of
|gamma u - v| decays polynomially.  The decay exponent is reported in both
norm conventions: trace norm (sum of squared entries, used for all budgets
here) and its square root.  The root-norm exponents are the ones comparable
with the classical window [1/3, 1/2].
"""

import math
import time

import numpy as np

from orbitlab import approx_trace, best_approx, estimate_exponents, orbit_point
from orbitlab.errors import ExactHit

print("== single best approximations ==")
u = (math.sqrt(2), math.sqrt(3))
v = (1.25, 1.85)
for T in (10**2, 10**4, 10**6):
    rec = best_approx(u, v, T)
    print(f"  budget {T:>7}: dist {rec.dist:.6f} via {rec.gamma.entries()} (norm {rec.gamma_norm})")

print()
print("== a full budget trace ==")
budgets = [4.0**k for k in range(4, 16)]
t0 = time.time()
trace = approx_trace(u, v, budgets)
print(f"  ({time.time()-t0:.1f}s)")
for T, rec in zip(trace.budgets, trace.records):
    print(f"  T = 4^{int(math.log(T, 4)):>2} : d(T) = {rec.dist:.3e}")
est = estimate_exponents(trace, tail_fraction=1.0)
print(f"  slope of -log d vs log T : {est.mu_hat:.3f} (trace norm)")
print(f"  root-norm equivalent     : {2 * est.mu_hat:.3f}  [theory window 1/3 .. 1/2]")

print()
print("== rational seeds are different ==")
# the orbit of a rational point is a scaled copy of the primitive integer
# vectors: discrete, so d(T) bottoms out at the lattice spacing
ur = (1.37, 1.81)  # = (137, 181)/100
tr = approx_trace(ur, (1.11, 1.62), [4.0**k for k in range(4, 14)])
print("  d(T) tail for u = (137/100, 181/100):", [f"{r.dist:.4f}" for r in tr.records[-4:]])

print()
print("== exact hits ==")
gam = best_approx((0, 1), (1, 1), 3).gamma
w = tuple(orbit_point(gam, u))
try:
    estimate_exponents(approx_trace(u, w, [2.0**k for k in range(4, 16)]))
except ExactHit as hit:
    print(f"  target on the orbit detected: {hit} (via {hit.record.gamma.entries()})")

print()
print("== a small random survey ==")
rng = np.random.default_rng(1)
slopes = []
t0 = time.time()
for _ in range(12):
    uu = rng.uniform(1, 2, 2)
    vv = rng.uniform(1, 2, 2)
    est = estimate_exponents(approx_trace(uu, vv, [4.0**k for k in range(4, 18)]), tail_fraction=1.0)
    slopes.append(2 * est.mu_hat)
print(f"  ({time.time()-t0:.1f}s) root-norm slopes: {np.round(slopes, 3)}")
print(f"  median {np.median(slopes):.3f}")
