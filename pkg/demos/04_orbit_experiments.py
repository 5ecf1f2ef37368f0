#!/usr/bin/env python3
"""Discrete shear-orbit experiments: averaging, missing sets, shrinking targets.

The integer lower-shear flow on the quotient is ergodic; these experiments
measure how fast its finite orbit averages settle, how quickly the set of
points whose orbit misses a fixed target shrinks, and how fast a shrinking
family of targets can contract while orbits keep hitting it.
"""

import time

import numpy as np

from orbitlab import TargetSpec, haar_sample, hit_set, miss_rate_curve, variance_curve
from orbitlab.ergodic import shrinking_hit_report, window_hit_counts

V = (1.3, 0.8)

print("== hit times of one orbit ==")
pt = haar_sample(1, seed=7)[0]
spec = TargetSpec(*V, 0.2)
hs = hit_set(pt, spec, 2000)
print(f"  |k| <= 2000 hits the size-0.2 target at {len(hs)} times; first few: {hs.ks[:8]}")

print()
print("== orbit-average variance decay ==")
t0 = time.time()
curve = variance_curve(TargetSpec(*V, 0.1), [2**k for k in range(6, 13)], 3000, seed=8)
x = np.log(np.array(curve.Ts, float))
y = np.log(np.array(curve.values))
slope = ((x - x.mean()) * (y - y.mean())).sum() / ((x - x.mean()) ** 2).sum()
for T, val, se in curve.rows():
    print(f"  T = {T:>5}: variance {val:.3e} +- {se:.1e}")
print(f"  log-log slope {slope:.3f} (theory: -1)   ({time.time()-t0:.1f}s)")

print()
print("== missing-orbit fractions ==")
t0 = time.time()
rates = miss_rate_curve([2**k for k in range(4, 12)], 0.2, V, 4000, seed=9)
for m in rates:
    print(f"  T = {m.T:>5}: miss fraction {m.fraction:.4f}  (95% CI {m.ci_lo:.4f}..{m.ci_hi:.4f})")
print(f"  ({time.time()-t0:.1f}s)")

print()
print("== shrinking targets ==")
t0 = time.time()
pts = haar_sample(20, seed=10)
found = []
for p in pts:
    rep = shrinking_hit_report(0.25, p, 10**5, V)
    found.append(rep["T0"])
ok = [t for t in found if t is not None]
print(f"  shrink exponent 0.25: certified thresholds for {len(ok)}/20 points; max T0 = {max(ok)}")
print(f"  ({time.time()-t0:.1f}s)")

t0 = time.time()
agg = None
for p in haar_sample(500, seed=11):
    counts = np.array([w["count"] for w in window_hit_counts(p, V, 0.7, 10**5)])
    agg = counts if agg is None else agg + counts
print(f"  shrink exponent 0.7: hits per dyadic window, 500 points: {agg.tolist()}")
print(f"  late windows empty out: the fast-shrinking series is summable   ({time.time()-t0:.1f}s)")
