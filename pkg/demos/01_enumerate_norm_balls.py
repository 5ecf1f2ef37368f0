#!/usr/bin/env python3
"""Walk through exact enumeration of determinant-one integer matrix balls.

The ball of budget T collects the integer matrices [[a, b], [c, d]] with
ad - bc = 1 whose entry-square sum is at most T.  Enumeration runs over
primitive first columns; each column carries an explicit interval of Bezout
shifts, so elements stream out in a deterministic order with O(1) work each.
"""

import tempfile
import time

from orbitlab import SubgroupFilter, count, dump_elements, enumerate_ball, family_iter, load_elements

print("== smallest balls ==")
for T in (1, 2, 3, 7):
    elems = list(enumerate_ball(T))
    print(f"budget {T}: {len(elems)} elements")
    if T <= 3:
        for g in elems:
            print("   ", g.entries())

print()
print("== column families at budget 7 ==")
for fam in family_iter(7):
    ks = list(fam.shifts())
    print(f"  column ({fam.a:+d},{fam.c:+d}): bezout ({fam.b0},{fam.d0}), shifts {ks}")

print()
print("== linear growth of the count ==")
print("the ball volume is 2*pi^2*(T-2), the quotient volume pi^2/3, so the")
print("count should approach 6*(T-2):")
for T in (10**3, 10**4, 10**5):
    t0 = time.time()
    n = count(T)
    print(f"  count({T:>6}) = {n:>7}   count/(6(T-2)) = {n/(6*(T-2)):.5f}   [{time.time()-t0:.2f}s]")

print()
print("== congruence filters ==")
for text in ("full", "gamma0:2", "gamma0:5", "gamma:2"):
    flt = SubgroupFilter.parse(text)
    print(f"  {text:>9}: count(500) = {count(500, flt)}")

print()
print("== binary dumps ==")
with tempfile.TemporaryDirectory() as tmp:
    path = f"{tmp}/ball.i64"
    n = dump_elements(path, 200, SubgroupFilter.gamma0(3))
    arr, sidecar = load_elements(path)
    print(f"  wrote and re-read {n} elements; sidecar: {sidecar}")
