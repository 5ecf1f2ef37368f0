"""Best approximation of plane targets by finite orbit pieces, and exponent estimates.

For a nonzero plane point u, the orbit points of a column family with first
column (a, c) lie on the line w + k * u2 * (a, c), so the Euclidean closest
point to a target v is found from the continuous minimizer
k* = <v - w, (a, c)> / (u2 * (a^2 + c^2)) by testing the few integers around
it.  Budget traces over very large norm budgets additionally prune with a
bottom-row strip scan: any element beating the current best distance has its
second row (c, d) inside an explicit strip of width twice that distance, which
shrinks rapidly as budgets grow.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .enumeration import (
    SubgroupFilter,
    _a_chunks,
    _budget_int,
    _families_in_range,
    _shift_interval,
    elements_array,
    ext_gcd,
)
from .errors import EmptyBudget, ExactHit, InsufficientData
from .matrices import LatticeElement

__all__ = [
    "ApproxRecord",
    "ApproxTrace",
    "ExponentEstimate",
    "orbit_point",
    "best_approx",
    "approx_trace",
    "estimate_exponents",
    "survey_exponents",
]

TRACE_CSV_HEADER = "T,dist,norm,a,b,c,d"


def orbit_point(gamma: LatticeElement, u) -> np.ndarray:
    """Image of the plane point u under the linear action of gamma."""
    return gamma.apply(u)


@dataclass(frozen=True)
class ApproxRecord:
    """One orbit point: the group element, its trace norm, and |gamma*u - v|_2."""

    gamma: LatticeElement
    gamma_norm: int
    dist: float


@dataclass
class ApproxTrace:
    """Per-budget best approximations d(T) = min over the budget-T ball of |gamma*u - v|."""

    u: tuple
    v: tuple
    budgets: list
    records: list

    def dists(self) -> np.ndarray:
        return np.array([r.dist for r in self.records])

    def rows(self) -> list:
        out = []
        for T, r in zip(self.budgets, self.records):
            g = r.gamma
            out.append((float(T), r.dist, int(r.gamma_norm), g.a, g.b, g.c, g.d))
        return out

    def to_csv(self) -> str:
        lines = [TRACE_CSV_HEADER]
        for T, dist, norm, a, b, c, d in self.rows():
            lines.append(f"{T:.17g},{dist:.17g},{norm},{a},{b},{c},{d}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, u=(0.0, 0.0), v=(0.0, 0.0)) -> "ApproxTrace":
        budgets, records = [], []
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if lines and lines[0].strip() != TRACE_CSV_HEADER:
            raise ValueError("bad trace header")
        for ln in lines[1:]:
            T, dist, norm, a, b, c, d = ln.split(",")
            budgets.append(float(T))
            records.append(
                ApproxRecord(LatticeElement(int(a), int(b), int(c), int(d)), int(norm), float(dist))
            )
        return cls(u=tuple(u), v=tuple(v), budgets=budgets, records=records)


# Candidate ordering used by every search path: distance first, then trace
# norm, then entries.  Squared distance is compared (same order, cheaper).
def _cand_key(dist2: float, norm: int, a: int, c: int, b: int, d: int) -> tuple:
    return (dist2, norm, a, c, b, d)


@lru_cache(maxsize=4)
def _cached_ball(Tint: int) -> np.ndarray:
    # shared read-only phase-1 ball; every consumer copies via fancy indexing
    return elements_array(Tint)


def _best_in_families(fams: Iterable, u, v, subgroup: SubgroupFilter) -> Optional[tuple]:
    u1, u2 = float(u[0]), float(u[1])
    v1, v2 = float(v[0]), float(v[1])
    best = None
    if u2 == 0.0:
        # Degenerate direction: each family's orbit point (a*u1, c*u1) is
        # shift-independent, so only the minimal-norm completion matters.
        for fam in fams:
            a, c = fam.a, fam.c
            e1 = a * u1 - v1
            e2 = c * u1 - v2
            dist2 = e1 * e1 + e2 * e2
            for k in fam.shifts() if subgroup.kind != "full" else (0,):
                b, d = fam.b0 + k * a, fam.d0 + k * c
                if not subgroup.passes(a, b, c, d):
                    continue
                cand = _cand_key(dist2, a * a + b * b + c * c + d * d, a, c, b, d)
                if best is None or cand < best:
                    best = cand
                break  # further shifts only increase the norm
        return best
    for fam in fams:
        a, c = fam.a, fam.c
        A = a * a + c * c
        w1 = a * u1 + fam.b0 * u2
        w2 = c * u1 + fam.d0 * u2
        kstar = ((v1 - w1) * a + (v2 - w2) * c) / (u2 * A)
        if math.isfinite(kstar):
            lo = max(fam.k_lo, math.floor(kstar) - 1)
            hi = min(fam.k_hi, math.ceil(kstar) + 1)
            if lo > hi:
                lo = fam.k_lo if kstar < fam.k_lo else fam.k_hi
                hi = lo
        else:
            lo = hi = fam.k_lo if kstar < 0 else fam.k_hi
        for k in range(lo, hi + 1):
            b, d = fam.b0 + k * a, fam.d0 + k * c
            if not subgroup.passes(a, b, c, d):
                continue
            e1 = w1 + k * u2 * a - v1
            e2 = w2 + k * u2 * c - v2
            dist2 = e1 * e1 + e2 * e2
            cand = _cand_key(dist2, a * a + b * b + c * c + d * d, a, c, b, d)
            if best is None or cand < best:
                best = cand
        if subgroup.kind != "full":
            # The closed-form minimizer may be filtered out; fall back to the
            # best *passing* shift by scanning the whole (small) interval.
            for k in fam.shifts():
                if lo <= k <= hi:
                    continue
                b, d = fam.b0 + k * a, fam.d0 + k * c
                if not subgroup.passes(a, b, c, d):
                    continue
                e1 = w1 + k * u2 * a - v1
                e2 = w2 + k * u2 * c - v2
                dist2 = e1 * e1 + e2 * e2
                cand = _cand_key(dist2, a * a + b * b + c * c + d * d, a, c, b, d)
                if best is None or cand < best:
                    best = cand
    return best


def _best_chunk(args) -> Optional[tuple]:
    Tint, u, v, filter_text, a_lo, a_hi = args
    fams = _families_in_range(Tint, a_lo, a_hi)
    return _best_in_families(fams, u, v, SubgroupFilter.parse(filter_text))


def _record_from_key(key: tuple) -> ApproxRecord:
    dist2, norm, a, c, b, d = key
    return ApproxRecord(LatticeElement(a, b, c, d), norm, math.sqrt(dist2))


def best_approx(
    u,
    v,
    T: float,
    subgroup: SubgroupFilter = SubgroupFilter.full(),
    workers: int = 1,
) -> ApproxRecord:
    """Element of the budget-T ball (after filtering) closest to v on the orbit of u.

    Ties resolve by (dist, norm, a, c, b, d), so the result is identical for
    any worker count.
    """
    if float(u[0]) == 0.0 and float(u[1]) == 0.0:
        raise ValueError("orbit seed u must be nonzero")
    Tint = _budget_int(T)
    chunks = [(Tint, (float(u[0]), float(u[1])), (float(v[0]), float(v[1])), str(subgroup), lo, hi)
              for lo, hi in _a_chunks(Tint, workers)]
    if workers <= 1 or len(chunks) <= 1:
        keys = [_best_chunk(ch) for ch in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            keys = list(pool.map(_best_chunk, chunks))
    keys = [k for k in keys if k is not None]
    if not keys:
        raise EmptyBudget(f"no elements with budget {T} pass filter {subgroup}")
    return _record_from_key(min(keys))


# ---------------------------------------------------------------------------
# Budget traces
# ---------------------------------------------------------------------------

def _phase1_records(arr: np.ndarray, u, v, budgets: Sequence[float], subgroup: SubgroupFilter):
    """Exact per-budget minima over a materialized ball (rows sorted for ties)."""
    a, b, c, d = (arr[:, i].astype(float) for i in range(4))
    norms = arr[:, 0] ** 2 + arr[:, 1] ** 2 + arr[:, 2] ** 2 + arr[:, 3] ** 2
    if subgroup.kind == "gamma0":
        mask = arr[:, 2] % subgroup.level == 0
    elif subgroup.kind == "gamma":
        n = subgroup.level
        mask = (
            (arr[:, 0] % n == 1 % n)
            & (arr[:, 3] % n == 1 % n)
            & (arr[:, 1] % n == 0)
            & (arr[:, 2] % n == 0)
        )
    else:
        mask = np.ones(arr.shape[0], dtype=bool)
    arr, norms = arr[mask], norms[mask]
    a, b, c, d = a[mask], b[mask], c[mask], d[mask]
    order = np.lexsort((arr[:, 3], arr[:, 1], arr[:, 2], arr[:, 0], norms))
    arr, norms = arr[order], norms[order]
    u1, u2 = float(u[0]), float(u[1])
    v1, v2 = float(v[0]), float(v[1])
    e1 = arr[:, 0] * u1 + arr[:, 1] * u2 - v1
    e2 = arr[:, 2] * u1 + arr[:, 3] * u2 - v2
    dist2 = e1 * e1 + e2 * e2
    out = []
    for T in budgets:
        p = int(np.searchsorted(norms, math.floor(T), side="right"))
        if p == 0:
            raise EmptyBudget(f"no elements with budget {T} pass filter {subgroup}")
        i = int(np.argmin(dist2[:p]))  # first occurrence wins: rows pre-sorted for ties
        row = arr[i]
        out.append(_cand_key(float(dist2[i]), int(norms[i]), int(row[0]), int(row[1]), int(row[2]), int(row[3])))
    return out


def _seed_matrix(u) -> np.ndarray:
    """Determinant-one matrix whose second column is the orbit seed u."""
    u1, u2 = float(u[0]), float(u[1])
    if u2 != 0.0:
        return np.array([[1.0 / u2, u1], [0.0, u2]])
    return np.array([[0.0, u1], [-1.0 / u1, 0.0]])


def _deep_strip_improve(u, v, Tint: int, eps: float, subgroup: SubgroupFilter, best: tuple) -> tuple:
    """Reduced-basis variant of the strip scan for very large budgets.

    Enumerates integer candidates with both orbit-point coordinates within eps
    of the target through the quotient-side box kernel, whose cost scales with
    the candidate count rather than with sqrt(budget).  Requires the target
    window [v2 - eps, v2 + eps] to be sign-definite.
    """
    from .homogeneous import _box_candidates

    u1, u2 = float(u[0]), float(u[1])
    v1, v2 = float(v[0]), float(v[1])
    flip = v2 < 0.0
    if flip:
        v1, v2 = -v1, -v2  # scan the mirrored window; candidates negate back
    g = _seed_matrix(u)
    G = float(np.sum(g * g))
    tau_lo = v2 - eps
    if tau_lo <= 0.0:
        raise ValueError("deep strip scan needs a sign-definite target window")
    s_bound = math.sqrt(Tint * G) / tau_lo + 1.0
    for (a, b, c, d, _, tau, _) in _box_candidates(
        g, v1 - eps, v1 + eps, tau_lo, v2 + eps, -s_bound, s_bound
    ):
        if flip:
            a, b, c, d = -a, -b, -c, -d
        if a * a + b * b + c * c + d * d > Tint:
            continue
        if not subgroup.passes(a, b, c, d):
            continue
        e1 = a * u1 + b * u2 - v[0]
        e2 = c * u1 + d * u2 - v[1]
        dist2 = e1 * e1 + e2 * e2
        cand = _cand_key(dist2, a * a + b * b + c * c + d * d, a, c, b, d)
        if cand < best:
            best = cand
    return best


# The direct scan walks an integer range of length ~2*sqrt(budget); beyond
# this it switches to the reduced-basis kernel.
_DIRECT_STRIP_LIMIT = 2**40


def _strip_improve(u, v, Tint: int, eps: float, subgroup: SubgroupFilter, best: tuple) -> tuple:
    """Scan second rows (c, d) with |c*u1 + d*u2 - v2| <= eps, norm <= Tint.

    Any element with distance <= eps has its second row in the strip, so the
    returned key is the exact minimum over the whole budget ball whenever
    eps >= the current best distance.
    """
    u1, u2 = float(u[0]), float(u[1])
    v1, v2 = float(v[0]), float(v[1])
    if Tint > _DIRECT_STRIP_LIMIT and abs(v2) > eps:
        return _deep_strip_improve(u, v, Tint, eps, subgroup, best)
    cap = Tint - 1  # top row contributes at least 1 to the norm
    if cap < 0:
        return best
    cmax = math.isqrt(cap)

    def pair_blocks():
        block = 1 << 22
        for c0 in range(-cmax, cmax + 1, block):
            cs = np.arange(c0, min(c0 + block, cmax + 1))
            if u2 != 0.0:
                lo = (v2 - eps - cs * u1) / u2
                hi = (v2 + eps - cs * u1) / u2
                d_lo, d_hi = np.minimum(lo, hi), np.maximum(lo, hi)
                rad = np.sqrt(cap - cs.astype(float) ** 2)
                d_lo = np.ceil(np.maximum(d_lo, -rad) - 1e-9).astype(np.int64)
                d_hi = np.floor(np.minimum(d_hi, rad) + 1e-9).astype(np.int64)
                hits = np.nonzero(d_lo <= d_hi)[0]
                yield from (
                    (int(cs[i]), dd) for i in hits for dd in range(int(d_lo[i]), int(d_hi[i]) + 1)
                )
            else:
                # u on the horizontal axis: the strip constrains c alone.
                keep = np.abs(cs * u1 - v2) <= eps
                yield from (
                    (int(cv), dd)
                    for cv in cs[keep]
                    for dd in range(-math.isqrt(cap - int(cv) ** 2), math.isqrt(cap - int(cv) ** 2) + 1)
                )

    for c, d in pair_blocks():
        if c == 0 and d == 0:
            continue
        if math.gcd(abs(c), abs(d)) != 1:
            continue
        g, x, y = ext_gcd(d, c)
        a0, b0 = x, -y  # a0*d - b0*c = 1
        tau = c * u1 + d * u2
        w1 = a0 * u1 + b0 * u2
        iv = _shift_interval(c, d, a0, b0, Tint - c * c - d * d)
        if iv is None:
            continue
        m_lo, m_hi = iv
        if tau != 0.0:
            lo = (v1 - eps - w1) / tau
            hi = (v1 + eps - w1) / tau
            if lo > hi:
                lo, hi = hi, lo
            m_lo = max(m_lo, math.ceil(lo - 1e-9))
            m_hi = min(m_hi, math.floor(hi + 1e-9))
        for m in range(m_lo, m_hi + 1):
            a, b = a0 + m * c, b0 + m * d
            if not subgroup.passes(a, b, c, d):
                continue
            e1 = a * u1 + b * u2 - v1
            e2 = tau - v2
            dist2 = e1 * e1 + e2 * e2
            cand = _cand_key(dist2, a * a + b * b + c * c + d * d, a, c, b, d)
            if cand < best:
                best = cand
    return best


def approx_trace(
    u,
    v,
    budgets: Sequence[float],
    subgroup: SubgroupFilter = SubgroupFilter.full(),
    phase1_cap: float = 4096.0,
) -> ApproxTrace:
    """Exact d(T) trace over an increasing budget grid.

    Budgets up to ``phase1_cap`` are resolved against the materialized ball;
    larger budgets run the strip scan seeded with the previous budget's best
    distance, which cannot miss any improving element.
    """
    budgets = [float(T) for T in budgets]
    if not budgets or any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly increasing")
    if budgets[0] < 2:
        raise ValueError("first budget must be at least 2")
    if float(u[0]) == 0.0 and float(u[1]) == 0.0:
        raise ValueError("orbit seed u must be nonzero")
    P1 = max(min(phase1_cap, budgets[-1]), budgets[0])
    low = [T for T in budgets if T <= P1]
    high = [T for T in budgets if T > P1]
    arr = _cached_ball(_budget_int(P1))  # unfiltered; filters applied per trace
    keys = _phase1_records(arr, u, v, low, subgroup)
    best = keys[-1]
    for T in high:
        Tint = _budget_int(T)
        eps = math.sqrt(best[0])
        if eps > 0.0:
            best = _strip_improve(u, v, Tint, eps * (1.0 + 1e-12), subgroup, best)
        keys.append(best)
    records = [_record_from_key(k) for k in keys]
    return ApproxTrace(
        u=(float(u[0]), float(u[1])),
        v=(float(v[0]), float(v[1])),
        budgets=budgets,
        records=records,
    )


# ---------------------------------------------------------------------------
# Exponent estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentEstimate:
    """Decay-exponent estimates from a budget trace.

    mu_hat is the least-squares slope of -log d(T) against log T over the tail
    window; mu is the best single approximation there, max of
    log(1/dist)/log(norm).  Exponents are in the trace-norm convention; the
    Frobenius-convention values are exactly twice as large.
    """

    mu_hat: float
    mu: float
    tail_fraction: float
    slope_stderr: float
    n_tail: int

    def as_dict(self) -> dict:
        return {
            "muHat": self.mu_hat,
            "mu": self.mu,
            "muHatFrobenius": 2.0 * self.mu_hat,
            "muFrobenius": 2.0 * self.mu,
            "tailFraction": self.tail_fraction,
            "slopeStderr": self.slope_stderr,
            "nTail": self.n_tail,
        }


def estimate_exponents(trace: ApproxTrace, tail_fraction: float = 0.5) -> ExponentEstimate:
    """Fit the exponent estimates over the tail window of a trace.

    The tail window keeps budgets T >= Tmax**(1 - tail_fraction); early
    small-norm flukes would otherwise dominate both estimates.  Raises ExactHit
    if a tail distance is exactly zero and InsufficientData below 8 tail points.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must be in (0, 1]")
    budgets = np.asarray(trace.budgets, dtype=float)
    dists = trace.dists()
    cutoff = budgets[-1] ** (1.0 - tail_fraction)
    mask = budgets >= cutoff
    tail_d = dists[mask]
    if np.any(tail_d == 0.0):
        i = int(np.nonzero(mask)[0][int(np.argmax(tail_d == 0.0))])
        raise ExactHit("target lies on the orbit; exponent is +inf", record=trace.records[i])
    if int(mask.sum()) < 8:
        raise InsufficientData(f"only {int(mask.sum())} budgets in the tail window; need 8")
    x = np.log(budgets[mask])
    y = -np.log(tail_d)
    n = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    resid = y - (ybar + slope * (x - xbar))
    sigma2 = float(np.sum(resid**2)) / max(n - 2, 1)
    stderr = math.sqrt(sigma2 / sxx)
    mu = -math.inf
    for rec in (trace.records[i] for i in np.nonzero(mask)[0]):
        mu = max(mu, math.log(1.0 / rec.dist) / math.log(rec.gamma_norm))
    return ExponentEstimate(
        mu_hat=slope,
        mu=mu,
        tail_fraction=tail_fraction,
        slope_stderr=stderr,
        n_tail=n,
    )


def survey_exponents(
    n_pairs: int,
    budgets: Sequence[float],
    seed: int,
    u_box=((1.0, 2.0), (1.0, 2.0)),
    v_box=((1.0, 2.0), (1.0, 2.0)),
    fixed_v=None,
    tail_fraction: float = 0.5,
    subgroup: SubgroupFilter = SubgroupFilter.full(),
) -> list:
    """Exponent estimates for seeded random (u, v) pairs; one dict per pair."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_pairs):
        u = (rng.uniform(*u_box[0]), rng.uniform(*u_box[1]))
        if fixed_v is not None:
            v = (float(fixed_v[0]), float(fixed_v[1]))
            rng.uniform(0, 1, size=2)  # keep the stream aligned with the random-v mode
        else:
            v = (rng.uniform(*v_box[0]), rng.uniform(*v_box[1]))
        row = {"index": i, "u1": u[0], "u2": u[1], "v1": v[0], "v2": v[1]}
        trace = approx_trace(u, v, budgets, subgroup=subgroup)
        try:
            est = estimate_exponents(trace, tail_fraction)
            row.update(est.as_dict())
            row["exactHit"] = False
        except ExactHit:
            row.update({"muHat": math.inf, "mu": math.inf, "exactHit": True})
        rows.append(row)
    return rows
