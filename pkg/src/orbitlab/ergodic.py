"""Discrete shear-orbit experiments on the quotient.

The orbit of a quotient point x under the integer lower-shear flow is
O_K(x) = {x * lower_shear(k): |k| <= K}.  For a box target, a group candidate
gamma with gamma*rep in the (tau, p1)-box hits the target exactly at the
integer shifts k that move its shear coordinate s into (-1/2, 1/2), i.e. at
the single k = round(-s) (boundary shifts contribute nothing: the window is
open and the bump vanishes there).  All experiments below exploit this: one
candidate search per sample point covers every orbit time at once.

Monte Carlo loops use common random numbers across grid values and accumulate
in fixed-size chunks in index order, so results are bitwise identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .homogeneous import (
    HomPoint,
    TargetSpec,
    _box_candidates,
    _bump_x_width,
    _haar_reps,
    _rep_of,
    bump,
    bump_mean,
    reduce_point,
)
from .matrices import lower_shear

__all__ = [
    "HitSet",
    "VarianceCurve",
    "MissRate",
    "UniformGridReport",
    "orbit_average",
    "variance_curve",
    "matrix_coefficient",
    "matcoef_curve",
    "hit_set",
    "miss_rate",
    "miss_rate_curve",
    "shrinking_hit_experiment",
    "shrinking_hit_report",
    "window_hit_counts",
    "uniform_grid_experiment",
]

_CHUNK = 512  # fixed Monte Carlo chunk size; keeps summation order worker-independent


def orbit_average(fn: Callable, point: HomPoint, half_width: int) -> float:
    """Uniform average of fn over the 2T+1 shear translates of the point.

    Every translate is re-reduced to the fundamental domain before fn sees it.
    This is the literal averaging operator; the experiment drivers below
    compute the same numbers through the candidate kernel.
    """
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    rep = _rep_of(point)
    total = 0.0
    for k in range(-half_width, half_width + 1):
        q, _ = reduce_point(rep @ lower_shear(k))
        total += fn(q)
    return total / (2 * half_width + 1)


# ---------------------------------------------------------------------------
# Candidate arrays per sample
# ---------------------------------------------------------------------------

def _weighted_hits(rep, spec: TargetSpec, k_cap: float):
    """Arrays (k, weight, p1, tau) of bump-weighted orbit hits with |k| <= k_cap."""
    dx = _bump_x_width(spec)
    hw1 = 0.5 * dx * (spec.v2 + 0.5 * spec.delta)
    hw = 0.5 * spec.delta
    cands = _box_candidates(
        rep,
        spec.v1 - hw1,
        spec.v1 + hw1,
        spec.v2 - hw,
        spec.v2 + hw,
        -k_cap - 0.5,
        k_cap + 0.5,
    )
    ks, ws = [], []
    for (_, _, _, _, p1, tau, s) in cands:
        k = round(-s)
        if abs(k) > k_cap or not -0.5 < s + k < 0.5:
            continue
        w = (
            bump((p1 - spec.v1) / (tau * dx))
            * bump((tau - spec.v2) / spec.delta)
            * bump(s + k)
        )
        if w > 0.0:
            ks.append(k)
            ws.append(w)
    return np.array(ks, dtype=np.int64), np.array(ws)


def _box_hit_ks(rep, v1, v2, delta, k_cap) -> np.ndarray:
    """Sorted distinct orbit times |k| <= k_cap at which the coset hits the box."""
    hw = 0.5 * delta
    cands = _box_candidates(rep, v1 - hw, v1 + hw, v2 - hw, v2 + hw, -k_cap - 0.5, k_cap + 0.5)
    ks = set()
    for (_, _, _, _, _, _, s) in cands:
        k = round(-s)
        if abs(k) <= k_cap and -0.5 < s + k < 0.5:
            ks.add(k)
    return np.array(sorted(ks), dtype=np.int64)


# ---------------------------------------------------------------------------
# Hit sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HitSet:
    """Orbit times within the horizon at which the target is hit."""

    K: int
    ks: tuple

    def __len__(self) -> int:
        return len(self.ks)


def hit_set(point, spec: TargetSpec, K: int) -> HitSet:
    """All |k| <= K with the k-th shear translate inside the projected box."""
    if K < 1:
        raise ValueError("horizon K must be >= 1")
    ks = _box_hit_ks(_rep_of(point), spec.v1, spec.v2, spec.delta, K)
    return HitSet(K=K, ks=tuple(int(k) for k in ks))


# ---------------------------------------------------------------------------
# Mean ergodic variance
# ---------------------------------------------------------------------------

@dataclass
class VarianceCurve:
    Ts: list
    values: list
    stderrs: list

    def rows(self) -> list:
        return list(zip(self.Ts, self.values, self.stderrs))


def _variance_chunk(args):
    v1, v2, delta, Ts, reps = args
    spec = TargetSpec(v1, v2, delta)
    m = bump_mean(spec)
    t_max = max(Ts)
    n_t = len(Ts)
    s1 = np.zeros(n_t)
    s2 = np.zeros(n_t)
    for rep in reps:
        ks, ws = _weighted_hits(rep, spec, t_max)
        aks = np.abs(ks)
        for i, T in enumerate(Ts):
            beta = ws[aks <= T].sum() / (2 * T + 1) if ws.size else 0.0
            dev = beta - m
            s1[i] += dev * dev
            s2[i] += dev**4
    return s1, s2


def variance_curve(
    spec: TargetSpec,
    Ts: Sequence[int],
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> VarianceCurve:
    """Monte Carlo estimate of the mean square deviation of the orbit average
    of the target bump from its space mean, over a grid of orbit half-widths.

    The same sample set serves every grid value (common random numbers), which
    sharpens slope estimates by an order of magnitude.
    """
    Ts = [int(T) for T in Ts]
    if any(T < 0 for T in Ts):
        raise ValueError("orbit half-widths must be >= 0")
    reps = _haar_reps(n_samples, seed)
    chunks = [
        (spec.v1, spec.v2, spec.delta, Ts, reps[i : i + _CHUNK])
        for i in range(0, n_samples, _CHUNK)
    ]
    if workers <= 1 or len(chunks) <= 1:
        parts = [_variance_chunk(ch) for ch in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_variance_chunk, chunks))
    s1 = np.zeros(len(Ts))
    s2 = np.zeros(len(Ts))
    for p1, p2 in parts:
        s1 += p1
        s2 += p2
    values = s1 / n_samples
    var_of_sq = np.maximum(s2 / n_samples - values**2, 0.0)
    stderrs = np.sqrt(var_of_sq / n_samples)
    return VarianceCurve(Ts=Ts, values=values.tolist(), stderrs=stderrs.tolist())


# ---------------------------------------------------------------------------
# Correlation decay
# ---------------------------------------------------------------------------

def _matcoef_chunk(args):
    v1, v2, delta, ts, W, reps = args
    spec = TargetSpec(v1, v2, delta)
    m = bump_mean(spec)
    t_hi = max(max(ts), 0.0)
    t_lo = min(min(ts), 0.0)
    n_t = len(ts)
    s1 = np.zeros(n_t)
    s2 = np.zeros(n_t)
    for rep in reps:
        dx = _bump_x_width(spec)
        hw1 = 0.5 * dx * (spec.v2 + 0.5 * spec.delta)
        hw = 0.5 * spec.delta
        cands = _box_candidates(
            rep,
            spec.v1 - hw1,
            spec.v1 + hw1,
            spec.v2 - hw,
            spec.v2 + hw,
            -(W + t_hi) - 0.5,
            -t_lo + 0.5,
        )
        p1s = np.array([t[4] for t in cands])
        taus = np.array([t[5] for t in cands])
        ss = np.array([t[6] for t in cands])
        if ss.size:
            wgt = bump((p1s - spec.v1) / (taus * dx)) * bump((taus - spec.v2) / spec.delta)
        else:
            wgt = np.zeros(0)

        def values_at(offset: float) -> np.ndarray:
            # F at the shear offsets j + offset, j = 0..W: each candidate is
            # active at the single integer j nearest to -(s + offset).
            out = np.zeros(W + 1)
            if ss.size == 0:
                return out
            j = np.rint(-ss - offset).astype(np.int64)
            r = ss + j + offset
            ok = (j >= 0) & (j <= W) & (np.abs(r) < 0.5)
            if np.any(ok):
                np.add.at(out, j[ok], wgt[ok] * bump(r[ok]))
            return out

        base = values_at(0.0) - m
        for i, t in enumerate(ts):
            prod = float(np.mean(base * (values_at(float(t)) - m)))
            s1[i] += prod
            s2[i] += prod * prod
    return s1, s2


def matcoef_curve(
    spec: TargetSpec,
    ts: Sequence[float],
    n_samples: int,
    seed: int,
    orbit_window: int = 0,
    workers: int = 1,
):
    """Correlation of the centered target bump with its shear translates.

    Returns (values, stderrs) for the given shear times, estimated over common
    random samples.  With orbit_window = W > 0 each sample additionally
    averages the product over W+1 consecutive orbit offsets, an unbiased
    variance reduction that leaves the estimand unchanged by invariance.
    """
    ts = [float(t) for t in ts]
    reps = _haar_reps(n_samples, seed)
    W = int(orbit_window)
    chunks = [
        (spec.v1, spec.v2, spec.delta, ts, W, reps[i : i + _CHUNK])
        for i in range(0, n_samples, _CHUNK)
    ]
    if workers <= 1 or len(chunks) <= 1:
        parts = [_matcoef_chunk(ch) for ch in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_matcoef_chunk, chunks))
    s1 = np.zeros(len(ts))
    s2 = np.zeros(len(ts))
    for p1, p2 in parts:
        s1 += p1
        s2 += p2
    values = s1 / n_samples
    var = np.maximum(s2 / n_samples - values**2, 0.0)
    stderrs = np.sqrt(var / n_samples)
    return values.tolist(), stderrs.tolist()


def matrix_coefficient(spec: TargetSpec, t: float, n_samples: int, seed: int) -> float:
    """Monte Carlo estimate of the centered-bump correlation at shear time t."""
    values, _ = matcoef_curve(spec, [t], n_samples, seed)
    return values[0]


# ---------------------------------------------------------------------------
# Missing-set measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MissRate:
    """Fraction of sample points whose length-T orbit misses the box target."""

    T: int
    delta: float
    fraction: float
    ci_lo: float
    ci_hi: float
    n: int

    @property
    def stderr(self) -> float:
        return math.sqrt(max(self.fraction * (1.0 - self.fraction), 0.0) / self.n)


def _wilson(x: int, n: int, z: float = 1.96) -> tuple:
    if n == 0:
        return 0.0, 1.0
    p = x / n
    den = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, center - half), min(1.0, center + half)


def _miss_chunk(args):
    v1, v2, delta, Ts, reps = args
    t_max = max(Ts)
    first = []
    for rep in reps:
        ks = _box_hit_ks(rep, v1, v2, delta, t_max)
        first.append(int(np.min(np.abs(ks))) if ks.size else t_max + 1)
    return first


def miss_rate_curve(
    Ts: Sequence[int],
    delta: float,
    v,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> list:
    """Miss fractions over a grid of orbit half-widths, common random numbers.

    Sharing samples across the grid makes the curve exactly nonincreasing in T
    (orbits only grow), which is also the statistical content being measured.
    """
    TargetSpec(float(v[0]), float(v[1]), float(delta))  # validate
    Ts = sorted(int(T) for T in Ts)
    if n_samples < 1:
        raise ValueError("need at least one sample")
    reps = _haar_reps(n_samples, seed)
    chunks = [
        (float(v[0]), float(v[1]), float(delta), Ts, reps[i : i + _CHUNK])
        for i in range(0, n_samples, _CHUNK)
    ]
    if workers <= 1 or len(chunks) <= 1:
        parts = [_miss_chunk(ch) for ch in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_miss_chunk, chunks))
    first = np.array([f for part in parts for f in part])
    out = []
    for T in Ts:
        misses = int(np.sum(first > T))
        lo, hi = _wilson(misses, n_samples)
        out.append(
            MissRate(T=T, delta=float(delta), fraction=misses / n_samples, ci_lo=lo, ci_hi=hi, n=n_samples)
        )
    return out


def miss_rate(T: int, delta: float, v, n_samples: int, seed: int, workers: int = 1) -> MissRate:
    return miss_rate_curve([T], delta, v, n_samples, seed, workers)[0]


# ---------------------------------------------------------------------------
# Shrinking targets
# ---------------------------------------------------------------------------

def _delta_cap(v2: float) -> float:
    # Boxes require delta < min(1/2, v2); the cap only affects small times and
    # leaves the shrinking asymptotics untouched.
    return min(0.499, 0.98 * v2)


def _dyadic_levels(eta: float, k_max: int, v2: float) -> list:
    """Levels (horizon, delta): horizon 2^j with the target size taken at the
    covering interval's far end min(2^(j+1), k_max), so a level hit certifies
    every time in [2^j, min(2^(j+1), k_max)] by monotonicity of orbits and
    targets."""
    cap = _delta_cap(v2)
    levels = []
    j = 0
    while 2**j <= k_max:
        end = min(2 ** (j + 1), k_max)
        delta = cap if eta == 0.0 else min(cap, float(end) ** (-eta))
        levels.append((2**j, delta))
        j += 1
    return levels


def shrinking_hit_report(eta: float, point, k_max: int, v) -> dict:
    """Dyadic certification run for the shrinking-target hit problem.

    Returns per-level hit flags and the certified threshold T0 (least dyadic
    horizon from which every level hits), or None when no T0 <= k_max/2 exists.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("shrink exponent must lie in [0, 1)")
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    v1, v2 = float(v[0]), float(v[1])
    rep = _rep_of(point)
    levels = _dyadic_levels(eta, k_max, v2)
    delta_scan = max(d for _, d in levels)
    hw = 0.5 * delta_scan
    cands = _box_candidates(
        rep, v1 - hw, v1 + hw, v2 - hw, v2 + hw, -k_max - 0.5, k_max + 0.5
    )
    rows = [
        (round(-s), p1, tau, s)
        for (_, _, _, _, p1, tau, s) in cands
        if -0.5 < s + round(-s) < 0.5
    ]
    ks = np.array([r[0] for r in rows], dtype=np.int64)
    p1s = np.array([r[1] for r in rows])
    taus = np.array([r[2] for r in rows])
    flags = []
    for horizon, delta in levels:
        h = 0.5 * delta
        ok = bool(
            np.any(
                (np.abs(ks) <= horizon)
                & (np.abs(p1s - v1) <= h)
                & (np.abs(taus - v2) <= h)
            )
        ) if ks.size else False
        flags.append(ok)
    j_star = 0
    for j in range(len(flags) - 1, -1, -1):
        if not flags[j]:
            j_star = j + 1
            break
    T0 = 2**j_star
    found = T0 <= k_max / 2
    return {
        "eta": eta,
        "kMax": k_max,
        "T0": int(T0) if found else None,
        "levels": [
            {"horizon": h, "delta": d, "hit": f} for (h, d), f in zip(levels, flags)
        ],
    }


def shrinking_hit_experiment(eta: float, point, k_max: int, v) -> Optional[int]:
    """Least certified dyadic T0 with hits at every time in [T0, k_max], else None."""
    return shrinking_hit_report(eta, point, k_max, v)["T0"]


def window_hit_counts(point, v, eta: float, k_max: int) -> list:
    """Distinct hit times per dyadic window with the per-time shrinking target.

    Window j counts times with |k| in [2^j, min(2^(j+1), k_max+1)) for which the
    translate lies in the box of size min(cap, |k|**-eta).  Returns a list of
    dicts {lo, hi, count}.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("shrink exponent must lie in [0, 1)")
    v1, v2 = float(v[0]), float(v[1])
    cap = _delta_cap(v2)
    rep = _rep_of(point)
    out = []
    j = 0
    while 2**j <= k_max:
        lo, hi = 2**j, min(2 ** (j + 1) - 1, k_max)
        delta_scan = cap if eta == 0.0 else min(cap, float(lo) ** (-eta))
        hwv = 0.5 * delta_scan
        cands = _box_candidates(
            rep, v1 - hwv, v1 + hwv, v2 - hwv, v2 + hwv, -hi - 0.5, hi + 0.5
        )
        hits = set()
        for (_, _, _, _, p1, tau, s) in cands:
            k = round(-s)
            ak = abs(k)
            if not lo <= ak <= hi or not -0.5 < s + k < 0.5:
                continue
            dk = cap if eta == 0.0 else min(cap, float(ak) ** (-eta))
            if abs(p1 - v1) <= 0.5 * dk and abs(tau - v2) <= 0.5 * dk:
                hits.add(k)
        out.append({"lo": lo, "hi": hi, "count": len(hits)})
        j += 1
    return out


# ---------------------------------------------------------------------------
# Uniform grids of targets
# ---------------------------------------------------------------------------

@dataclass
class UniformGridReport:
    T0: Optional[int]
    levels: list


def _grid_points(omega, spacing: float) -> list:
    x0, x1, y0, y1 = omega
    nx = max(1, math.ceil((x1 - x0) / spacing)) if x1 > x0 else 1
    ny = max(1, math.ceil((y1 - y0) / spacing)) if y1 > y0 else 1
    xs = [x0 + (i + 0.5) * (x1 - x0) / nx if x1 > x0 else x0 for i in range(nx)]
    ys = [y0 + (i + 0.5) * (y1 - y0) / ny if y1 > y0 else y0 for i in range(ny)]
    return [(x, y) for x in xs for y in ys]


def uniform_grid_experiment(omega, eta: float, point, k_max: int) -> UniformGridReport:
    """Simultaneous shrinking-target certification over a compact target box.

    omega = (x0, x1, y0, y1) must avoid the axes with y0 > 0.  Per dyadic level
    the box is covered by a grid of spacing equal to the level's target size
    (every point of omega is within that size of a grid point in the box
    norm), and the level passes when every grid target is hit within the
    horizon.  Reports the certified uniform T0, or None.
    """
    x0, x1, y0, y1 = (float(t) for t in omega)
    if x0 > x1 or y0 > y1:
        raise ValueError("omega bounds must be ordered")
    if y0 <= 0.0 or x0 * x1 <= 0.0 or (x0 == 0.0 and x1 == 0.0):
        raise ValueError("omega must be compact and off the axes with positive v2")
    if not 0.0 <= eta < 1.0:
        raise ValueError("shrink exponent must lie in [0, 1)")
    rep = _rep_of(point)
    cap = _delta_cap(y0)
    levels = []
    j = 0
    while 2**j <= k_max:
        end = min(2 ** (j + 1), k_max)
        delta = cap if eta == 0.0 else min(cap, float(end) ** (-eta))
        horizon = 2**j
        grid = _grid_points((x0, x1, y0, y1), delta)
        h = 0.5 * delta
        ok = True
        for (w1, w2) in grid:
            cands = _box_candidates(
                rep, w1 - h, w1 + h, w2 - h, w2 + h, -horizon - 0.5, horizon + 0.5
            )
            if not any(
                abs(round(-s)) <= horizon and -0.5 < s + round(-s) < 0.5
                for (_, _, _, _, _, _, s) in cands
            ):
                ok = False
                break
        levels.append({"horizon": horizon, "delta": delta, "nGrid": len(grid), "hit": ok})
        j += 1
    j_star = 0
    for idx in range(len(levels) - 1, -1, -1):
        if not levels[idx]["hit"]:
            j_star = idx + 1
            break
    T0 = 2**j_star
    return UniformGridReport(T0=int(T0) if T0 <= k_max / 2 else None, levels=levels)
