"""Exhaustive enumeration of S-arithmetic points in bounded regions.

Points are stratified by exact denominator D = prod p^k_p: the integer matrix
M = D * gamma has det M = D^n and, for each p | D, M is not divisible by p.
The strata are disjoint, so the union over all D <= h has no duplicates.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .archimedean import LOG_METRIC, ArchBallSpec, log_norms, refined_distance
from .errors import DomainError, NotFound, ResourceGuardError
from .exact import GroupPoint, PrimeSet
from .padic_volume import _xgcd, level_indices

MAX_CANDIDATES = 50_000_000
MAX_SMOKE_CANDIDATES = 2_000_000


@dataclass(frozen=True)
class Region:
    """A metric ball around a real point, or the box |gamma_ij| <= bound."""

    kind: str
    ball: ArchBallSpec | None = None
    bound: float | None = None
    n: int = 2

    @classmethod
    def metric_ball(cls, center, radius, metric=LOG_METRIC, r_max=None) -> "Region":
        kw = {} if r_max is None else {"r_max": r_max}
        spec = ArchBallSpec(np.asarray(center, dtype=float), float(radius), metric, **kw)
        return cls("metric_ball", ball=spec, n=spec.center.shape[0])

    @classmethod
    def entry_box(cls, bound, n: int = 2) -> "Region":
        if bound < 1:
            raise DomainError("entry box bound must be >= 1")
        return cls("entry_box", bound=float(bound), n=n)

    def __post_init__(self):
        if self.kind not in ("metric_ball", "entry_box"):
            raise DomainError(f"unknown region kind {self.kind!r}")

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "entry_box":
            full = np.full((self.n, self.n), self.bound)
            return -full, full
        return self.ball.entry_box()

    def distances(self, gammas: np.ndarray) -> np.ndarray:
        """Distance of each point to the centre (0 for entry boxes)."""
        if self.kind == "entry_box":
            return np.zeros(len(gammas))
        x = self.ball.center
        Y = np.linalg.solve(x, gammas)
        return log_norms(Y)

    def contains(self, gammas: np.ndarray) -> np.ndarray:
        if len(gammas) == 0:
            return np.zeros(0, dtype=bool)
        if self.kind == "entry_box":
            return np.all(np.abs(gammas) <= self.bound, axis=(1, 2))
        r = self.ball.radius
        dist = self.distances(gammas)
        inside = dist <= r
        if self.ball.metric.mode == "refined" and self.ball.metric.k > 1:
            x = self.ball.center
            for i in np.flatnonzero(~inside & np.isfinite(dist)):
                y = np.linalg.solve(x, gammas[i])
                inside[i] = refined_distance(y, self.ball.metric.k)[0] <= r
        return inside


@dataclass
class EnumerationReport:
    points: list[GroupPoint]
    per_level_counts: dict[tuple[int, ...], int]
    primes: tuple[int, ...]
    wall_time: float = 0.0
    stats: dict[str, int] = field(default_factory=dict)

    def heights(self) -> np.ndarray:
        return np.array([pt.height for pt in self.points], dtype=np.int64)

    def count_up_to(self, h: int) -> int:
        return sum(1 for pt in self.points if pt.height <= h)

    def to_json(self) -> dict:
        return {
            "primes": list(self.primes),
            "points": [
                {"level": list(pt.level), "entries": list(pt.entries), "D": pt.denom}
                for pt in self.points
            ],
            "per_level_counts": [
                {"level": list(lv), "count": c} for lv, c in sorted(self.per_level_counts.items())
            ],
            "wall_time": self.wall_time,
            "stats": dict(self.stats),
        }


def _int_bounds(lo, hi, D):
    eps = 1e-9
    return (
        np.ceil(lo * D - eps).astype(np.int64).tolist(),
        np.floor(hi * D + eps).astype(np.int64).tolist(),
    )


def _t_range(c0, step, lo, hi):
    """Integers t with lo <= c0 + t * step <= hi; None if unconstrained."""
    if step == 0:
        return None if lo <= c0 <= hi else (1, 0)
    if step > 0:
        return -((c0 - lo) // step), (hi - c0) // step
    step = -step
    return -((hi - c0) // step), (c0 - lo) // step


def _candidates_2x2(D, level_primes, lo, hi, stats, max_candidates):
    (alo, blo), (clo, dlo) = lo
    (ahi, bhi), (chi, dhi) = hi
    pairs = max(0, ahi - alo + 1) * max(0, bhi - blo + 1)
    if pairs > max_candidates:
        raise ResourceGuardError(f"{pairs} top rows exceed the guard {max_candidates}")
    stats["top_rows"] = stats.get("top_rows", 0) + pairs
    D2 = D * D
    out = []
    gcd = math.gcd
    for a in range(alo, ahi + 1):
        for b in range(blo, bhi + 1):
            g = gcd(a, b)
            if g == 0 or D2 % g:
                continue
            _, u, v = _xgcd(a, b)
            m = D2 // g
            d0, c0 = u * m, -v * m
            ag, bg = a // g, b // g
            rc = _t_range(c0, ag, clo, chi)
            rd = _t_range(d0, bg, dlo, dhi)
            if rc is None:
                t0, t1 = rd
            elif rd is None:
                t0, t1 = rc
            else:
                t0, t1 = max(rc[0], rd[0]), min(rc[1], rd[1])
            for t in range(t0, t1 + 1):
                c, d = c0 + t * ag, d0 + t * bg
                if any(a % p == 0 and b % p == 0 and c % p == 0 and d % p == 0 for p in level_primes):
                    stats["imprimitive"] = stats.get("imprimitive", 0) + 1
                    continue
                out.append((a, b, c, d))
    return out


def _cofactors(rows, n):
    """Integer vector w with det([rows; r]) = r . w."""
    w = []
    for j in range(n):
        minor = [[r[c] for c in range(n) if c != j] for r in rows]
        w.append((-1) ** (n - 1 + j) * _int_det_rows(minor))
    return w


def _int_det_rows(m):
    if len(m) == 1:
        return m[0][0]
    return sum(
        (-1) ** j * m[0][j] * _int_det_rows([r[:j] + r[j + 1 :] for r in m[1:]])
        for j in range(len(m))
        if m[0][j]
    )


def _candidates_general(D, n, level_primes, lo, hi, stats, max_candidates):
    ranges = [range(lo[i][j], hi[i][j] + 1) for i in range(n) for j in range(n)]
    size = math.prod(len(r) for r in ranges[: n * (n - 1)])
    if size > max_candidates:
        raise ResourceGuardError(f"{size} leading-row candidates exceed the guard {max_candidates}")
    stats["top_rows"] = stats.get("top_rows", 0) + size
    target = D**n
    last = ranges[n * (n - 1) :]
    out = []
    for flat in itertools.product(*ranges[: n * (n - 1)]):
        rows = [list(flat[i * n : (i + 1) * n]) for i in range(n - 1)]
        w = _cofactors(rows, n)
        if not any(w):
            continue
        j = max(range(n), key=lambda c: abs(w[c]))
        others = [c for c in range(n) if c != j]
        for free in itertools.product(*(last[c] for c in others)):
            rest = target - sum(f * w[c] for f, c in zip(free, others))
            if rest % w[j]:
                continue
            val = rest // w[j]
            if not lo[n - 1][j] <= val <= hi[n - 1][j]:
                continue
            r = [0] * n
            r[j] = val
            for f, c in zip(free, others):
                r[c] = f
            ents = tuple(flat) + tuple(r)
            if any(all(e % p == 0 for e in ents) for p in level_primes):
                stats["imprimitive"] = stats.get("imprimitive", 0) + 1
                continue
            out.append(ents)
    return out


def enumerate_level(S: PrimeSet, level, region: Region, n: int | None = None, *, primes=None,
                    max_candidates: int | None = None, stats=None) -> list[GroupPoint]:
    """All points of exact denominator prod p^k_p lying in ``region``.

    ``level`` is aligned with ``primes`` (default: the primes of S).
    """
    n = region.n if n is None else n
    if n != region.n:
        raise DomainError("dimension of region and request differ")
    primes = tuple(S.primes if primes is None else primes)
    level = tuple(int(k) for k in level)
    if len(level) != len(primes) or min(level, default=0) < 0:
        raise DomainError(f"level {level} does not match primes {primes}")
    stats = {} if stats is None else stats
    D = math.prod(p**k for p, k in zip(primes, level))
    level_primes = [p for p, k in zip(primes, level) if k > 0]
    lo, hi = region.box()
    lo, hi = _int_bounds(lo, hi, D)
    if n == 2:
        guard = MAX_CANDIDATES if max_candidates is None else max_candidates
        cands = _candidates_2x2(D, level_primes, lo, hi, stats, guard)
    else:
        guard = MAX_SMOKE_CANDIDATES if max_candidates is None else max_candidates
        cands = _candidates_general(D, n, level_primes, lo, hi, stats, guard)
    stats["candidates"] = stats.get("candidates", 0) + len(cands)
    if not cands:
        return []
    arr = np.array(cands, dtype=float).reshape(-1, n, n) / D
    keep = region.contains(arr)
    stats["outside_region"] = stats.get("outside_region", 0) + int((~keep).sum())
    pts = [
        GroupPoint(level, tuple(c), D, n, primes)
        for c, k in zip(cands, keep)
        if k
    ]
    pts.sort()
    return pts


def _level_job(args):
    S, level, region, primes, max_candidates = args
    stats = {}
    pts = enumerate_level(S, level, region, primes=primes, max_candidates=max_candidates, stats=stats)
    return level, pts, stats


def enumerate_up_to_height(S: PrimeSet, h: int, region: Region, *, executor: Executor | None = None,
                           max_candidates: int | None = None, min_denominator: int = 1) -> EnumerationReport:
    """Union of ``enumerate_level`` over every level with prod p^k_p <= h.

    Levels with denominator below ``min_denominator`` are skipped (used to
    extend a search incrementally). Output order is (level, entries).
    """
    if h < 1:
        raise DomainError("height bound must be >= 1")
    t0 = time.perf_counter()
    primes = S.resolve(h)
    levels = [
        lv for lv in level_indices(primes, h)
        if math.prod(p**k for p, k in zip(primes, lv)) >= min_denominator
    ]
    jobs = [(S, lv, region, primes, max_candidates) for lv in levels]
    results = executor.map(_level_job, jobs) if executor else map(_level_job, jobs)
    points, counts, stats = [], {}, {}
    for lv, pts, st in results:
        points.extend(pts)
        counts[lv] = len(pts)
        for key, val in st.items():
            stats[key] = stats.get(key, 0) + val
    points.sort()
    return EnumerationReport(points, counts, primes, time.perf_counter() - t0, stats)


def count_ball(x, delta: float, h: int, S: PrimeSet, metric=LOG_METRIC, **kw) -> int:
    """N_S(x, delta, h), closed on both constraints."""
    region = Region.metric_ball(x, delta, metric)
    return len(enumerate_up_to_height(S, h, region, **kw).points)


@dataclass
class MinHeightResult:
    height: int
    argmin: list[GroupPoint]
    searched_up_to: int


def min_height(x, delta: float, S: PrimeSet, h_cap: int, metric=LOG_METRIC, **kw) -> MinHeightResult:
    """Least height of a point within ``delta`` of ``x``, searching h = 1, 2, 4, ...

    Each step enumerates only the new levels, so the union of all steps is an
    exhaustive search below the returned height.
    """
    region = Region.metric_ball(x, delta, metric)
    done = 0
    h = 1
    while True:
        h = min(h, h_cap)
        rep = enumerate_up_to_height(S, h, region, min_denominator=done + 1, **kw)
        if rep.points:
            best = min(pt.height for pt in rep.points)
            return MinHeightResult(best, [pt for pt in rep.points if pt.height == best], h)
        done = h
        if h >= h_cap:
            raise NotFound(h_cap)
        h *= 2


def points_csv(report: EnumerationReport, region: Region) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = region.n
    w.writerow(
        [f"k_{p}" for p in report.primes]
        + [f"m{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        + ["D", "height", "distance"]
    )
    if report.points:
        arr = np.array([pt.to_float() for pt in report.points])
        dist = region.distances(arr)
    for i, pt in enumerate(report.points):
        w.writerow(list(pt.level) + list(pt.entries) + [pt.denom, pt.height, repr(float(dist[i]))])
    return buf.getvalue()
