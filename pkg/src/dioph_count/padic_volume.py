"""Haar volumes of p-adic and S-adic height balls in SL_2.

Haar measure on SL_2(Q_p) gives SL_2(Z_p) volume 1, so the volume of a
right-SL_2(Z_p)-invariant set is its number of left cosets g SL_2(Z_p).
Cosets correspond to unimodular lattices g Z_p^2, i.e. to the vertices of the
Bruhat-Tits tree at even distance from the standard vertex.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, ResourceGuardError
from .exact import PrimeSet, is_prime

K_MAX = 12
# BFS is ground truth only while the tree ball stays this small.
ORACLE_VERTEX_BUDGET = 400_000


def _check(p: int, k: int, n: int):
    if n != 2:
        raise NotImplementedError(f"local volumes are implemented for n = 2 only (got n = {n})")
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if k < 0:
        raise DomainError("level must be >= 0")


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _hermite(a: int, b: int, c: int, d: int) -> tuple[int, int, int]:
    """Row Hermite form [[x, y], [0, z]] (x, z > 0, 0 <= y < z) of rows (a, b), (c, d)."""
    g, s, t = _xgcd(a, c)
    z = abs(a * d - b * c) // g
    return g, (s * b + t * d) % z, z


def _class_rep(a, b, c, d, p):
    """Canonical Hermite form of the homothety class: not contained in p Z^2."""
    x, y, z = _hermite(a, b, c, d)
    while x % p == 0 and y % p == 0 and z % p == 0:
        x, y, z = x // p, y // p, z // p
    return x, y, z


def _neighbours(rep, p):
    """Classes of the p + 1 index-p sublattices of the lattice with rows (x, y), (0, z)."""
    x, y, z = rep
    yield _class_rep(x, y, 0, p * z, p)
    for j in range(p):
        yield _class_rep(p * x, p * y, -j * x, z - j * y, p)


def tree_ball(p: int, radius: int) -> list[list[tuple[int, int, int]]]:
    """Breadth-first layers of the Bruhat-Tits tree of SL_2(Q_p) up to ``radius``."""
    base = (1, 0, 1)
    layers = [[base]]
    seen = {base}
    for _ in range(radius):
        nxt = []
        for v in layers[-1]:
            for w in _neighbours(v, p):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        layers.append(nxt)
    return layers


def local_ball_volume_oracle(p: int, k: int, n: int = 2, k_max: int = K_MAX) -> Fraction:
    """Count cosets g SL_2(Z_p) with ||g||_p <= p^k by walking the tree.

    A class at even distance 2a with primitive Hermite rep H gives the
    coset of g = p^(-a) H, which has determinant 1 and
    ||g||_p = p^(a - min v_p(H_ij)).
    """
    _check(p, k, n)
    if k > k_max:
        raise ResourceGuardError(f"level {k} exceeds k_max = {k_max}")
    count = 0
    for dist, layer in enumerate(tree_ball(p, 2 * k)):
        if dist % 2:
            continue
        a = dist // 2
        for x, y, z in layer:
            if x * z != p ** (2 * a):
                raise AssertionError(f"non-unimodular coset rep {(x, y, z)}")
            vmin = min(_val(x, p), _val(z, p), _val(y, p) if y else 2 * a)
            if a - vmin <= k:
                count += 1
    return Fraction(count)


def _val(m: int, p: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def local_ball_volume_closed_form(p: int, k: int, n: int = 2) -> Fraction:
    """(p^(2k+1) - 1) / (p - 1).

    Cartan cells K diag(p^-a, p^a) K have p^(2a-1) (p + 1) cosets for a >= 1,
    and 1 + sum_{a=1..k} (p + 1) p^(2a-1) telescopes to the expression above.
    """
    _check(p, k, n)
    return Fraction(p ** (2 * k + 1) - 1, p - 1)


def oracle_affordable(p: int, k: int, k_max: int = K_MAX) -> bool:
    return k <= k_max and (p ** (2 * k + 1) - 1) // (p - 1) <= ORACLE_VERTEX_BUDGET


def local_ball_volume(p: int, k: int, n: int = 2, prefer: str = "closed_form") -> tuple[Fraction, str]:
    """Local ball volume with its provenance (``oracle`` or ``closed_form``)."""
    if prefer == "oracle" and oracle_affordable(p, k):
        return local_ball_volume_oracle(p, k, n), "oracle"
    return local_ball_volume_closed_form(p, k, n), "closed_form"


def local_sphere_volume(p: int, k: int, n: int = 2) -> Fraction:
    if k == 0:
        return local_ball_volume_closed_form(p, 0, n)
    return local_ball_volume_closed_form(p, k, n) - local_ball_volume_closed_form(p, k - 1, n)


@dataclass(frozen=True)
class HeightBallSpec:
    S: PrimeSet
    h: int

    def __post_init__(self):
        if int(self.h) != self.h or self.h < 1:
            raise DomainError(f"height bound must be a positive integer, got {self.h}")


@dataclass
class VolumeTable:
    """Per-prime ball volumes v_p(k) and sphere volumes s_p(k)."""

    balls: dict[int, list[Fraction]] = field(default_factory=dict)
    provenance: dict[int, list[str]] = field(default_factory=dict)

    @classmethod
    def build(cls, primes, k_top: dict[int, int] | int, prefer: str = "closed_form") -> "VolumeTable":
        table = cls()
        for p in primes:
            top = k_top if isinstance(k_top, int) else k_top[p]
            vals = [local_ball_volume(p, k, prefer=prefer) for k in range(top + 1)]
            table.balls[p] = [v for v, _ in vals]
            table.provenance[p] = [src for _, src in vals]
            table.validate(p)
        return table

    def validate(self, p):
        v = self.balls[p]
        if v[0] != 1:
            raise AssertionError(f"v_{p}(0) = {v[0]} breaks the normalisation")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise AssertionError(f"v_{p} is not strictly increasing")

    def ball(self, p: int, k: int) -> Fraction:
        return self.balls[p][k]

    def sphere(self, p: int, k: int) -> Fraction:
        v = self.balls[p]
        return v[0] if k == 0 else v[k] - v[k - 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "k", "v", "s", "provenance"])
        for p in sorted(self.balls):
            for k, v in enumerate(self.balls[p]):
                w.writerow([p, k, str(v), str(self.sphere(p, k)), self.provenance[p][k]])
        return buf.getvalue()


def max_level(p: int, h: int) -> int:
    k = 0
    while p ** (k + 1) <= h:
        k += 1
    return k


def level_indices(primes, h: int):
    """All exponent tuples (k_p) with prod p^k_p <= h, depth first."""
    primes = tuple(primes)

    def rec(i, rest):
        if i == len(primes):
            yield ()
            return
        p, pk, k = primes[i], 1, 0
        while pk <= rest:
            for tail in rec(i + 1, rest // pk):
                yield (k,) + tail
            pk *= p
            k += 1

    yield from rec(0, h)


def global_height_ball_volume(spec: HeightBallSpec, table: VolumeTable | None = None) -> Fraction:
    """m_S(B_S(h)) = sum over (k_p) with prod p^k_p <= h of prod s_p(k_p)."""
    primes = spec.S.resolve(spec.h)
    if table is None:
        table = VolumeTable.build(primes, {p: max_level(p, spec.h) for p in primes})
    total = Fraction(0)

    def rec(i, rest, acc):
        nonlocal total
        if i == len(primes):
            total += acc
            return
        p, pk, k = primes[i], 1, 0
        while pk <= rest:
            rec(i + 1, rest // pk, acc * table.sphere(p, k))
            pk *= p
            k += 1

    rec(0, spec.h, Fraction(1))
    return total


def global_volume_json(spec: HeightBallSpec, volume: Fraction) -> dict:
    return {
        "S": spec.S.to_json(),
        "h": spec.h,
        "volume_num": volume.numerator,
        "volume_den": volume.denominator,
    }


def growth_fit(S: PrimeSet, h_grid, volume_fn=None) -> tuple[float, float]:
    """Least-squares slope of log m_S(B_S(h)) against log h, with R^2.

    ``volume_fn(h)`` overrides the height-ball volume (used for sanity checks).
    A grid of at least four heights spanning two decades is recommended.
    """
    hs = sorted(set(int(h) for h in h_grid))
    if len(hs) < 2:
        raise DomainError("growth fit needs at least two distinct heights")
    if volume_fn is None:
        volume_fn = lambda h: global_height_ball_volume(HeightBallSpec(S, h))  # noqa: E731
    x = np.log(np.array(hs, dtype=float))
    y = np.log(np.array([float(volume_fn(h)) for h in hs]))
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return float(slope), r2
