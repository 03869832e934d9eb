"""Exact rational matrices, p-adic norms and the finite-adelic height.

Rationals are :class:`fractions.Fraction`, which already keeps values in
lowest terms with a positive denominator.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

from .errors import DomainError, InvariantViolation

Rational = Fraction

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, certified for n < 2**64."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    if n >= 1 << 64:
        raise DomainError(f"primality of {n} not certified above 2**64")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(n) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i, flag in enumerate(sieve) if flag]


def factor_over(n: int, primes: Iterable[int]) -> tuple[dict[int, int], int]:
    """Split ``n`` into exponents over ``primes`` and the leftover cofactor."""
    n = abs(n)
    exps = {}
    for p in primes:
        k = 0
        while n % p == 0:
            n //= p
            k += 1
        if k:
            exps[p] = k
    return exps, n


def _prime_factors(n: int) -> list[int]:
    n = abs(n)
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    return out


@dataclass(frozen=True)
class PrimeSet:
    """A finite set of primes, or the flag for all primes."""

    primes: tuple[int, ...] = ()
    all_primes: bool = False

    def __post_init__(self):
        primes = tuple(int(p) for p in self.primes)
        if not self.all_primes:
            if not primes:
                raise DomainError("prime set must be non-empty")
            if any(b <= a for a, b in zip(primes, primes[1:])):
                raise DomainError(f"primes must be strictly increasing: {primes}")
            for p in primes:
                if not is_prime(p):
                    raise DomainError(f"{p} is not prime")
        object.__setattr__(self, "primes", primes)

    @classmethod
    def of(cls, primes: Iterable[int]) -> "PrimeSet":
        return cls(tuple(sorted(set(int(p) for p in primes))))

    @classmethod
    def parse(cls, text: str) -> "PrimeSet":
        """Parse ``"2,3"`` or ``"all"``."""
        text = text.strip()
        if text.lower() in ("all", "p"):
            return cls(all_primes=True)
        try:
            return cls.of(int(t) for t in text.split(",") if t.strip())
        except ValueError as exc:
            raise DomainError(f"bad prime set {text!r}: {exc}") from None

    def resolve(self, h: int) -> tuple[int, ...]:
        """The primes that can carry a positive level inside height ``h``."""
        if self.all_primes:
            return tuple(primes_up_to(h))
        return self.primes

    def contains(self, p: int) -> bool:
        return self.all_primes or p in self.primes

    def to_json(self):
        return "all" if self.all_primes else list(self.primes)

    def __str__(self):
        return "all" if self.all_primes else ",".join(map(str, self.primes))


class QMatrix:
    """Immutable square matrix with Fraction entries."""

    __slots__ = ("n", "rows", "_hash")

    def __init__(self, rows: Sequence[Sequence]):
        n = len(rows)
        if n < 1 or any(len(r) != n for r in rows):
            raise DomainError("matrix must be square")
        self.n = n
        self.rows = tuple(tuple(Fraction(x) for x in r) for r in rows)
        self._hash = None

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def from_scaled(cls, entries: Sequence[int], denom: int, n: int) -> "QMatrix":
        return cls([[Fraction(entries[i * n + j], denom) for j in range(n)] for i in range(n)])

    def entries(self):
        for r in self.rows:
            yield from r

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, QMatrix) and self.rows == other.rows

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.rows)
        return self._hash

    def __repr__(self):
        return f"QMatrix({[[str(x) for x in r] for r in self.rows]})"

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        if self.n != other.n:
            raise DomainError("dimension mismatch")
        cols = list(zip(*other.rows))
        return QMatrix([[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows])

    def scale(self, c) -> "QMatrix":
        c = Fraction(c)
        return QMatrix([[c * x for x in r] for r in self.rows])

    def det(self) -> Fraction:
        a = [list(r) for r in self.rows]
        n = self.n
        det = Fraction(1)
        for col in range(n):
            piv = next((i for i in range(col, n) if a[i][col] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != col:
                a[col], a[piv] = a[piv], a[col]
                det = -det
            det *= a[col][col]
            for i in range(col + 1, n):
                f = a[i][col] / a[col][col]
                if f:
                    for j in range(col, n):
                        a[i][j] -= f * a[col][j]
        return det

    def inverse(self) -> "QMatrix":
        n = self.n
        a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.rows)]
        for col in range(n):
            piv = next((i for i in range(col, n) if a[i][col] != 0), None)
            if piv is None:
                raise DomainError("singular matrix")
            a[col], a[piv] = a[piv], a[col]
            pv = a[col][col]
            a[col] = [x / pv for x in a[col]]
            for i in range(n):
                if i != col and a[i][col]:
                    f = a[i][col]
                    a[i] = [x - f * y for x, y in zip(a[i], a[col])]
        return QMatrix([r[n:] for r in a])

    def to_float(self):
        import numpy as np

        return np.array([[float(x) for x in r] for r in self.rows])

    def to_json(self) -> list[list[str]]:
        return [[f"{x.numerator}/{x.denominator}" for x in r] for r in self.rows]

    @classmethod
    def from_json(cls, data) -> "QMatrix":
        if isinstance(data, str):
            data = json.loads(data)
        return cls([[Fraction(x) for x in r] for r in data])


def padic_valuation(q, p: int) -> int:
    q = Fraction(q)
    if q == 0:
        raise DomainError("valuation of zero is undefined")
    v = 0
    num, den = q.numerator, q.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def padic_norm(m: QMatrix, p: int) -> Fraction:
    """Maximum p-adic absolute value over the entries (0 for the zero matrix)."""
    vals = [padic_valuation(x, p) for x in m.entries() if x != 0]
    if not vals:
        return Fraction(0)
    return Fraction(p) ** (-min(vals))


def denominator_lcm(m: QMatrix) -> int:
    return reduce(math.lcm, (x.denominator for x in m.entries()), 1)


def height(m: QMatrix) -> int:
    """Product over primes of max(1, ||m||_p).

    Only primes dividing some reduced denominator contribute.
    """
    primes = set()
    for x in m.entries():
        primes.update(_prime_factors(x.denominator))
    h = Fraction(1)
    for p in sorted(primes):
        h *= max(Fraction(1), padic_norm(m, p))
    if h.denominator != 1:
        raise InvariantViolation("height must be an integer")
    return h.numerator


def is_member(m: QMatrix, S: PrimeSet) -> bool:
    if m.det() != 1:
        return False
    if S.all_primes:
        return True
    for x in m.entries():
        _, rest = factor_over(x.denominator, S.primes)
        if rest != 1:
            return False
    return True


@dataclass(frozen=True, order=True)
class GroupPoint:
    """An element of SL_n(Z[1/S]) stored as integer matrix ``entries / denom``.

    ``denom`` is the exact denominator: the lcm of the reduced entry
    denominators, which is also the height.
    """

    level: tuple[int, ...]
    entries: tuple[int, ...]
    denom: int = field(compare=False)
    n: int = field(compare=False)
    primes: tuple[int, ...] = field(compare=False)

    def __post_init__(self):
        n, D = self.n, self.denom
        if len(self.entries) != n * n:
            raise InvariantViolation("entry count does not match dimension")
        if _int_det(self.entries, n) != D**n:
            raise InvariantViolation(f"det != 1 for {self.entries}/{D}")
        g = reduce(math.gcd, self.entries, D)
        if g != 1:
            raise InvariantViolation(f"denominator {D} is not exact for {self.entries}")
        expected = 1
        for p, k in zip(self.primes, self.level):
            expected *= p**k
        if expected != D:
            raise InvariantViolation(f"level {self.level} does not match denominator {D}")

    @classmethod
    def from_matrix(cls, m: QMatrix, S: PrimeSet) -> "GroupPoint":
        if not is_member(m, S):
            raise DomainError("matrix is not in the S-arithmetic group")
        D = denominator_lcm(m)
        primes = S.resolve(D) if S.all_primes else S.primes
        exps, _ = factor_over(D, primes)
        ents = tuple(int(x * D) for x in m.entries())
        return cls(tuple(exps.get(p, 0) for p in primes), ents, D, m.n, tuple(primes))

    @property
    def height(self) -> int:
        return self.denom

    @property
    def levels(self) -> dict[int, int]:
        return dict(zip(self.primes, self.level))

    @property
    def matrix(self) -> QMatrix:
        return QMatrix.from_scaled(self.entries, self.denom, self.n)

    def to_float(self):
        import numpy as np

        return np.array(self.entries, dtype=float).reshape(self.n, self.n) / self.denom


def _int_det(e: Sequence[int], n: int) -> int:
    if n == 2:
        return e[0] * e[3] - e[1] * e[2]
    if n == 3:
        return (
            e[0] * (e[4] * e[8] - e[5] * e[7])
            - e[1] * (e[3] * e[8] - e[5] * e[6])
            + e[2] * (e[3] * e[7] - e[4] * e[6])
        )
    d = QMatrix.from_scaled(e, 1, n).det()
    return int(d)
