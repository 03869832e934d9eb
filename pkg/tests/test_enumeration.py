import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from dioph_count.archimedean import ArchBallSpec, MetricSpec, distance, from_coords
from dioph_count.config import parse_center
from dioph_count.enumeration import (
    Region,
    count_ball,
    enumerate_level,
    enumerate_up_to_height,
    min_height,
    points_csv,
)
from dioph_count.errors import DomainError, OutOfDomain, NotFound, ResourceGuardError
from dioph_count.exact import PrimeSet, QMatrix, height, is_member

GENERIC = parse_center("generic")


def s_integers(primes, h):
    out = [1]
    for p in primes:
        out = [q * p**k for q in out for k in range(int(math.log(h, p)) + 2) if q * p**k <= h]
    return sorted(out)


def brute_ball(x, delta, h, primes):
    """Independent oracle: scan integer matrices over each candidate denominator,
    keep exact rationals of height <= h within delta, dedupe as a set."""
    x = np.asarray(x, float)
    spec = ArchBallSpec(x, delta)
    lo, hi = spec.entry_box()
    found = set()
    for q in s_integers(primes, h):
        rng = [range(math.floor(lo.flat[i] * q) - 1, math.ceil(hi.flat[i] * q) + 2) for i in range(3)]
        for a, b, c in itertools.product(*rng):
            if a == 0:
                continue
            num = q * q + b * c
            if num % a:
                continue
            d = num // a
            m = QMatrix([[Fraction(a, q), Fraction(b, q)], [Fraction(c, q), Fraction(d, q)]])
            if m.det() != 1 or height(m) > h or not is_member(m, PrimeSet.of(primes)):
                continue
            try:
                if distance(x, m.to_float()) <= delta:
                    found.add(m)
            except OutOfDomain:
                pass
    return found


def report_set(rep):
    return {pt.matrix for pt in rep.points}


@pytest.mark.parametrize(
    "center,delta,h,primes",
    [
        ("identity", 0.3, 12, (2, 3)),
        ("generic", 0.4, 16, (2,)),
        ("identity", 0.5, 9, (3,)),
        ("generic", 0.6, 10, (2, 5)),
    ],
)
def test_matches_brute_force(center, delta, h, primes):
    x = parse_center(center)
    rep = enumerate_up_to_height(PrimeSet.of(primes), h, Region.metric_ball(x, delta))
    assert report_set(rep) == brute_ball(x, delta, h, primes)
    assert len(set(rep.points)) == len(rep.points)


def test_sl2z_box_at_height_one():
    brute = sum(
        1 for e in itertools.product((-1, 0, 1), repeat=4) if e[0] * e[3] - e[1] * e[2] == 1
    )
    for S in (PrimeSet.of([2]), PrimeSet.of([3, 5]), PrimeSet.parse("all")):
        rep = enumerate_up_to_height(S, 1, Region.entry_box(1))
        assert len(rep.points) == brute == 20


def test_sl3z_box_at_height_one():
    brute = sum(
        1 for e in itertools.product((-1, 0, 1), repeat=9)
        if round(np.linalg.det(np.array(e).reshape(3, 3))) == 1
    )
    rep = enumerate_up_to_height(PrimeSet.of([2]), 1, Region.entry_box(1, n=3))
    assert len(rep.points) == brute


def test_postconditions():
    S = PrimeSet.of([2, 3])
    region = Region.metric_ball(GENERIC, 0.4)
    rep = enumerate_up_to_height(S, 48, region)
    assert rep.points
    for pt in rep.points:
        m = pt.matrix
        assert m.det() == 1
        assert height(m) == pt.height <= 48
        assert is_member(m, S)
    assert np.all(region.distances(np.array([pt.to_float() for pt in rep.points])) <= 0.4)
    assert sum(rep.per_level_counts.values()) == len(rep.points)
    assert rep.points == sorted(rep.points)


def test_identity_small_ball():
    assert count_ball(np.eye(2), 0.1, 1, PrimeSet.of([2])) == 1
    assert count_ball(np.eye(2), 0.1, 1000, PrimeSet.of([2])) >= 1


@given(delta=st.floats(0.05, 0.5), h=st.integers(1, 40))
@settings(max_examples=15, deadline=None)
def test_monotone_in_height_and_radius(delta, h):
    S = PrimeSet.of([2, 3])
    n = count_ball(GENERIC, delta, h, S)
    assert count_ball(GENERIC, delta, h + 3, S) >= n
    assert count_ball(GENERIC, min(delta * 1.3, 0.9), h, S) >= n


@given(seed=st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_integral_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    g0 = np.array([[1, int(rng.integers(-2, 3))], [0, 1]]) @ np.array([[1, 0], [int(rng.integers(-2, 3)), 1]])
    S = PrimeSet.of([2])
    a = count_ball(GENERIC, 0.3, 24, S)
    b = count_ball(g0 @ GENERIC, 0.3, 24, S)
    assert a == b


def test_count_at_height_one_independent_of_s():
    vals = {count_ball(GENERIC, 0.8, 1, PrimeSet.of(ps)) for ps in ([2], [3], [2, 3, 5])}
    assert len(vals) == 1


def test_refined_metric_contains_log_ball():
    S = PrimeSet.of([2])
    a = enumerate_up_to_height(S, 8, Region.metric_ball(GENERIC, 0.3))
    b = enumerate_up_to_height(S, 8, Region.metric_ball(GENERIC, 0.3, MetricSpec("refined", 2)))
    assert set(a.points) <= set(b.points)


def test_box_is_sound():
    rng = np.random.default_rng(0)
    for center in (np.eye(2), GENERIC):
        spec = ArchBallSpec(center, 0.5)
        lo, hi = spec.entry_box()
        for _ in range(2000):
            X = from_coords(rng.standard_normal(3), 2)
            X *= 0.5 * rng.random() / np.linalg.norm(X)
            y = center @ expm(X)
            assert np.all(y >= lo - 1e-12) and np.all(y <= hi + 1e-12)


def test_enumerate_level_checks():
    S = PrimeSet.of([2, 3])
    region = Region.metric_ball(np.eye(2), 0.3)
    with pytest.raises(DomainError):
        enumerate_level(S, (1,), region)
    with pytest.raises(DomainError):
        enumerate_level(S, (1, -1), region)
    with pytest.raises(DomainError):
        enumerate_level(S, (1, 0), region, n=3)
    pts = enumerate_level(S, (2, 1), region)
    assert all(pt.denom == 12 and pt.level == (2, 1) for pt in pts)


def test_resource_guard():
    with pytest.raises(ResourceGuardError):
        enumerate_up_to_height(PrimeSet.of([2]), 1024, Region.entry_box(50), max_candidates=1000)


def test_min_height():
    S = PrimeSet.of([2, 3])
    assert min_height(np.eye(2), 0.05, S, 64).height == 1
    res = min_height(GENERIC, 0.1, S, 1 << 12)
    brute = brute_ball(GENERIC, 0.1, res.height, (2, 3))
    assert min(height(m) for m in brute) == res.height
    assert not any(height(m) < res.height for m in brute_ball(GENERIC, 0.1, res.height - 1, (2, 3)))
    assert {pt.matrix for pt in res.argmin} == {m for m in brute if height(m) == res.height}


def test_min_height_not_found():
    with pytest.raises(NotFound) as err:
        min_height(GENERIC, 0.02, PrimeSet.of([2]), 4)
    assert err.value.h_cap == 4


def test_n3_smoke():
    S = PrimeSet.of([2])
    rep = enumerate_up_to_height(S, 2, Region.metric_ball(np.eye(3), 0.5))
    mats = {pt.matrix for pt in rep.points}
    assert QMatrix.identity(3) in mats
    for m in mats:
        assert m.det() == 1 and height(m) <= 2
        assert distance(np.eye(3), m.to_float()) <= 0.5


def test_points_csv():
    region = Region.metric_ball(np.eye(2), 0.3)
    rep = enumerate_up_to_height(PrimeSet.of([2]), 4, region)
    lines = points_csv(rep, region).strip().split("\n")
    assert lines[0] == "k_2,m11,m12,m21,m22,D,height,distance"
    assert len(lines) == len(rep.points) + 1


def test_report_json_and_counts():
    rep = enumerate_up_to_height(PrimeSet.of([2]), 16, Region.metric_ball(GENERIC, 0.5))
    data = rep.to_json()
    assert len(data["points"]) == len(rep.points)
    assert rep.count_up_to(16) == len(rep.points)
    assert rep.count_up_to(4) == sum(1 for h in rep.heights() if h <= 4)
