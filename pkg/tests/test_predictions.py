import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioph_count.errors import DomainError
from dioph_count.pipeline import rows_from_csv, rows_to_csv
from dioph_count.predictions import (
    ConstantsInput,
    ScanRow,
    covolume_fit,
    discrepancy,
    error_shape_fit,
    kappa_S,
    predicted_count,
    theorem_constants,
)

pos = st.floats(0.1, 10, allow_nan=False)


def synthetic_rows(V, scale=1.0, rel_err=None):
    rows = []
    for i, delta in enumerate((0.1, 0.2, 0.4)):
        for h in (16, 64, 256):
            v_arch = 4.2 * delta**3
            v_S = Fraction(2 * h * h - 1)
            N = v_arch * float(v_S) / V * scale
            if rel_err is not None:
                N *= 1 + rel_err(delta, h)
            rows.append(ScanRow("x", delta, h, N, v_arch, 0.0, v_S))
    return rows


def test_predicted_count():
    assert predicted_count(2.0, Fraction(3), 4.0) == 1.5
    with pytest.raises(DomainError):
        predicted_count(1.0, 1, 0)


def test_discrepancy_examples():
    assert discrepancy(10, 5.0, 2.0) == 0
    assert discrepancy(0, 1, 0.5) == 0.5
    with pytest.raises(DomainError):
        discrepancy(1, 0, 0.1)


def test_discrepancy_scaling():
    assert discrepancy(6, 3.0, 0) == discrepancy(12, 6.0, 0)
    # with nonzero measure the discrepancy is not scale invariant
    assert discrepancy(6, 3.0, 1.0) != discrepancy(12, 3.0, 1.0)


@pytest.mark.parametrize("V", [0.37, 1.0, 2.3137])
def test_covolume_exact_recovery(V):
    V_hat, resid = covolume_fit(synthetic_rows(V))
    assert V_hat == pytest.approx(V, rel=1e-14)
    assert max(abs(r) for r in resid) < 1e-12


def test_covolume_scaling():
    V_hat, _ = covolume_fit(synthetic_rows(1.5, scale=2.0))
    assert V_hat == pytest.approx(0.75, rel=1e-14)


def test_covolume_degenerate():
    rows = synthetic_rows(1.0)
    with pytest.raises(DomainError):
        covolume_fit(rows[:2])
    with pytest.raises(DomainError):
        covolume_fit([r for r in rows if r.h == 16])


@given(q=pos, d=pos, a=pos)
def test_kappa(q, d, a):
    assert kappa_S(q, d, a) * a == pytest.approx(q * d, rel=1e-15)
    assert kappa_S(2 * q, d, a) == pytest.approx(2 * kappa_S(q, d, a), rel=1e-15)


def test_kappa_examples():
    assert kappa_S(2, 3, 3) == 2
    with pytest.raises(DomainError):
        kappa_S(0, 3, 3)


def test_constants_examples():
    rep = theorem_constants(ConstantsInput(1, 4, 1, 1, 0.1, 0.9, 3))
    assert rep.A == pytest.approx(12 * math.sqrt(2), rel=1e-14)
    assert rep.c1 == pytest.approx(8 * 2 ** (1 / 3), rel=1e-14)
    assert rep.interval_empty
    tiny = theorem_constants(ConstantsInput(1, 4, 1, 1, 1e-9, 0.9, 3), 1e-12)
    assert tiny.c2_prime < 1e-30 and tiny.interval_empty


def test_constants_guards():
    with pytest.raises(DomainError):
        ConstantsInput(1, 2, 1, 1, 0.1, 0.9, 3)
    with pytest.raises(DomainError):
        ConstantsInput(-1, 4, 1, 1, 0.1, 0.9, 3)
    with pytest.raises(DomainError):
        theorem_constants(ConstantsInput(1, 4, 1, 1, 0.1, 0.9, 3), 0)


@given(M=pos, D=st.floats(2.5, 10), W=pos, V=pos, e=pos, d=st.integers(1, 8))
@settings(max_examples=60)
def test_constants_monotone(M, D, W, V, e, d):
    base = theorem_constants(ConstantsInput(M, D, W, V, e, 1.0, d))
    up = lambda **kw: theorem_constants(ConstantsInput(**{  # noqa: E731
        "M": M, "D": D, "mfW": W, "V": V, "eps0": e, "r0": 1.0, "d": d, **kw}))
    assert up(M=M * 1.1).A < base.A
    assert up(V=V * 1.1).A < base.A
    assert up(D=D * 1.1).c1 > base.c1
    assert up(V=V * 1.1).c1 > base.c1
    assert up(eps0=e * 1.1).c2_prime > base.c2_prime


def test_constants_json():
    inp = ConstantsInput(1, 4, 1, 1, 0.1, 0.9, 3)
    data = theorem_constants(inp).to_json(inp)
    assert data["input"]["D"] == 4 and data["report"]["interval_empty"] is True


def test_error_shape_recovers_slope():
    rows = synthetic_rows(1.0, rel_err=lambda d, h: 0.05 * d ** -0.75)
    for r in rows:
        r.V_used = 1.0
    fit = error_shape_fit(rows, 3)
    assert fit.slope_delta == pytest.approx(-0.75, abs=0.01)
    assert fit.slope_E == pytest.approx(0, abs=0.01)
    const = synthetic_rows(1.0, rel_err=lambda d, h: 0.02)
    for r in const:
        r.V_used = 1.0
    fit = error_shape_fit(const, 3)
    assert fit.slope_delta == pytest.approx(0, abs=1e-8)
    assert all(np.isfinite(fit.ci_delta))


def test_error_shape_degenerate():
    rows = synthetic_rows(1.0)
    for r in rows:
        r.V_used = 1.0
    with pytest.raises(DomainError):
        error_shape_fit(rows, 3)


def test_scan_row_csv_roundtrip():
    rows = synthetic_rows(2.0)
    for r in rows:
        r.N = int(round(r.N))
        r.V_used = 2.0
    text = rows_to_csv(rows, "abc", 7)
    header = text.split("\n")[0].split(",")
    assert header[:12] == [
        "x_id", "delta", "h", "N", "v_arch", "v_arch_stderr", "v_S_num", "v_S_den",
        "V_used", "prediction", "ratio", "discrepancy",
    ]
    assert header[12:] == ["config_hash", "seed"]
    back = rows_from_csv(text)
    assert [r.as_record() for r in back] == [r.as_record() for r in rows]
