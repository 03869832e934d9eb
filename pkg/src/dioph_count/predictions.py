"""Main-term predictions, discrepancy, fits and the explicit error constants."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError

SCAN_COLUMNS = (
    "x_id", "delta", "h", "N", "v_arch", "v_arch_stderr", "v_S_num", "v_S_den",
    "V_used", "prediction", "ratio", "discrepancy",
)


@dataclass
class ScanRow:
    x_id: str
    delta: float
    h: int
    N: int
    v_arch: float
    v_arch_stderr: float
    v_S: Fraction
    V_used: float | None = None

    @property
    def prediction(self) -> float | None:
        if self.V_used is None:
            return None
        return predicted_count(self.v_arch, self.v_S, self.V_used)

    @property
    def ratio(self) -> float | None:
        pred = self.prediction
        return None if pred is None else self.N / pred

    @property
    def discrepancy(self) -> float | None:
        if self.V_used is None:
            return None
        return discrepancy(self.N, float(self.v_S), self.v_arch / self.V_used)

    def as_record(self) -> dict:
        return {
            "x_id": self.x_id,
            "delta": self.delta,
            "h": self.h,
            "N": self.N,
            "v_arch": self.v_arch,
            "v_arch_stderr": self.v_arch_stderr,
            "v_S_num": self.v_S.numerator,
            "v_S_den": self.v_S.denominator,
            "V_used": self.V_used,
            "prediction": self.prediction,
            "ratio": self.ratio,
            "discrepancy": self.discrepancy,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ScanRow":
        V = rec.get("V_used")
        return cls(
            x_id=rec["x_id"],
            delta=float(rec["delta"]),
            h=int(rec["h"]),
            N=int(rec["N"]),
            v_arch=float(rec["v_arch"]),
            v_arch_stderr=float(rec["v_arch_stderr"]),
            v_S=Fraction(int(rec["v_S_num"]), int(rec["v_S_den"])),
            V_used=float(V) if V not in (None, "") else None,
        )


def predicted_count(v_arch: float, v_S, V: float) -> float:
    """m_inf(B) m_S(B_S(h)) with m_inf rescaled so the lattice has covolume one."""
    if V <= 0:
        raise DomainError(f"covolume must be positive, got {V}")
    return v_arch * float(v_S) / V


def discrepancy(count: int, v_h: float, nu_omega: float) -> float:
    if v_h <= 0:
        raise DomainError("normalising volume must be positive")
    return abs(count / v_h - nu_omega)


def covolume_fit(rows) -> tuple[float, list[float]]:
    """Poisson-weighted least squares for the covolume V.

    Minimising sum (N - P/V)^2 / (P/V) over u = 1/V, with P = v_arch v_S, gives
    u^2 = sum(N^2 / P) / sum(P). Residuals are N / prediction - 1.
    """
    rows = list(rows)
    if len(rows) < 3 or len({r.h for r in rows}) < 2:
        raise DomainError("covolume fit needs >= 3 rows spanning distinct heights")
    P = np.array([r.v_arch * float(r.v_S) for r in rows])
    N = np.array([r.N for r in rows], dtype=float)
    if np.any(P <= 0) or not np.any(N > 0):
        raise DomainError("degenerate rows for covolume fit")
    u = math.sqrt(math.fsum(N * N / P) / math.fsum(P))
    V = 1.0 / u
    return V, [float(n / (p / V) - 1) for n, p in zip(N, P)]


def kappa_S(q: float, d: float, a: float) -> float:
    """Diophantine exponent threshold q d / a."""
    if q <= 0 or d <= 0 or a <= 0:
        raise DomainError("kappa_S needs positive inputs")
    return q * d / a


@dataclass(frozen=True)
class ConstantsInput:
    M: float
    D: float
    mfW: float
    V: float
    eps0: float
    r0: float
    d: float
    M_prime: float | None = None

    def __post_init__(self):
        for name in ("M", "D", "mfW", "V", "eps0", "r0", "d"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.D <= 2:
            raise DomainError("the regularity constant D must exceed 2")


@dataclass(frozen=True)
class ConstantsReport:
    A: float
    c1: float
    c2_prime: float
    c2: float
    E: float
    delta_lo: float
    delta_hi: float

    @property
    def interval_empty(self) -> bool:
        return not self.delta_lo < self.delta_hi

    def to_json(self, inp: ConstantsInput | None = None) -> dict:
        out = {"report": {**asdict(self), "interval_empty": self.interval_empty}}
        if inp is not None:
            out["input"] = asdict(inp)
        return out


def theorem_constants(inp: ConstantsInput, E: float = 1.0) -> ConstantsReport:
    """Error constant A and the admissible radius window [c1 E^(1/d), c2)."""
    if not 0 < E <= 1:
        raise DomainError("spectral bound E must lie in (0, 1]")
    M, D, W, V, d = inp.M, inp.D, inp.mfW, inp.V, inp.d
    A = 6 * M ** (-1 / (d + 1)) * D ** (d / (d + 1)) * W ** (-1 / (d + 1)) * V ** (-d / (d + 1))
    c1 = 2 ** ((d + 1) / d) * D * M ** (-1 / d) * W ** (-1 / d) * V ** (1 / d)
    c2p = 2 ** (-(d + 1)) * M * D * W * V * inp.eps0 ** (d + 1)
    c2 = min(c2p, inp.r0 / 2)
    return ConstantsReport(A, c1, c2p, c2, E, c1 * E ** (1 / d), c2)


@dataclass
class ErrorShapeFit:
    slope_delta: float
    slope_E: float
    ci_delta: tuple[float, float]
    ci_E: tuple[float, float]
    rows_used: int


def error_shape_fit(rows, d: int) -> ErrorShapeFit:
    """Regress log|N/prediction - 1| on log delta and log m_S(B_S(h)).

    Diagnostic only. The theoretical shape is delta^(-d/(d+1)) times a negative
    power of the height-ball volume; ``d`` is echoed for callers comparing the
    slope with -d/(d+1). Rows with an exact match are dropped.
    """
    rows = [r for r in rows if r.prediction is not None]
    rel = np.array([abs(r.N / r.prediction - 1) for r in rows])
    keep = rel > 0
    if keep.sum() < 2:
        raise DomainError("error-shape fit needs rows with nonzero relative error")
    y = np.log(rel[keep])
    ld = np.log([r.delta for r, k in zip(rows, keep) if k])
    lv = np.log([float(r.v_S) for r, k in zip(rows, keep) if k])
    cols = [np.ones_like(y)]
    use_d = np.ptp(ld) > 0
    use_v = np.ptp(lv) > 0
    if use_d:
        cols.append(ld)
    if use_v:
        cols.append(lv)
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(y) - X.shape[1]
    resid = y - X @ coef
    if dof > 0:
        sigma2 = float(resid @ resid) / dof
        se = np.sqrt(np.diag(sigma2 * np.linalg.pinv(X.T @ X)))
    else:
        se = np.full(X.shape[1], np.nan)
    i = 1
    out = {}
    for name, used in (("delta", use_d), ("E", use_v)):
        if used:
            out[name] = (float(coef[i]), float(se[i]))
            i += 1
        else:
            out[name] = (0.0, float("nan"))
    (sd, sed), (sv, sev) = out["delta"], out["E"]
    return ErrorShapeFit(sd, sv, (sd - 1.96 * sed, sd + 1.96 * sed), (sv - 1.96 * sev, sv + 1.96 * sev), int(keep.sum()))
