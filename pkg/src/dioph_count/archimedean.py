"""Left-invariant geometry of SL_n(R) under the Frobenius inner product.

Tangent vectors at the identity are trace-zero matrices; ``sl_basis`` gives an
orthonormal basis, so Frobenius norms equal Euclidean norms of coordinates.
"""
from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import minimize
from scipy.special import gammaln

from .errors import DomainError, OutOfDomain

R_MAX = 0.9
DET_TOL = 1e-10
SHARD_SIZE = 1 << 18


@dataclass(frozen=True)
class MetricSpec:
    mode: str = "log"
    k: int = 1

    def __post_init__(self):
        if self.mode not in ("log", "refined"):
            raise DomainError(f"unknown metric mode {self.mode!r}")
        if self.k < 1:
            raise DomainError("refined metric needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        # "log", "refined", "refined:4"
        mode, _, k = text.partition(":")
        return cls(mode, int(k) if k else (1 if mode == "log" else 2))

    def __str__(self):
        return "log" if self.mode == "log" else f"refined:{self.k}"


LOG_METRIC = MetricSpec()


def as_group_element(x, det_tol: float = DET_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] < 2:
        raise DomainError(f"expected a square matrix, got shape {x.shape}")
    if abs(np.linalg.det(x) - 1.0) > det_tol:
        raise DomainError(f"det = {np.linalg.det(x)!r} is not 1 within {det_tol}")
    return x


@dataclass(frozen=True)
class ArchBallSpec:
    center: np.ndarray
    radius: float
    metric: MetricSpec = LOG_METRIC
    r_max: float = R_MAX

    def __post_init__(self):
        object.__setattr__(self, "center", as_group_element(self.center))
        if not 0 < self.radius <= self.r_max:
            raise DomainError(f"radius {self.radius} outside (0, {self.r_max}]")

    def entry_box(self):
        """Per-entry bounds [lo, hi] containing every ball member.

        If y = x exp(X) with |X|_F <= r then |y - x|_op <= |x|_op (e^r - 1).
        """
        slack = np.linalg.norm(self.center, 2) * math.expm1(self.radius)
        slack = slack * (1 + 1e-9) + 1e-12
        return self.center - slack, self.center + slack


def sl_basis(n: int) -> np.ndarray:
    """Orthonormal basis of trace-zero n x n matrices, shape (n*n - 1, n, n)."""
    return _sl_basis(n).copy()


@lru_cache(maxsize=None)
def _sl_basis(n: int) -> np.ndarray:
    basis = []
    for k in range(1, n):
        # diagonal part: Gram-Schmidt on e_k - mean
        v = np.zeros(n)
        v[:k] = 1.0
        v[k] = -k
        basis.append(np.diag(v / np.linalg.norm(v)))
    for i in range(n):
        for j in range(i + 1, n):
            s = np.zeros((n, n))
            s[i, j] = s[j, i] = 1 / math.sqrt(2)
            a = np.zeros((n, n))
            a[i, j], a[j, i] = 1 / math.sqrt(2), -1 / math.sqrt(2)
            basis += [s, a]
    out = np.array(basis)
    out.flags.writeable = False
    return out


def from_coords(c, n: int) -> np.ndarray:
    return np.tensordot(np.asarray(c), _sl_basis(n), axes=(-1, 0))


def to_coords(X) -> np.ndarray:
    X = np.asarray(X)
    return np.tensordot(X, _sl_basis(X.shape[-1]), axes=([-2, -1], [1, 2]))


def _project_trace_zero(X):
    n = X.shape[-1]
    return X - np.trace(X, axis1=-2, axis2=-1)[..., None, None] / n * np.eye(n)


def _log_2x2(Y) -> np.ndarray:
    """Closed-form principal log for a batch of 2 x 2 matrices (det ~ 1).

    Returns NaN matrices where the real principal log does not exist.
    """
    Y = np.asarray(Y, dtype=float)
    det = Y[..., 0, 0] * Y[..., 1, 1] - Y[..., 0, 1] * Y[..., 1, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        Y = Y / np.sqrt(det)[..., None, None]
        t = 0.5 * (Y[..., 0, 0] + Y[..., 1, 1])
        s = np.arccosh(np.maximum(t, 1.0))
        phi = np.arccos(np.clip(t, -1.0, 1.0))
        hyper = np.where(s > 0, s / np.sinh(np.where(s > 0, s, 1.0)), 1.0)
        ellip = np.where(phi > 0, phi / np.sin(np.where(phi > 0, phi, 1.0)), 1.0)
        f = np.where(t >= 1.0, hyper, ellip)
        f = np.where((t > -1.0) & (det > 0), f, np.nan)
    return f[..., None, None] * (Y - t[..., None, None] * np.eye(2))


def principal_log(Y) -> np.ndarray:
    """Real principal logarithm, projected to trace zero.

    Raises OutOfDomain when Y has an eigenvalue on the closed negative real axis.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if n == 2:
        X = _log_2x2(Y)
        if np.isnan(X).any():
            raise OutOfDomain("matrix has no real principal logarithm")
        return X
    ev = np.linalg.eigvals(Y)
    if np.any((np.abs(ev.imag) <= 1e-12 * np.abs(ev)) & (ev.real <= 0)):
        raise OutOfDomain("eigenvalue on the closed negative real axis")
    X = logm(Y)
    if np.iscomplexobj(X):
        X = X.real
    return _project_trace_zero(X)


def log_norms(Y) -> np.ndarray:
    """Frobenius norms of principal logs for a batch; inf outside the domain."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] == 2:
        out = np.linalg.norm(_log_2x2(Y), axis=(-2, -1))
        return np.where(np.isnan(out), np.inf, out)
    out = np.empty(Y.shape[0])
    for i, y in enumerate(Y):
        try:
            out[i] = np.linalg.norm(principal_log(y))
        except OutOfDomain:
            out[i] = np.inf
    return out


def group_exp(X) -> np.ndarray:
    """Matrix exponential; closed form for 2 x 2 trace-zero input."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != 2:
        return expm(X)
    lam2 = X[..., 0, 0] ** 2 + X[..., 0, 1] * X[..., 1, 0]
    lam = np.sqrt(np.abs(lam2))
    safe = np.where(lam > 0, lam, 1.0)
    c = np.where(lam2 >= 0, np.cosh(safe), np.cos(safe))
    f = np.where(lam2 >= 0, np.sinh(safe) / safe, np.sin(safe) / safe)
    c = np.where(lam > 0, c, 1.0)
    f = np.where(lam > 0, f, 1.0)
    return c[..., None, None] * np.eye(2) + f[..., None, None] * X


def _path_length(z, Y, n, d) -> float:
    """Length of the path exp(X_1) ... exp(X_{k-1}) exp(X_k) = Y.

    ``z`` holds coordinates of X_1 .. X_{k-1}; X_k is implied by Y.
    """
    P = np.eye(n)
    total = 0.0
    for c in z.reshape(-1, d):
        total += float(np.linalg.norm(c))
        P = P @ group_exp(from_coords(c, n))
    try:
        return total + float(np.linalg.norm(principal_log(np.linalg.solve(P, Y))))
    except OutOfDomain:
        return np.inf


_R2 = 1 / math.sqrt(2)


def _exp2(c1, c2, c3):
    a, b, c = c1 * _R2, (c2 + c3) * _R2, (c2 - c3) * _R2
    lam2 = a * a + b * c
    if lam2 > 0:
        lam = math.sqrt(lam2)
        ch, f = math.cosh(lam), math.sinh(lam) / lam
    elif lam2 < 0:
        lam = math.sqrt(-lam2)
        ch, f = math.cos(lam), math.sin(lam) / lam
    else:
        ch, f = 1.0, 1.0
    return ch + f * a, f * b, f * c, ch - f * a


def _log_norm2(y00, y01, y10, y11):
    det = y00 * y11 - y01 * y10
    if det <= 0:
        return math.inf
    r = math.sqrt(det)
    y00, y01, y10, y11 = y00 / r, y01 / r, y10 / r, y11 / r
    t = 0.5 * (y00 + y11)
    if t <= -1.0:
        return math.inf
    if t > 1.0:
        s = math.acosh(t)
        f = s / math.sinh(s)
    elif t < 1.0:
        phi = math.acos(t)
        f = phi / math.sin(phi)
    else:
        f = 1.0
    return f * math.sqrt((y00 - t) ** 2 + (y11 - t) ** 2 + y01 * y01 + y10 * y10)


def _path_length_2x2(z, y00, y01, y10, y11) -> float:
    p00, p01, p10, p11 = 1.0, 0.0, 0.0, 1.0
    total = 0.0
    z = z.tolist()
    for i in range(0, len(z), 3):
        c1, c2, c3 = z[i], z[i + 1], z[i + 2]
        total += math.sqrt(c1 * c1 + c2 * c2 + c3 * c3)
        e00, e01, e10, e11 = _exp2(c1, c2, c3)
        p00, p01, p10, p11 = (p00 * e00 + p01 * e10, p00 * e01 + p01 * e11,
                              p10 * e00 + p11 * e10, p10 * e01 + p11 * e11)
    det = p00 * p11 - p01 * p10
    q00, q01, q10, q11 = p11 / det, -p01 / det, -p10 / det, p00 / det
    return total + _log_norm2(q00 * y00 + q01 * y10, q00 * y01 + q01 * y11,
                              q10 * y00 + q11 * y10, q10 * y01 + q11 * y11)


def _refine(Y, z0) -> tuple[float, np.ndarray]:
    n = Y.shape[0]
    d = n * n - 1
    if n == 2:
        fun, args = _path_length_2x2, tuple(Y.ravel().tolist())
    else:
        fun, args = _path_length, (Y, n, d)
    best = fun(z0, *args)
    res = minimize(fun, z0, args=args, method="BFGS", options={"maxiter": 100})
    if np.isfinite(res.fun) and res.fun < best:
        return float(res.fun), res.x
    return best, z0


def refined_distance(Y, k: int) -> tuple[float, np.ndarray]:
    """Shortest k-segment piecewise one-parameter-subgroup path from e to Y.

    Returns the length and the coordinates of all k segment generators. The
    search starts from the log geodesic and, for even k, also from the optimal
    k/2 path with every segment halved, so the value never increases with k.
    """
    Y = np.asarray(Y, dtype=float)
    L = to_coords(principal_log(Y))
    if k == 1:
        return float(np.linalg.norm(L)), L[None, :]
    d = L.size
    best, z = _refine(Y, np.tile(L / k, k - 1))
    if k % 2 == 0:
        half, segs = refined_distance(Y, k // 2)
        z_half = np.repeat(segs / 2, 2, axis=0)[:-1].ravel()
        cand, zc = _refine(Y, z_half)
        if cand < best:
            best, z = cand, zc
        if half < best:
            best, z = half, z_half
    segs = z.reshape(-1, d)
    P = np.eye(Y.shape[0])
    for c in segs:
        P = P @ group_exp(from_coords(c, Y.shape[0]))
    last = to_coords(principal_log(np.linalg.solve(P, Y)))
    return best, np.vstack([segs, last])


def distance(x, y, metric: MetricSpec = LOG_METRIC) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Y = np.linalg.solve(x, y)
    if metric.mode == "log" or metric.k == 1:
        return float(np.linalg.norm(principal_log(Y)))
    return refined_distance(Y, metric.k)[0]


def exp_jacobian(X) -> float | np.ndarray:
    """|det((1 - exp(-ad X)) / ad X)|, the Haar density in exponential coordinates.

    With ad X eigenvalues mu = l_i - l_j, conjugate pairs combine to
    prod_{i<j} |sinh(mu/2) / (mu/2)|^2. Accepts a batch of matrices.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    if n == 2:
        lam2 = X[..., 0, 0] ** 2 + X[..., 0, 1] * X[..., 1, 0]
        lam = np.sqrt(np.abs(lam2))
        safe = np.where(lam > 0, lam, 1.0)
        f = np.where(lam2 >= 0, np.sinh(safe) / safe, np.sin(safe) / safe)
        return np.where(lam > 0, f, 1.0) ** 2
    ev = np.linalg.eigvals(X)
    out = np.ones(ev.shape[:-1], dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            half = 0.5 * (ev[..., i] - ev[..., j])
            safe = np.where(half != 0, half, 1.0)
            out *= np.where(half != 0, np.sinh(safe) / safe, 1.0) ** 2
    return np.abs(out)


def unit_ball_volume(d: int) -> float:
    return math.exp(d / 2 * math.log(math.pi) - gammaln(d / 2 + 1))


def _mc_shard(args):
    n, delta, shard, size, seed = args
    d = n * n - 1
    rng = np.random.default_rng(seed + shard)
    direction = rng.standard_normal((size, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    u = (np.arange(size) + rng.random(size)) / size
    radius = delta * u ** (1.0 / d)
    X = from_coords(direction * radius[:, None], n)
    J = exp_jacobian(X)
    return float(np.sum(J)), float(np.sum(J * J)), size


def ball_volume_arch(
    delta: float,
    n: int = 2,
    samples: int = 1_000_000,
    seed: int = 0,
    metric: MetricSpec = LOG_METRIC,
    r_max: float = R_MAX,
    executor: Executor | None = None,
) -> tuple[float, float]:
    """Monte Carlo Haar volume of the log-metric ball of radius ``delta``.

    Shards of SHARD_SIZE samples use seed ``seed + shard``; within a shard the
    radial coordinate is stratified. The result does not depend on how shards
    are distributed across workers.

    Returns
    -------
    (estimate, std_error)
    """
    if not 0 < delta <= r_max:
        raise DomainError(f"delta {delta} outside (0, {r_max}]")
    if metric.mode != "log" and metric.k != 1:
        raise DomainError("volumes are only defined for the log metric ball")
    if samples < 2:
        raise DomainError("need at least two samples")
    sizes = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        sizes.append(samples % SHARD_SIZE)
    jobs = [(n, delta, i, size, seed) for i, size in enumerate(sizes)]
    results = list(executor.map(_mc_shard, jobs)) if executor else [_mc_shard(j) for j in jobs]
    s1 = math.fsum(r[0] for r in results)
    s2 = math.fsum(r[1] for r in results)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    ball = unit_ball_volume(n * n - 1) * delta ** (n * n - 1)
    return ball * mean, ball * math.sqrt(var / (samples - 1))


def regularity_check(delta: float, eps: float, volume_fn) -> tuple[float, float, float]:
    """Volume ratios at delta +- eps and the least D satisfying both bounds.

    The bounds are m(delta+eps) <= (1 + D eps/delta) m(delta) and
    m(delta-eps) >= (1 - D eps/delta) m(delta).
    """
    if eps < 0 or eps > delta / 2:
        raise DomainError(f"need 0 <= eps <= delta/2, got eps={eps}, delta={delta}")
    if eps == 0:
        return 1.0, 1.0, 0.0
    base = volume_fn(delta)
    up = volume_fn(delta + eps) / base
    down = volume_fn(delta - eps) / base
    t = eps / delta
    return up, down, max((up - 1) / t, (1 - down) / t)


def regularity_grid(deltas, eps_fraction: float, volume_fn) -> float:
    """Largest per-cell D over a grid; one finite D then works for all cells."""
    return max(regularity_check(d, d * eps_fraction, volume_fn)[2] for d in deltas)
