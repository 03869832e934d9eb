"""Run configuration: a JSON file whose keys mirror the RunConfig fields."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .archimedean import R_MAX, MetricSpec, as_group_element
from .errors import DomainError
from .exact import PrimeSet
from .padic_volume import K_MAX


def _generic_center():
    t, s = 0.7, 0.3
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return rot @ np.diag([math.exp(s), math.exp(-s)])


NAMED_CENTERS = {
    "identity": lambda n: np.eye(n),
    "generic": lambda n: _generic_center() if n == 2 else None,
}


def parse_center(spec, n: int = 2) -> np.ndarray:
    """A named centre (``identity``, ``generic``) or a JSON matrix literal."""
    if isinstance(spec, str):
        if spec in NAMED_CENTERS:
            x = NAMED_CENTERS[spec](n)
            if x is None:
                raise DomainError(f"centre {spec!r} is only defined for n = 2")
            return x
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            raise DomainError(f"unknown centre {spec!r}") from None
    return as_group_element(np.array(spec, dtype=float))


@dataclass
class RunConfig:
    n: int = 2
    primes: list[int] | str = field(default_factory=lambda: [2])
    metric: str = "log"
    r_max: float = R_MAX
    deltas: list[float] = field(default_factory=lambda: [0.2, 0.4])
    heights: list[int] = field(default_factory=lambda: [2**k for k in range(4, 10)])
    centers: dict[str, object] = field(default_factory=lambda: {"identity": "identity", "generic": "generic"})
    mc_samples: int = 10_000_000
    seed: int = 0
    k_max: int = K_MAX
    entry_bound_cap: int = 50_000_000
    time_budget: float | None = None
    q_S: float | None = None
    E: float = 1.0
    covolume: float | None = None

    def __post_init__(self):
        self.validate()

    @property
    def prime_set(self) -> PrimeSet:
        if isinstance(self.primes, str):
            return PrimeSet.parse(self.primes)
        return PrimeSet.of(self.primes)

    @property
    def metric_spec(self) -> MetricSpec:
        return MetricSpec.parse(self.metric)

    def center_matrices(self) -> dict[str, np.ndarray]:
        return {name: parse_center(spec if spec is not None else name, self.n) for name, spec in self.centers.items()}

    def validate(self):
        if self.n < 2:
            raise DomainError("group dimension must be >= 2")
        self.prime_set
        self.metric_spec
        if not self.deltas or not self.heights:
            raise DomainError("deltas and heights must be non-empty")
        for d in self.deltas:
            if not 0 < d <= self.r_max:
                raise DomainError(f"delta {d} outside (0, {self.r_max}]")
        for h in self.heights:
            if int(h) != h or h < 1:
                raise DomainError(f"height {h} must be a positive integer")
        if self.mc_samples < 2:
            raise DomainError("mc_samples must be >= 2")
        if self.covolume is not None and self.covolume <= 0:
            raise DomainError("covolume must be positive")
        if not 0 < self.E <= 1:
            raise DomainError("E must lie in (0, 1]")
        self.center_matrices()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
