"""Edge-capacity laws, seeded i.i.d. capacity fields and exact quantisation.

Capacities are stored as non-negative integer counts of 1/R units with R a
power of two (default 2**20). Continuous laws are floored onto the 1/R grid
at sampling time, so the stored field is the exact ground truth every solver
operates on; finite laws whose atoms sit on the grid are stored exactly.

Sampling is counter based: the draw for edge id i is a pure function of
(seed, i), so fields are reproducible across platforms, independent of
evaluation order, and replica workers can sample concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.special import erfinv

from .lattice import BoxSpec, Edge, edge_ids, edges_in_box

DEFAULT_RESOLUTION = 2**20

BERNOULLI = "bernoulli"
FINITE_DISCRETE = "finite_discrete"
UNIFORM = "uniform"
EXPONENTIAL = "exponential"
HALF_NORMAL = "half_normal"

_FINITE_KINDS = (BERNOULLI, FINITE_DISCRETE)
_CONTINUOUS_KINDS = (UNIFORM, EXPONENTIAL, HALF_NORMAL)


def is_power_of_two(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and n & (n - 1) == 0


def as_fraction(x) -> Fraction:
    """Exact rational from int/Fraction/str input.

    Floats are interpreted through their shortest round-trip decimal
    representation, so 0.9 means 9/10 rather than the nearest binary float.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numeric parameters")
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("parameter must be finite")
        return Fraction(repr(x))
    if isinstance(x, (int, Rational, str)):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def unit_count(value: Fraction, resolution: int) -> int:
    """floor(value * resolution): the capacity grid cell of an exact value."""
    if value < 0:
        raise ValueError("capacity values must be non-negative")
    return (value.numerator * resolution) // value.denominator


def _check_seed(seed: int) -> int:
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


@dataclass(frozen=True)
class DistributionSpec:
    """Capacity law of a single edge.

    ``support``/``probs`` hold the atoms of the finite kinds and the interval
    endpoints of the uniform kind, always as exact rationals.
    """

    kind: str
    support: tuple[Fraction, ...] = ()
    probs: tuple[Fraction, ...] = ()
    rate: float = 0.0
    sigma: float = 0.0

    @classmethod
    def bernoulli(cls, p, lo=0, hi=1) -> "DistributionSpec":
        p, lo, hi = as_fraction(p), as_fraction(lo), as_fraction(hi)
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if lo < 0 or hi < 0:
            raise ValueError("support values must be non-negative")
        return cls(BERNOULLI, support=(lo, hi), probs=(1 - p, p))

    @classmethod
    def finite_discrete(cls, atoms) -> "DistributionSpec":
        support = tuple(as_fraction(v) for v, _ in atoms)
        probs = tuple(as_fraction(p) for _, p in atoms)
        if not support:
            raise ValueError("need at least one atom")
        if any(v < 0 for v in support):
            raise ValueError("support values must be non-negative")
        if any(p < 0 for p in probs) or sum(probs) != 1:
            raise ValueError("probabilities must be non-negative and sum to 1 exactly")
        return cls(FINITE_DISCRETE, support=support, probs=probs)

    @classmethod
    def uniform(cls, a, b) -> "DistributionSpec":
        a, b = as_fraction(a), as_fraction(b)
        if a < 0 or b < a:
            raise ValueError("need 0 <= a <= b")
        return cls(UNIFORM, support=(a, b))

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        if not rate > 0:
            raise ValueError("rate must be positive")
        return cls(EXPONENTIAL, rate=float(rate))

    @classmethod
    def half_normal(cls, sigma: float) -> "DistributionSpec":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return cls(HALF_NORMAL, sigma=float(sigma))

    @property
    def is_finite(self) -> bool:
        return self.kind in _FINITE_KINDS

    def to_json(self) -> dict:
        if self.kind == BERNOULLI:
            return {
                "kind": BERNOULLI,
                "p": str(self.probs[1]),
                "lo": str(self.support[0]),
                "hi": str(self.support[1]),
            }
        if self.kind == FINITE_DISCRETE:
            return {
                "kind": FINITE_DISCRETE,
                "atoms": [[str(v), str(p)] for v, p in zip(self.support, self.probs)],
            }
        if self.kind == UNIFORM:
            return {"kind": UNIFORM, "a": str(self.support[0]), "b": str(self.support[1])}
        if self.kind == EXPONENTIAL:
            return {"kind": EXPONENTIAL, "rate": self.rate}
        return {"kind": HALF_NORMAL, "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionSpec":
        kind = obj.get("kind")
        if kind == BERNOULLI:
            return cls.bernoulli(obj["p"], obj.get("lo", 0), obj.get("hi", 1))
        if kind == FINITE_DISCRETE:
            return cls.finite_discrete([(v, p) for v, p in obj["atoms"]])
        if kind == UNIFORM:
            return cls.uniform(obj["a"], obj["b"])
        if kind == EXPONENTIAL:
            return cls.exponential(float(obj["rate"]))
        if kind == HALF_NORMAL:
            return cls.half_normal(float(obj["sigma"]))
        raise ValueError(f"unknown distribution kind: {kind!r}")


@dataclass(frozen=True)
class DistConstants:
    """Essential supremum, essential infimum and the mass at the supremum.

    ``mu`` is None when the essential supremum is infinite.
    """

    mu: Fraction | None
    beta: Fraction
    q_mu: Fraction

    @property
    def mu_is_infinite(self) -> bool:
        return self.mu is None


def dist_constants(dist: DistributionSpec) -> DistConstants:
    """Closed-form distribution constants per law."""
    if dist.is_finite:
        atoms = [(v, p) for v, p in zip(dist.support, dist.probs) if p > 0]
        mu = max(v for v, _ in atoms)
        beta = min(v for v, _ in atoms)
        q_mu = sum(p for v, p in atoms if v == mu)
        return DistConstants(mu=mu, beta=beta, q_mu=Fraction(q_mu))
    if dist.kind == UNIFORM:
        a, b = dist.support
        return DistConstants(mu=b, beta=a, q_mu=Fraction(1 if a == b else 0))
    return DistConstants(mu=None, beta=Fraction(0), q_mu=Fraction(0))


@dataclass(eq=False)
class CapacityField:
    """One capacity per edge of a box, in integer 1/resolution units.

    Immutable after construction; the backing array is write-locked.
    ``seed`` records the seed the field was sampled with (None for derived
    or hand-built fields).
    """

    box: BoxSpec
    resolution: int
    caps: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        if not is_power_of_two(self.resolution):
            raise ValueError("resolution must be a positive power of two")
        caps = np.array(self.caps, dtype=np.int64, copy=True)
        n = len(edges_in_box(self.box))
        if caps.shape != (n,):
            raise ValueError(f"expected {n} capacities, got shape {caps.shape}")
        if n and int(caps.min()) < 0:
            raise ValueError("capacities must be non-negative")
        caps.setflags(write=False)
        self.caps = caps
        self.total_units = sum(caps.tolist())

    @classmethod
    def constant(cls, box: BoxSpec, units: int, resolution: int = DEFAULT_RESOLUTION) -> "CapacityField":
        return cls(box, resolution, np.full(len(edges_in_box(box)), units, dtype=np.int64))

    def cap_of(self, edge: Edge) -> int:
        return int(self.caps[edge_ids(self.box)[edge]])

    def restrict_to(self, sub: BoxSpec) -> "CapacityField":
        """Same capacities on a smaller box; every sub-box edge must be covered."""
        ids = edge_ids(self.box)
        try:
            caps = [int(self.caps[ids[e]]) for e in edges_in_box(sub)]
        except KeyError as missing:
            raise ValueError(f"edge {missing} of the sub-box is not covered") from None
        return CapacityField(sub, self.resolution, np.array(caps, dtype=np.int64))


def edge_uniforms(seed: int, count: int) -> np.ndarray:
    """Uniform [0, 1) draws where draw i depends only on (seed, i)."""
    _check_seed(seed)
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.random(count)


def derive_seed(master: int, index: int) -> int:
    """Stable 64-bit sub-seed for replica ``index`` of a master seed."""
    _check_seed(master)
    ss = np.random.SeedSequence(master, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_field(
    box: BoxSpec,
    dist: DistributionSpec,
    resolution: int = DEFAULT_RESOLUTION,
    seed: int = 0,
) -> CapacityField:
    """One independent capacity draw per edge, floored onto the 1/R grid."""
    if not is_power_of_two(resolution):
        raise ValueError("resolution must be a positive power of two")
    _check_seed(seed)
    n = len(edges_in_box(box))
    u = edge_uniforms(seed, n)
    r = float(resolution)
    if dist.is_finite:
        units = np.array([unit_count(v, resolution) for v in dist.support], dtype=np.int64)
        cum = np.cumsum(np.array([float(p) for p in dist.probs]))
        cum[-1] = 1.0  # guard float drift; u < 1 keeps indices in range
        caps = units[np.searchsorted(cum, u, side="right")]
    elif dist.kind == UNIFORM:
        a, b = dist.support
        caps = np.floor(float(a) * r + u * float(b - a) * r).astype(np.int64)
    elif dist.kind == EXPONENTIAL:
        caps = np.floor((-np.log1p(-u) / dist.rate) * r).astype(np.int64)
    elif dist.kind == HALF_NORMAL:
        caps = np.floor(dist.sigma * math.sqrt(2.0) * erfinv(u) * r).astype(np.int64)
    else:
        raise ValueError(f"unknown distribution kind: {dist.kind!r}")
    return CapacityField(box, resolution, caps, seed=seed)


def discretize(field: CapacityField, k: int) -> CapacityField:
    """Round capacities down to multiples of 1/k; the resolution is unchanged.

    ``k`` must be a power of two not exceeding the field resolution, so the
    coarse grid is a sub-grid of the stored one and the operation is exact.
    """
    if not is_power_of_two(k):
        raise ValueError("k must be a positive power of two")
    if k > field.resolution:
        raise ValueError("k must not exceed the field resolution")
    step = field.resolution // k
    caps = (field.caps // step) * step
    return CapacityField(field.box, field.resolution, caps, seed=field.seed)
