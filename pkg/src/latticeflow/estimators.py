"""Monte Carlo and exact-enumeration estimators for the flow constants.

Replica r of a run always samples its field with the sub-seed derived from
(master seed, r), so results are independent of evaluation order and of the
number of worker processes, and merging over replicas is a plain sum.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import partial

import numpy as np

from .capacity import (
    DEFAULT_RESOLUTION,
    CapacityField,
    DistributionSpec,
    as_fraction,
    derive_seed,
    discretize,
    sample_field,
    unit_count,
)
from .cuts import SlabProblem, tau_slab
from .flow import max_flow, solve_min_cut
from .lattice import BoxSpec, RectSpec, edges_in_box


class EnumerationBudgetError(RuntimeError):
    """The exact enumeration would exceed the configured assignment budget."""


def _map_indices(fn, count: int, workers: int) -> list:
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    chunk = max(1, count // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count), chunksize=chunk))


def wilson_interval(hits: int, samples: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    The boundary cases are pinned exactly: zero hits give a lower limit of
    0 and all hits give an upper limit of 1, which float rounding of the
    closed form does not guarantee.
    """
    if not 0 <= hits <= samples or samples < 1:
        raise ValueError("need 0 <= hits <= samples, samples >= 1")
    p = hits / samples
    denom = 1.0 + z * z / samples
    center = (p + z * z / (2 * samples)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples))
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == samples else min(1.0, center + half)
    return lo, hi


@dataclass(eq=False)
class NuEstimate:
    """Mean rescaled pinned-cut weight over i.i.d. slab replicas."""

    d: int
    n: int
    k_slab: int
    replications: int
    seed: int
    resolution: int
    mean: Fraction
    stderr: float


def _nu_replica(dist, base, k_slab, resolution, seed, index: int) -> int:
    field = sample_field(base.slab_box(k_slab), dist, resolution, derive_seed(seed, index))
    value, _ = tau_slab(SlabProblem(base, k_slab, field))
    return value


def estimate_nu(
    dist: DistributionSpec,
    n: int,
    k_slab: int,
    replications: int,
    seed: int,
    *,
    d: int = 2,
    resolution: int = DEFAULT_RESOLUTION,
    workers: int = 1,
) -> NuEstimate:
    """Monte Carlo mean of tau(]0,n]^(d-1), k_slab) / n^(d-1), exact rational."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    base = RectSpec.cube(n, d)
    fn = partial(_nu_replica, dist, base, k_slab, resolution, seed)
    taus = _map_indices(fn, replications, workers)
    denom = base.area * resolution
    mean = Fraction(sum(taus), replications * denom)
    if replications > 1:
        vals = [t / denom for t in taus]
        avg = sum(vals) / replications
        var = sum((v - avg) ** 2 for v in vals) / (replications - 1)
        stderr = math.sqrt(var / replications)
    else:
        stderr = 0.0
    return NuEstimate(d, n, k_slab, replications, seed, resolution, mean, stderr)


@dataclass(eq=False)
class PsiEstimate:
    """Upper-tail rate estimate at one threshold lam.

    psi_hat is -ln(hits/samples) / (n^(d-1) h); with zero hits it degrades
    to the one-sided lower bound ln(samples) / (n^(d-1) h) and the infinite
    flag is set, since the true rate may genuinely be infinite there.
    """

    lam: Fraction
    d: int
    n: int
    h: int
    k_disc: int
    samples: int
    hits: int
    seed: int
    resolution: int
    psi_hat: float
    ci_lo: float
    ci_hi: float
    infinite_flag: bool

    @property
    def hit_rate(self) -> float:
        return self.hits / self.samples


def _psi_replica(dist, n, h, k_disc, resolution, d, seed, index: int) -> int:
    box = BoxSpec((n,) * (d - 1), h)
    field = sample_field(box, dist, resolution, derive_seed(seed, index))
    if k_disc != resolution:
        field = discretize(field, k_disc)
    return max_flow(box, field).value


def estimate_psi_sweep(
    dist: DistributionSpec,
    lams,
    n: int,
    h: int,
    k_disc: int,
    samples: int,
    seed: int,
    *,
    d: int = 2,
    resolution: int = DEFAULT_RESOLUTION,
    z: float = 1.96,
    workers: int = 1,
) -> list[PsiEstimate]:
    """Tail estimates over a lam grid from one shared set of replicas.

    Identical to calling ``estimate_psi`` per lam with the same seed: the
    replica fields depend only on (seed, index), so sharing them is free and
    keeps the whole curve consistent replica by replica.
    """
    if samples < 1 or h < 1:
        raise ValueError("samples and h must be >= 1")
    lamfs = [as_fraction(l) for l in lams]
    if any(l < 0 for l in lamfs):
        raise ValueError("lam must be non-negative")
    area = n ** (d - 1)
    thresholds = [math.ceil(l * area * resolution) for l in lamfs]
    fn = partial(_psi_replica, dist, n, h, k_disc, resolution, d, seed)
    flows = _map_indices(fn, samples, workers)
    volume = area * h
    out = []
    for lamf, thr in zip(lamfs, thresholds):
        hits = sum(1 for v in flows if v >= thr)
        if hits > 0:
            psi = -math.log(hits / samples) / volume + 0.0  # avoid -0.0
            infinite = False
        else:
            psi = math.log(samples) / volume
            infinite = True
        p_lo, p_hi = wilson_interval(hits, samples, z)
        ci_lo = -math.log(p_hi) / volume + 0.0
        ci_hi = math.inf if p_lo == 0.0 else -math.log(p_lo) / volume
        out.append(
            PsiEstimate(
                lamf, d, n, h, k_disc, samples, hits, seed, resolution,
                psi, ci_lo, ci_hi, infinite,
            )
        )
    return out


def estimate_psi(
    dist: DistributionSpec,
    lam,
    n: int,
    h: int,
    k_disc: int,
    samples: int,
    seed: int,
    **kwargs,
) -> PsiEstimate:
    """Tail estimate at a single lam; see ``estimate_psi_sweep``."""
    return estimate_psi_sweep(dist, [lam], n, h, k_disc, samples, seed, **kwargs)[0]


def exact_tail_probability(
    dist: DistributionSpec,
    box: BoxSpec,
    lam,
    *,
    resolution: int = DEFAULT_RESOLUTION,
    budget: int = 2**24,
) -> Fraction:
    """P[flow >= lam * base_area] by exhaustive enumeration, exact rational.

    Enumerates every capacity assignment of a finite law over the box edges
    (support values floored onto the 1/resolution grid, matching sampling)
    and sums the exact assignment probabilities where the flow clears the
    threshold. Independent of the Monte Carlo path; intended for tiny boxes.
    """
    if not dist.is_finite:
        raise ValueError("exact enumeration needs a finite-support law")
    lamf = as_fraction(lam)
    edges = edges_in_box(box)
    m = len(edges)
    s = len(dist.support)
    if s**m > budget:
        raise EnumerationBudgetError(f"{s}**{m} assignments exceed the budget {budget}")
    units = [unit_count(v, resolution) for v in dist.support]
    threshold = math.ceil(lamf * box.base_area * resolution)
    total = Fraction(0)
    for assign in itertools.product(range(s), repeat=m):
        caps = np.array([units[j] for j in assign], dtype=np.int64)
        field = CapacityField(box, resolution, caps)
        value, _, _, _ = solve_min_cut(box, field)
        if value >= threshold:
            prob = Fraction(1)
            for j in assign:
                prob *= dist.probs[j]
            total += prob
    return total


@dataclass(eq=False)
class PsiCurveReport:
    """Shape diagnostics for a tail-rate curve over a sorted lam grid."""

    monotonicity_violations: tuple[tuple[float, float], ...]
    convexity_violations: tuple[float, ...]
    max_psi_below_nu: float | None
    min_psi_above_nu: float | None
    infinite_points: tuple[float, ...]

    @property
    def clean(self) -> bool:
        return not self.monotonicity_violations and not self.convexity_violations


def psi_curve_diagnostics(
    estimates: list[PsiEstimate],
    nu_hat,
    *,
    nu_margin: float = 0.0,
    tolerance: float = 0.0,
) -> PsiCurveReport:
    """Monotonicity and midpoint-convexity checks beyond the CI noise.

    A monotonicity violation needs the whole CI of the earlier point to sit
    above the CI of the later one; a convexity violation needs the middle
    estimate to exceed the chord through its neighbours by more than the
    combined CI half-widths. The empirical curve is a step function (the
    flow lives on a value lattice), so consecutive grid points with equal
    hit counts describe one and the same empirical tail point and collapse
    to the tight-lam representative before the shape checks. Infinite
    points are reported separately and excluded from both checks.
    """
    if not estimates:
        raise ValueError("empty estimate list")
    ref = estimates[0]
    for e in estimates[1:]:
        if (e.d, e.n, e.h, e.k_disc, e.samples, e.resolution) != (
            ref.d, ref.n, ref.h, ref.k_disc, ref.samples, ref.resolution,
        ):
            raise ValueError("estimates were produced with mismatched parameters")
    lams = [float(e.lam) for e in estimates]
    if any(a >= b for a, b in zip(lams, lams[1:])):
        raise ValueError("lam grid must be strictly increasing")

    nu = float(as_fraction(nu_hat))
    dedup: list[PsiEstimate] = []
    for e in estimates:
        if dedup and dedup[-1].hits == e.hits:
            dedup[-1] = e
        else:
            dedup.append(e)
    finite = [e for e in dedup if not e.infinite_flag]
    mono = []
    for a, b in zip(finite, finite[1:]):
        if a.ci_lo > b.ci_hi + tolerance:
            mono.append((float(a.lam), float(b.lam)))
    convex = []
    for lo, mid, hi in zip(finite, finite[1:], finite[2:]):
        x0, x1, x2 = float(lo.lam), float(mid.lam), float(hi.lam)
        chord = lo.psi_hat + (hi.psi_hat - lo.psi_hat) * (x1 - x0) / (x2 - x0)
        halfwidth = (mid.ci_hi - mid.ci_lo) / 2
        neighbour = ((lo.ci_hi - lo.ci_lo) + (hi.ci_hi - hi.ci_lo)) / 4
        if mid.psi_hat - chord > halfwidth + neighbour + tolerance:
            convex.append(x1)
    below = [e.psi_hat for e in finite if float(e.lam) < nu]
    above = [e.psi_hat for e in finite if float(e.lam) > nu + nu_margin]
    return PsiCurveReport(
        tuple(mono),
        tuple(convex),
        max(below) if below else None,
        min(above) if above else None,
        tuple(float(e.lam) for e in estimates if e.infinite_flag),
    )
