"""Nonparametric price-distribution estimation from censored observations.

Losing an auction only reveals that the price was at least the bid plus one
(right censoring); winning an impression without a click only reveals the
price was at most the bid (left censoring).  The product-limit estimator
handles the right-censored case in closed form; mixed censoring goes
through a self-consistency fixed point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import log

import numpy as np

from .distribution import PricePmf

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


class CensorKind(enum.Enum):
    DIRECT = "direct"
    RIGHT = "right_censored"
    LEFT = "left_censored"


@dataclass(frozen=True)
class CensoredSample:
    """One price observation truncated at a known bound.

    A direct sample saw the true price ``observed`` strictly below its bound;
    a right-censored sample knows only ``price >= bound``; a left-censored
    sample knows only ``price < bound``.
    """

    bound: int
    kind: CensorKind
    observed: int | None = None

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError(f"bound must be >= 1, got {self.bound}")
        if self.kind is CensorKind.DIRECT:
            if self.observed is None or not 1 <= self.observed < self.bound:
                raise ValueError(
                    f"direct observation must satisfy 1 <= observed < bound, "
                    f"got observed={self.observed} bound={self.bound}"
                )
        elif self.kind is CensorKind.RIGHT:
            if self.observed != self.bound:
                raise ValueError("right-censored observation must equal its bound")
        else:
            if self.observed is not None:
                raise ValueError("left-censored samples carry no observed value")
            if self.bound < 2:
                raise ValueError("left censoring below price 1 is impossible")

    @classmethod
    def direct(cls, value: int, bound: int) -> "CensoredSample":
        return cls(bound=bound, kind=CensorKind.DIRECT, observed=value)

    @classmethod
    def right_censored(cls, bound: int) -> "CensoredSample":
        return cls(bound=bound, kind=CensorKind.RIGHT, observed=bound)

    @classmethod
    def left_censored(cls, bound: int) -> "CensoredSample":
        return cls(bound=bound, kind=CensorKind.LEFT)


class ObservationLog:
    """Append-only, order-preserving record of censored samples.

    Per-kind values are also kept in flat lists so estimators can consume
    them without re-walking the sample objects on every update.
    """

    def __init__(self, samples=()):
        self._samples: list[CensoredSample] = []
        self._direct_values: list[int] = []
        self._right_bounds: list[int] = []
        self._left_bounds: list[int] = []
        for sample in samples:
            self.append(sample)

    def append(self, sample: CensoredSample) -> None:
        if not isinstance(sample, CensoredSample):
            raise TypeError(f"expected CensoredSample, got {type(sample).__name__}")
        self._samples.append(sample)
        if sample.kind is CensorKind.DIRECT:
            self._direct_values.append(sample.observed)
        elif sample.kind is CensorKind.RIGHT:
            self._right_bounds.append(sample.bound)
        else:
            self._left_bounds.append(sample.bound)

    @property
    def samples(self) -> tuple[CensoredSample, ...]:
        return tuple(self._samples)

    @property
    def direct_values(self) -> list[int]:
        return list(self._direct_values)

    @property
    def right_bounds(self) -> list[int]:
        return list(self._right_bounds)

    @property
    def left_bounds(self) -> list[int]:
        return list(self._left_bounds)

    @property
    def has_left_censored(self) -> bool:
        return bool(self._left_bounds)

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)


def product_limit(log: ObservationLog, support_max: int) -> PricePmf:
    """Product-limit (Kaplan-Meier) estimate from direct and right-censored data.

    At each price ``s`` the hazard is ``D(s) / N(s)`` where ``D(s)`` counts
    direct observations of value ``s`` and ``N(s)`` counts samples still at
    risk there; survival is the running product of ``1 - D/N``, and the pmf
    is its decrement.  Prices with nobody at risk contribute no factor.

    Survival remaining past the largest censoring bound is not localizable:
    any placement at or beyond that bound maximizes the likelihood.  It is
    spread uniformly over the in-support prices there (matching the
    self-consistent estimator's resolution of the same ambiguity) and goes
    to ``above_mass`` only when the bound exceeds the support.  Stacking it
    all above the support would tell a bidder that nothing affordable is
    ever winnable, which censored data cannot justify.
    """
    if support_max < 1:
        raise ValueError(f"support_max must be >= 1, got {support_max}")
    if len(log) == 0:
        raise ValueError("cannot estimate from an empty observation log")
    if log.has_left_censored:
        raise ValueError(
            "product_limit handles direct and right-censored samples only; "
            "use turnbull() for left-censored data"
        )
    direct_vals = log._direct_values
    right_bounds = log._right_bounds
    if direct_vals and max(direct_vals) > support_max:
        raise ValueError(
            f"direct observation {max(direct_vals)} exceeds support_max {support_max}"
        )

    cap = support_max
    d_counts = np.bincount(direct_vals, minlength=cap + 2) if direct_vals else np.zeros(cap + 2, dtype=np.int64)
    deaths = d_counts[1 : cap + 1].astype(np.float64)
    # at risk at s: direct values >= s plus right-censoring bounds > s
    direct_ge = np.cumsum(d_counts[::-1])[::-1]
    if right_bounds:
        r_counts = np.bincount(np.minimum(right_bounds, cap + 1), minlength=cap + 2)
        right_gt = np.cumsum(r_counts[::-1])[::-1]
    else:
        right_gt = np.zeros(cap + 2)
    at_risk = direct_ge[1 : cap + 1] + right_gt[2 : cap + 2]
    hazard = np.divide(
        deaths, at_risk, out=np.zeros(cap), where=at_risk > 0
    )
    survival = np.concatenate(([1.0], np.cumprod(1.0 - hazard)))
    mass = survival[:-1] - survival[1:]
    residual = float(survival[-1])
    above = 0.0
    if residual > 0.0:
        frontier = max(right_bounds) if right_bounds else cap + 1
        if frontier > cap:
            above = residual
        else:
            mass = mass.copy()
            mass[frontier - 1 :] += residual / (cap - frontier + 1)
    return PricePmf(mass, above)


@dataclass(frozen=True)
class TurnbullResult:
    """Self-consistency estimate plus convergence diagnostics."""

    pmf: PricePmf
    converged: bool
    iterations: int


def turnbull(
    log: ObservationLog,
    support_max: int,
    tol: float = 1e-9,
    max_iter: int = 10_000,
) -> TurnbullResult:
    """Self-consistent maximum-likelihood estimate for mixed censoring.

    Starting from uniform mass on ``1..support_max``, each censored sample
    repeatedly spreads its unit weight over the prices consistent with it
    (at or above the bound for right censoring, below it for left censoring)
    in proportion to the current estimate; re-normalizing the expected
    counts gives the next estimate.  Iteration stops when the max-norm
    change drops below ``tol``.  A run that exhausts ``max_iter`` returns
    its last iterate flagged as unconverged rather than raising.
    """
    if support_max < 1:
        raise ValueError(f"support_max must be >= 1, got {support_max}")
    if len(log) == 0:
        raise ValueError("cannot estimate from an empty observation log")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    cap = support_max
    direct_vals = log._direct_values
    right_bounds = log._right_bounds
    left_bounds = log._left_bounds
    if direct_vals and max(direct_vals) > cap:
        raise ValueError(
            f"direct observation {max(direct_vals)} exceeds support_max {cap}"
        )

    n = len(log)
    base = (
        np.bincount(direct_vals, minlength=cap + 1)[1:].astype(np.float64)
        if direct_vals
        else np.zeros(cap)
    )
    if right_bounds:
        right_b, counts = np.unique(right_bounds, return_counts=True)
        right_b = np.minimum(right_b, cap + 1)  # any bound past the support means "above"
        right_c = counts.astype(np.float64)
    else:
        right_b = np.zeros(0, dtype=np.int64)
        right_c = np.zeros(0)
    if left_bounds:
        left_b, counts = np.unique(left_bounds, return_counts=True)
        left_hi = np.minimum(left_b - 1, cap)  # top price consistent with the bound
        left_c = counts.astype(np.float64)
    else:
        left_hi = np.zeros(0, dtype=np.int64)
        left_c = np.zeros(0)

    runner = _self_consistency_jit if _HAVE_NUMBA else _self_consistency_numpy
    mass, above, converged, iterations = runner(
        base, right_b.astype(np.int64), right_c, left_hi.astype(np.int64), left_c,
        float(tol), int(max_iter), cap, n,
    )
    return TurnbullResult(PricePmf(mass, above), converged, iterations)


def _self_consistency_numpy(base, right_b, right_c, left_hi, left_c, tol, max_iter, cap, n):
    mass = np.full(cap, 1.0 / cap)
    above = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        counts = base.copy()
        above_counts = 0.0
        prefix = np.concatenate(([0.0], np.cumsum(mass)))
        if right_b.size:
            # consistent mass at or past each bound, above bucket included
            consistent = (prefix[cap] + above) - prefix[right_b - 1]
            ok = consistent > 0.0
            ratio = np.where(ok, right_c / np.where(ok, consistent, 1.0), 0.0)
            spread = np.zeros(cap + 2)
            np.add.at(spread, right_b, ratio)
            counts += mass * np.cumsum(spread)[1 : cap + 1]
            above_counts += above * ratio.sum()
            if not ok.all():
                # nothing consistent yet: spread the sample uniformly over its set
                for k, c in zip(right_b[~ok], right_c[~ok]):
                    if k > cap:
                        above_counts += c
                    else:
                        share = c / (cap - k + 2)
                        counts[k - 1 :] += share
                        above_counts += share
        if left_hi.size:
            consistent = prefix[left_hi]
            ok = consistent > 0.0
            ratio = np.where(ok, left_c / np.where(ok, consistent, 1.0), 0.0)
            spread = np.zeros(cap + 1)
            np.add.at(spread, left_hi, ratio)
            counts += mass * np.cumsum(spread[::-1])[::-1][1:]
            if not ok.all():
                for hi, c in zip(left_hi[~ok], left_c[~ok]):
                    counts[:hi] += c / hi
        new_mass = counts / n
        new_above = above_counts / n
        delta = max(float(np.max(np.abs(new_mass - mass))), abs(new_above - above))
        mass, above = new_mass, new_above
        if delta < tol:
            converged = True
            break
    return mass, above, converged, iterations


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _self_consistency_jit(base, right_b, right_c, left_hi, left_c, tol, max_iter, cap, n):
        mass = np.full(cap, 1.0 / cap)
        above = 0.0
        new_mass = np.empty(cap)
        prefix = np.empty(cap + 1)
        spread_r = np.empty(cap + 2)
        spread_l = np.empty(cap + 1)
        converged = False
        iterations = 0
        for it in range(max_iter):
            iterations = it + 1
            prefix[0] = 0.0
            for j in range(cap):
                prefix[j + 1] = prefix[j] + mass[j]
            total_all = prefix[cap] + above
            for j in range(cap):
                new_mass[j] = base[j]
            above_counts = 0.0
            for j in range(cap + 2):
                spread_r[j] = 0.0
            for i in range(right_b.shape[0]):
                k = right_b[i]
                c = right_c[i]
                consistent = total_all - prefix[k - 1]
                if consistent > 0.0:
                    ratio = c / consistent
                    spread_r[k] += ratio
                    above_counts += above * ratio
                elif k > cap:
                    above_counts += c
                else:
                    share = c / (cap - k + 2)
                    for j in range(k - 1, cap):
                        new_mass[j] += share
                    above_counts += share
            acc = 0.0
            for j in range(cap):
                acc += spread_r[j + 1]
                new_mass[j] += mass[j] * acc
            for j in range(cap + 1):
                spread_l[j] = 0.0
            for i in range(left_hi.shape[0]):
                hi = left_hi[i]
                c = left_c[i]
                consistent = prefix[hi]
                if consistent > 0.0:
                    spread_l[hi] += c / consistent
                else:
                    share = c / hi
                    for j in range(hi):
                        new_mass[j] += share
            acc = 0.0
            for j in range(cap - 1, -1, -1):
                acc += spread_l[j + 1]
                new_mass[j] += mass[j] * acc
            delta = 0.0
            for j in range(cap):
                value = new_mass[j] / n
                move = abs(value - mass[j])
                if move > delta:
                    delta = move
                mass[j] = value
            new_above = above_counts / n
            move = abs(new_above - above)
            if move > delta:
                delta = move
            above = new_above
            if delta < tol:
                converged = True
                break
        return mass, above, converged, iterations


def log_likelihood(pmf: PricePmf, samples) -> float:
    """Log-likelihood of censored samples under a candidate pmf.

    Direct samples score their price mass, right-censored ones the tail at
    or above their bound, left-censored ones the complement.  Any zero term
    yields ``-inf``.
    """
    total = 0.0
    for sample in samples:
        if sample.kind is CensorKind.DIRECT:
            term = pmf.prob(sample.observed)
        elif sample.kind is CensorKind.RIGHT:
            term = pmf.tail(sample.bound - 1)
        else:
            term = 1.0 - pmf.tail(sample.bound - 1)
        if term <= 0.0:
            return float("-inf")
        total += log(term)
    return total
