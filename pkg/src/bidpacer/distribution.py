"""Discrete market-price distributions on positive integer prices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PricePmf:
    """Probability mass function over integer prices ``1..support_max``.

    ``mass[i]`` is the probability of price ``i + 1``.  ``above_mass`` holds
    the probability that the price exceeds ``support_max``; censored
    estimation can leave that tail mass unlocalized, so it is stored
    explicitly instead of being pinned to an arbitrary price.  Instances are
    immutable and safe to share across concurrent simulations.
    """

    mass: np.ndarray
    above_mass: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.mass, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("mass must be a non-empty 1-d array")
        if np.any(arr < 0.0) or self.above_mass < 0.0:
            raise ValueError("probabilities must be non-negative")
        total = float(arr.sum()) + float(self.above_mass)
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"mass and above_mass must sum to 1, got {total!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)
        object.__setattr__(self, "above_mass", float(self.above_mass))

    @property
    def support_max(self) -> int:
        return int(self.mass.size)

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(np.append(self.mass, self.above_mass))

    def prob(self, price: int) -> float:
        """Mass at ``price``; zero outside ``1..support_max``."""
        if 1 <= price <= self.support_max:
            return float(self.mass[price - 1])
        return 0.0

    def tail(self, bound: int) -> float:
        """Mass strictly above ``bound``, including ``above_mass``."""
        if bound < 0:
            raise ValueError("bound must be >= 0")
        if bound >= self.support_max:
            return self.above_mass
        return float(self.mass[bound:].sum()) + self.above_mass

    def sample(self, rng: np.random.Generator, size=None, above_price: int | None = None):
        """Draw prices i.i.d. from the pmf.

        A pmf with unlocalized tail mass can only be sampled with a surrogate
        ``above_price`` standing in for the above-support bucket.
        """
        if above_price is not None and above_price < 1:
            raise ValueError("above_price must be >= 1")
        if self.above_mass > 0.0 and above_price is None:
            raise ValueError(
                "pmf has above-support mass; pass above_price to make it samplable"
            )
        u = rng.random() if size is None else rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right") + 1
        if above_price is not None:
            idx = np.where(idx > self.support_max, above_price, idx)
        else:
            # guards the top cdf entry against float dust
            idx = np.minimum(idx, self.support_max)
        return int(idx) if size is None else idx.astype(np.int64)


def point_mass(price: int) -> PricePmf:
    """Degenerate distribution concentrated at one price."""
    if price < 1:
        raise ValueError(f"price must be >= 1, got {price}")
    mass = np.zeros(price)
    mass[price - 1] = 1.0
    return PricePmf(mass)


def empirical_pmf(prices, support_max: int | None = None) -> PricePmf:
    """Empirical distribution of observed prices.

    Prices above ``support_max`` are folded into ``above_mass``.
    """
    arr = np.asarray(prices, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("prices must be non-empty")
    if np.any(arr < 1):
        raise ValueError("prices must be >= 1")
    cap = int(arr.max()) if support_max is None else int(support_max)
    if cap < 1:
        raise ValueError(f"support_max must be >= 1, got {cap}")
    within = arr[arr <= cap]
    counts = np.bincount(within, minlength=cap + 1)[1:]
    above = arr.size - within.size
    return PricePmf(counts / arr.size, above / arr.size)


def _uniform_family(low=1, high=None) -> PricePmf:
    if high is None:
        raise ValueError("uniform family requires 'high'")
    low, high = int(low), int(high)
    if low < 1:
        raise ValueError(f"uniform: low must be >= 1, got {low}")
    if high < low:
        raise ValueError(f"uniform: high must be >= low, got high={high} low={low}")
    mass = np.zeros(high)
    mass[low - 1 :] = 1.0 / (high - low + 1)
    return PricePmf(mass)


def _geometric_family(ratio=None, support_max=None) -> PricePmf:
    if ratio is None:
        raise ValueError("geometric family requires 'ratio'")
    if support_max is None:
        raise ValueError("geometric family requires 'support_max'")
    ratio = float(ratio)
    support_max = int(support_max)
    if ratio <= 0.0:
        raise ValueError(f"geometric: ratio must be positive, got {ratio}")
    if support_max < 1:
        raise ValueError(f"geometric: support_max must be >= 1, got {support_max}")
    weights = ratio ** np.arange(1, support_max + 1)
    return PricePmf(weights / weights.sum())


def _bimodal_gap_family(low=None, high=None, low_mass=None) -> PricePmf:
    if low is None or high is None or low_mass is None:
        raise ValueError("bimodal_gap family requires 'low', 'high' and 'low_mass'")
    low, high, low_mass = int(low), int(high), float(low_mass)
    if low < 1:
        raise ValueError(f"bimodal_gap: low must be >= 1, got {low}")
    if high <= low:
        raise ValueError(f"bimodal_gap: high must exceed low, got high={high} low={low}")
    if not 0.0 <= low_mass <= 1.0:
        raise ValueError(f"bimodal_gap: low_mass must be in [0, 1], got {low_mass}")
    mass = np.zeros(high)
    mass[low - 1] = low_mass
    mass[high - 1] = 1.0 - low_mass
    return PricePmf(mass)


def _bursty_family(base_max=None, spike_price=None, spike_prob=None) -> PricePmf:
    if base_max is None or spike_price is None or spike_prob is None:
        raise ValueError("bursty family requires 'base_max', 'spike_price' and 'spike_prob'")
    base_max, spike_price, spike_prob = int(base_max), int(spike_price), float(spike_prob)
    if base_max < 1:
        raise ValueError(f"bursty: base_max must be >= 1, got {base_max}")
    if spike_price <= base_max:
        raise ValueError(
            f"bursty: spike_price must exceed base_max, got spike_price={spike_price} base_max={base_max}"
        )
    if not 0.0 <= spike_prob < 1.0:
        raise ValueError(f"bursty: spike_prob must be in [0, 1), got {spike_prob}")
    mass = np.zeros(spike_price)
    mass[:base_max] = (1.0 - spike_prob) / base_max
    mass[spike_price - 1] = spike_prob
    return PricePmf(mass)


_FAMILIES = {
    "uniform": _uniform_family,
    "geometric": _geometric_family,
    "bimodal_gap": _bimodal_gap_family,
    "bursty": _bursty_family,
}


def make_family(name: str, **params) -> PricePmf:
    """Build one of the synthetic price families used in experiments.

    ``uniform(low, high)`` is flat on an integer range; ``geometric(ratio,
    support_max)`` decays by a constant factor; ``bimodal_gap(low, high,
    low_mass)`` splits mass between a cheap price and a far more expensive
    one; ``bursty(base_max, spike_price, spike_prob)`` is a flat base range
    with a rare large spike.
    """
    try:
        builder = _FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; available: {', '.join(sorted(_FAMILIES))}"
        ) from None
    return builder(**params)
