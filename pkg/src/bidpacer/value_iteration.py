"""Exact dynamic-programming solution of the budgeted bidding problem.

The planning state is (remaining budget b, auctions left t).  A bid ``a``
wins a click at price ``delta <= a`` with probability ``ctr * p(delta)``,
paying ``delta``; otherwise the budget carries over.  Backward induction
over t yields the optimal expected clicks and the optimal bid for every
state in O(budget^2 * horizon) arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import PricePmf

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Optimal expected clicks and maximizing bids for every state.

    ``values[b, t]`` is the best expected number of clicks attainable with
    budget ``b`` and ``t`` auctions left; ``policy[b, t]`` is the smallest
    bid achieving it.  Immutable after construction.
    """

    budget_cap: int
    horizon: int
    ctr: float
    values: np.ndarray
    policy: np.ndarray

    def _check_state(self, budget_left: int, auctions_left: int) -> None:
        if not 0 <= budget_left <= self.budget_cap:
            raise ValueError(
                f"budget_left must be in [0, {self.budget_cap}], got {budget_left}"
            )
        if not 0 <= auctions_left <= self.horizon:
            raise ValueError(
                f"auctions_left must be in [0, {self.horizon}], got {auctions_left}"
            )

    def value(self, budget_left: int, auctions_left: int) -> float:
        self._check_state(budget_left, auctions_left)
        return float(self.values[budget_left, auctions_left])

    def best_bid(self, budget_left: int, auctions_left: int) -> int:
        self._check_state(budget_left, auctions_left)
        return int(self.policy[budget_left, auctions_left])


def _backward_induction_numpy(win_prob, keep_prob, ctr, values, policy, cap, steps):
    budgets = np.arange(cap + 1)[:, None]
    deltas = np.arange(1, cap + 1)[None, :]
    left_over = budgets - deltas
    payable = left_over >= 0
    not_payable = ~payable
    left_idx = np.where(payable, left_over, 0)
    over_budget = np.arange(cap + 1)[None, :] > budgets

    gain = np.empty((cap + 1, cap))
    cand = np.empty((cap + 1, cap + 1))
    rows = np.arange(cap + 1)
    for t in range(1, steps + 1):
        prev = values[:, t - 1]
        np.multiply(win_prob[1:][None, :], 1.0 + prev[left_idx], out=gain)
        gain[not_payable] = 0.0
        np.cumsum(gain, axis=1, out=gain)
        cand[:, 0] = prev
        cand[:, 1:] = ctr * gain + keep_prob[1:][None, :] * prev[:, None]
        cand[over_budget] = -1.0  # below any feasible value; masks bids above b
        best = np.argmax(cand, axis=1)  # first maximum, i.e. smallest bid
        policy[:, t] = best
        values[:, t] = cand[rows, best]


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _backward_induction_jit(win_prob, keep_prob, ctr, values, policy, cap, steps):
        prev = np.empty(cap + 1)
        for t in range(1, steps + 1):
            for b in range(cap + 1):
                prev[b] = values[b, t - 1]
            for b in range(cap + 1):
                pv = prev[b]
                best_val = pv  # bidding 0 keeps the budget
                best_a = 0
                win_sum = 0.0
                for a in range(1, b + 1):
                    win_sum += win_prob[a] * (1.0 + prev[b - a])
                    val = ctr * win_sum + keep_prob[a] * pv
                    if val > best_val:
                        best_val = val
                        best_a = a
                values[b, t] = best_val
                policy[b, t] = best_a


def solve(pmf: PricePmf, budget: int, horizon: int, ctr: float = 1.0) -> ValueTable:
    """Compute the optimal value table for a known price distribution.

    The inner maximization reuses the win-branch sum incrementally across
    bids, keeping total work quadratic in the budget rather than cubic.
    Above-support mass only ever contributes to the no-win branch.  Ties in
    the maximizing bid break toward the smaller bid.  A compiled kernel is
    used when numba is available; the numpy fallback computes bit-identical
    tables.
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if not 0.0 < ctr <= 1.0:
        raise ValueError(f"ctr must be in (0, 1], got {ctr}")
    cap, steps = int(budget), int(horizon)
    values = np.zeros((cap + 1, steps + 1))
    policy = np.zeros((cap + 1, steps + 1), dtype=np.int64)
    if cap == 0 or steps == 0:
        return ValueTable(cap, steps, float(ctr), values, policy)

    affordable = min(cap, pmf.support_max)
    win_prob = np.zeros(cap + 1)
    win_prob[1 : affordable + 1] = pmf.mass[:affordable]
    keep_prob = 1.0 - ctr * np.cumsum(win_prob)  # no-click probability per bid

    if _HAVE_NUMBA:
        _backward_induction_jit(win_prob, keep_prob, float(ctr), values, policy, cap, steps)
    else:
        _backward_induction_numpy(win_prob, keep_prob, float(ctr), values, policy, cap, steps)
    return ValueTable(cap, steps, float(ctr), values, policy)


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of a budget search; ``reached`` is False when even the
    maximum useful budget cannot attain the target."""

    budget: int
    value: float
    reached: bool


def calibrate_budget(
    pmf: PricePmf, horizon: int, fraction: float, ctr: float = 1.0
) -> CalibrationResult:
    """Smallest budget whose optimal value reaches ``fraction * horizon``.

    Exploits monotonicity of the value in the budget with an exponential
    probe followed by binary search.  With budget ``horizon * support_max``
    every localized price is always affordable, so the value tops out at
    ``ctr * (1 - above_mass) * horizon``; an unreachable target reports that
    cap with ``reached=False`` instead of silently clamping.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    target = fraction * horizon
    slack = 1e-9
    cap = horizon * pmf.support_max
    best_possible = ctr * (1.0 - pmf.above_mass) * horizon
    if best_possible < target - slack:
        return CalibrationResult(cap, best_possible, False)

    def value_at(b: int) -> float:
        if b >= cap:
            return best_possible
        return float(solve(pmf, b, horizon, ctr).values[b, horizon])

    lo = 0
    hi = 1
    v_hi = value_at(hi)
    while v_hi < target - slack:
        if hi >= cap:
            return CalibrationResult(cap, v_hi, False)
        lo = hi
        hi = min(hi * 2, cap)
        v_hi = value_at(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        v_mid = value_at(mid)
        if v_mid >= target - slack:
            hi, v_hi = mid, v_mid
        else:
            lo = mid
    return CalibrationResult(hi, v_hi, True)


def lueker_threshold(pmf: PricePmf, budget_left: int, auctions_left: int) -> int:
    """Largest price whose expected per-auction spend fits the budget pace.

    Returns the largest ``v`` with ``sum_{a<=v} a * p(a) <= budget_left /
    auctions_left``, capped at the remaining budget; zero when even the
    cheapest price overshoots the pace.
    """
    if auctions_left < 1:
        raise ValueError(f"auctions_left must be >= 1, got {auctions_left}")
    if budget_left < 0:
        raise ValueError(f"budget_left must be >= 0, got {budget_left}")
    if budget_left == 0:
        return 0
    pace = budget_left / auctions_left
    expected_cost = np.cumsum(np.arange(1, pmf.support_max + 1) * pmf.mass)
    v = int(np.searchsorted(expected_cost, pace + 1e-12, side="right"))
    return min(v, budget_left)
