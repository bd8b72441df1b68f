"""Simulation loop, offline benchmarks and competitive-ratio metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .market import AuctionOutcome, ReplayExhausted, resolve_auction
from .policies import AuctionFeedback, BidPolicy, PolicyContractError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuctionRecord:
    """One simulated auction: how many were left, what was bid, what came back."""

    auctions_left: int
    bid: int
    feedback: AuctionFeedback


@dataclass
class PeriodLog:
    """Everything that happened during one budget cycle."""

    period_index: int
    budget: int
    horizon: int
    records: list[AuctionRecord] = field(default_factory=list)
    outcomes: list[AuctionOutcome] = field(default_factory=list)
    truncated: bool = False

    @property
    def clicks(self) -> int:
        return sum(1 for r in self.records if r.feedback.click_won)

    @property
    def spend(self) -> int:
        return sum(r.feedback.price_paid for r in self.records)


def run_simulation(
    policy: BidPolicy,
    market,
    budget: int,
    horizon: int,
    periods: int = 1,
) -> list[PeriodLog]:
    """Run the period/auction protocol and log every auction.

    Each period refreshes the budget; each auction asks the policy for a bid
    (which must stay within the remaining budget), resolves it against the
    market, charges any click, and hands the feedback back to the policy.
    A market that runs out of data truncates the final period, flagged on
    its log.
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if periods < 1:
        raise ValueError(f"periods must be >= 1, got {periods}")
    logs: list[PeriodLog] = []
    for u in range(periods):
        policy.begin_period()
        log = PeriodLog(period_index=u, budget=budget, horizon=horizon)
        remaining = budget
        for t in range(horizon, 0, -1):
            try:
                outcome = market.next_outcome()
            except ReplayExhausted:
                log.truncated = True
                logger.warning(
                    "market exhausted at period %d with %d auctions left", u, t
                )
                break
            bid = int(policy.next_bid(remaining, t))
            if not 0 <= bid <= remaining:
                raise PolicyContractError(
                    f"{policy.name} bid {bid} outside [0, {remaining}] at t={t}"
                )
            feedback = resolve_auction(outcome, bid, remaining)
            remaining = feedback.budget_after
            policy.observe(feedback)
            log.records.append(AuctionRecord(t, bid, feedback))
            log.outcomes.append(outcome)
        policy.end_period()
        logs.append(log)
        if log.truncated:
            break
    return logs


def offline_optimal(outcomes, budget: int) -> int:
    """Clicks attainable with full foresight: cheapest available clicks first."""
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    prices = sorted(o.market_price for o in outcomes if o.click_available)
    clicks = 0
    spend = 0
    for price in prices:
        if spend + price > budget:
            break
        spend += price
        clicks += 1
    return clicks


def competitive_ratio(logs, reference: float) -> float:
    """Average per-period clicks divided by a per-period reference optimum."""
    if reference <= 0:
        raise ValueError(f"reference must be > 0, got {reference}")
    if not logs:
        raise ValueError("no period logs to evaluate")
    total = sum(log.clicks for log in logs)
    return (total / len(logs)) / reference


def cumulative_ratio_series(logs, reference_total: float) -> list[float]:
    """Cumulative clicks after each period divided by a whole-run optimum."""
    if reference_total <= 0:
        raise ValueError(f"reference_total must be > 0, got {reference_total}")
    series = []
    running = 0
    for log in logs:
        running += log.clicks
        series.append(running / reference_total)
    return series


@dataclass(frozen=True)
class CurvePoint:
    """Cumulative performance after one auction, for the policy and for the
    offline-optimal prefix benchmark."""

    auction: int
    policy_clicks: int
    policy_normalized: float
    offline_clicks: int
    offline_normalized: float


def convergence_curve(logs) -> list[CurvePoint]:
    """Per-auction cumulative clicks, normalized by auctions elapsed.

    The offline benchmark credits completed periods with their full-budget
    optimum; within the running period the prefix optimum uses a budget
    prorated as ``floor(budget * elapsed / horizon)``.
    """
    if not logs or not logs[0].records:
        raise ValueError("need at least one recorded auction")
    points: list[CurvePoint] = []
    auction = 0
    policy_cum = 0
    offline_done = 0
    for log in logs:
        for j, record in enumerate(log.records, start=1):
            auction += 1
            policy_cum += int(record.feedback.click_won)
            prorated = (log.budget * j) // log.horizon
            offline = offline_done + offline_optimal(log.outcomes[:j], prorated)
            points.append(
                CurvePoint(auction, policy_cum, policy_cum / auction, offline,
                           offline / auction if auction else 0.0)
            )
        offline_done += offline_optimal(log.outcomes, log.budget)
    return points


def paired_ttest(ratios_a, ratios_b) -> tuple[float, float]:
    """Paired two-sample t statistic and p-value for per-trial ratios."""
    a = np.asarray(ratios_a, dtype=float)
    b = np.asarray(ratios_b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length samples with at least 2 trials")
    with np.errstate(all="ignore"):
        result = stats.ttest_rel(a, b)
    return float(result.statistic), float(result.pvalue)
