"""Bidding policies behind one behavioral contract.

Every policy maps (remaining budget, auctions left) to a feasible bid and
receives exactly one feedback record per auction.  Learning policies keep a
censored observation log and re-estimate the price distribution as feedback
arrives; the planner-backed policy re-solves its value table whenever the
estimate changes.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .censored import CensoredSample, ObservationLog, product_limit, turnbull
from .distribution import PricePmf, point_mass
from .value_iteration import ValueTable, lueker_threshold, solve


class PolicyContractError(RuntimeError):
    """A policy violated its bidding contract (for example bid over budget)."""


@dataclass(frozen=True)
class AuctionFeedback:
    """Everything a bidder learns from one auction.

    A click implies an impression and a charge of the market price, which
    never exceeds the bid; without a click the budget is untouched.
    """

    bid_placed: int
    impression_won: bool
    click_won: bool
    price_paid: int
    budget_after: int

    def __post_init__(self):
        if self.bid_placed < 0:
            raise ValueError(f"bid_placed must be >= 0, got {self.bid_placed}")
        if self.click_won and not self.impression_won:
            raise ValueError("click_won requires impression_won")
        if self.click_won:
            if not 1 <= self.price_paid <= self.bid_placed:
                raise ValueError(
                    f"charge {self.price_paid} inconsistent with winning bid {self.bid_placed}"
                )
        elif self.price_paid != 0:
            raise ValueError("price_paid must be 0 without a click")
        if self.budget_after < 0:
            raise ValueError(f"budget_after must be >= 0, got {self.budget_after}")


class BidPolicy(ABC):
    """Behavioral contract for all bidding strategies.

    ``next_bid(b, t)`` must return an integer in ``[0, b]``; ``observe`` is
    called exactly once per auction with that bid's feedback before the next
    ``next_bid``.  The harness calls ``begin_period``/``end_period`` around
    each budget cycle.
    """

    name = "policy"

    def begin_period(self) -> None:
        pass

    def end_period(self) -> None:
        pass

    @abstractmethod
    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        ...

    def observe(self, feedback: AuctionFeedback) -> None:
        pass


class _CensoredLearner(BidPolicy):
    """Shared feedback bookkeeping for policies that learn the price pmf.

    Clicks yield direct observations at the paid price, lost impressions
    right-censor at bid + 1, and clickless impressions left-censor there.
    The estimate starts from a uniform prior on ``1..budget`` and is fully
    replaced by the censored MLE once observations exist; mixed censoring
    switches the estimator from product-limit to the self-consistent one.
    A frozen pmf disables learning entirely.
    """

    def __init__(
        self,
        budget: int,
        horizon: int,
        ctr: float = 1.0,
        frozen_pmf: PricePmf | None = None,
        turnbull_tol: float = 1e-9,
        turnbull_max_iter: int = 10_000,
    ):
        if budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.budget_cap = int(budget)
        self.horizon = int(horizon)
        self.ctr = float(ctr)
        self.turnbull_tol = turnbull_tol
        self.turnbull_max_iter = turnbull_max_iter
        self.log = ObservationLog()
        self._frozen = frozen_pmf is not None
        if frozen_pmf is not None:
            self._estimate = frozen_pmf
        elif self.budget_cap >= 1:
            self._estimate = PricePmf(np.full(self.budget_cap, 1.0 / self.budget_cap))
        else:
            self._estimate = point_mass(1)

    @property
    def estimate(self) -> PricePmf:
        return self._estimate

    def observe(self, feedback: AuctionFeedback) -> None:
        if self._frozen:
            return
        bound = feedback.bid_placed + 1
        if feedback.click_won:
            sample = CensoredSample.direct(feedback.price_paid, bound)
        elif feedback.impression_won:
            sample = CensoredSample.left_censored(bound)
        else:
            sample = CensoredSample.right_censored(bound)
        self.log.append(sample)
        support = max(self.budget_cap, 1)
        if self.log.has_left_censored:
            self._estimate = turnbull(
                self.log, support, tol=self.turnbull_tol, max_iter=self.turnbull_max_iter
            ).pmf
        else:
            self._estimate = product_limit(self.log, support)
        self._estimate_changed()

    def _estimate_changed(self) -> None:
        pass


class GreedyProductLimit(_CensoredLearner):
    """Bid the planner's optimal action against the running censored estimate.

    By default the value table is re-solved every time the estimate moves,
    i.e. after every auction; ``resolve="period"`` defers the re-solve to
    period boundaries, trading fidelity for speed.
    """

    name = "greedy_product_limit"

    def __init__(self, budget, horizon, ctr=1.0, resolve="auction", **kwargs):
        super().__init__(budget, horizon, ctr=ctr, **kwargs)
        if resolve not in ("auction", "period"):
            raise ValueError(f"resolve must be 'auction' or 'period', got {resolve!r}")
        self.resolve = resolve
        self._table: ValueTable | None = None
        self._stale = False

    def begin_period(self) -> None:
        if self._stale:
            self._table = None

    @property
    def planning_table(self) -> ValueTable:
        if self._table is None:
            self._table = solve(self._estimate, self.budget_cap, self.horizon, self.ctr)
            self._stale = False
        return self._table

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        return self.planning_table.best_bid(budget_left, auctions_left)

    def _estimate_changed(self) -> None:
        self._stale = True
        if self.resolve == "auction":
            self._table = None


class LuekerLearn(_CensoredLearner):
    """Bid the pace-fitting price threshold against the running estimate."""

    name = "lueker_learn"

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        if auctions_left == 0:
            return 0
        return lueker_threshold(self._estimate, budget_left, auctions_left)


class FixedPrice(BidPolicy):
    """Always bid one price.

    When the remaining budget falls below the price, the default clamps the
    bid to the budget; ``strict_abstain`` stops bidding instead.
    """

    name = "fixed_price"

    def __init__(self, price: int, strict_abstain: bool = False):
        if price < 0:
            raise ValueError(f"price must be >= 0, got {price}")
        self.price = int(price)
        self.strict_abstain = bool(strict_abstain)

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        if self.strict_abstain:
            return self.price if self.price <= budget_left else 0
        return min(self.price, budget_left)


class FixedPriceSearch(BidPolicy):
    """Play one fixed price per period, chosen by adversarial-bandit weights.

    Arms form a geometric price grid up to the budget.  Each period draws an
    arm from the exploration-mixed weight distribution, and the period's
    click rate updates that arm's weight through the usual importance-
    weighted exponential step.
    """

    name = "fixed_price_search"

    def __init__(
        self,
        budget: int,
        horizon: int,
        rng: np.random.Generator | None = None,
        grid_ratio: float = 1.3,
        gamma: float = 0.1,
        strict_abstain: bool = False,
    ):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        if grid_ratio <= 1.0:
            raise ValueError(f"grid_ratio must exceed 1, got {grid_ratio}")
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {gamma}")
        self.horizon = int(horizon)
        self.gamma = float(gamma)
        self.strict_abstain = bool(strict_abstain)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.grid = self._build_grid(int(budget), float(grid_ratio))
        self.weights = np.ones(len(self.grid))
        self._arm: int | None = None
        self._arm_prob = 0.0
        self._clicks = 0

    @staticmethod
    def _build_grid(budget: int, ratio: float) -> list[int]:
        if budget < 1:
            return [0]
        prices = set()
        level = 1.0
        while True:
            price = math.ceil(level)
            if price > budget:
                break
            prices.add(price)
            level *= ratio
        return sorted(prices)

    def arm_probabilities(self) -> np.ndarray:
        k = len(self.grid)
        mixed = (1.0 - self.gamma) * self.weights / self.weights.sum()
        return mixed + self.gamma / k

    def begin_period(self) -> None:
        probs = self.arm_probabilities()
        self._arm = int(self.rng.choice(len(self.grid), p=probs))
        self._arm_prob = float(probs[self._arm])
        self._clicks = 0

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        if self._arm is None:
            self.begin_period()
        price = self.grid[self._arm]
        if self.strict_abstain:
            return price if price <= budget_left else 0
        return min(price, budget_left)

    def observe(self, feedback: AuctionFeedback) -> None:
        self._clicks += int(feedback.click_won)

    def end_period(self) -> None:
        if self._arm is None:
            return
        reward = self._clicks / self.horizon
        estimate = reward / self._arm_prob
        self.weights[self._arm] *= math.exp(self.gamma * estimate / len(self.grid))
        self.weights /= self.weights.max()
        self._arm = None


class QLearning(BidPolicy):
    """Tabular action-value learning over (budget, auctions-left) states.

    Bids epsilon-greedily over the feasible actions, updating the last
    state-action value toward the click indicator plus the best successor
    value; exhausted horizons bootstrap at zero.  Epsilon decays by a fixed
    factor at each period boundary.
    """

    name = "q_learning"

    def __init__(
        self,
        budget: int,
        horizon: int,
        rng: np.random.Generator | None = None,
        alpha: float = 0.1,
        epsilon: float = 0.1,
        epsilon_decay: float = 0.995,
    ):
        if budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        self.budget_cap = int(budget)
        self.horizon = int(horizon)
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.epsilon_decay = float(epsilon_decay)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.q = np.zeros((self.budget_cap + 1, self.horizon + 1, self.budget_cap + 1))
        self._pending: tuple[int, int, int] | None = None
        self._periods_seen = 0

    def begin_period(self) -> None:
        if self._periods_seen > 0:
            self.epsilon *= self.epsilon_decay
        self._periods_seen += 1

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        if self.rng.random() < self.epsilon:
            bid = int(self.rng.integers(0, budget_left + 1))
        else:
            bid = int(np.argmax(self.q[budget_left, auctions_left, : budget_left + 1]))
        self._pending = (budget_left, auctions_left, bid)
        return bid

    def observe(self, feedback: AuctionFeedback) -> None:
        if self._pending is None:
            raise PolicyContractError("observe() without a pending bid")
        b, t, a = self._pending
        self._pending = None
        reward = 1.0 if feedback.click_won else 0.0
        nb, nt = feedback.budget_after, t - 1
        bootstrap = 0.0 if nt == 0 else float(np.max(self.q[nb, nt, : nb + 1]))
        self.q[b, t, a] = (1.0 - self.alpha) * self.q[b, t, a] + self.alpha * (
            reward + bootstrap
        )


class BudgetSmoothing(BidPolicy):
    """Logistic pacing of the remaining budget fraction.

    The raw pacing curve lives in (0, 1); a configurable scale (default one
    tenth of the budget, at least 1) converts it to currency units so the
    bid can actually clear integer prices.
    """

    name = "budget_smoothing"

    def __init__(self, budget: int, scale: float | None = None):
        if budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        self.budget_cap = int(budget)
        if scale is None:
            scale = max(1.0, budget / 10.0)
        if scale < 1:
            raise ValueError(f"scale must be >= 1, got {scale}")
        self.scale = float(scale)

    def next_bid(self, budget_left: int, auctions_left: int) -> int:
        if budget_left == 0:
            return 0
        z = budget_left / self.budget_cap
        bid = round(self.scale / (1.0 + math.exp(z - 1.0)))
        return min(budget_left, bid)


_POLICY_ALIASES = {
    "gpl": "greedy_product_limit",
    "greedy_product_limit": "greedy_product_limit",
    "lueker": "lueker_learn",
    "lueker_learn": "lueker_learn",
    "fixed": "fixed_price",
    "fixed_price": "fixed_price",
    "fps": "fixed_price_search",
    "fixed_price_search": "fixed_price_search",
    "qlearn": "q_learning",
    "q_learning": "q_learning",
    "smoothing": "budget_smoothing",
    "budget_smoothing": "budget_smoothing",
}


def available_policies() -> list[str]:
    return sorted(set(_POLICY_ALIASES.values()))


def canonical_policy_name(name: str) -> str:
    """Resolve a policy name or alias to its canonical form."""
    canonical = _POLICY_ALIASES.get(name)
    if canonical is None:
        raise ValueError(
            f"unknown policy {name!r}; available: {', '.join(available_policies())}"
        )
    return canonical


def _pop_typed(params: dict, key: str, cast, default):
    if key in params:
        return cast(params.pop(key))
    return default


def make_policy(
    name: str,
    budget: int,
    horizon: int,
    ctr: float = 1.0,
    rng: np.random.Generator | None = None,
    **params,
) -> BidPolicy:
    """Construct a policy by name with per-policy hyperparameters.

    Unknown names and unknown hyperparameters are rejected with the list of
    valid choices, so configuration typos fail loudly.
    """
    canonical = canonical_policy_name(name)
    params = dict(params)
    if canonical == "greedy_product_limit":
        policy = GreedyProductLimit(
            budget,
            horizon,
            ctr=_pop_typed(params, "ctr", float, ctr),
            resolve=_pop_typed(params, "resolve", str, "auction"),
            turnbull_tol=_pop_typed(params, "turnbull_tol", float, 1e-9),
            turnbull_max_iter=_pop_typed(params, "turnbull_max_iter", int, 10_000),
        )
    elif canonical == "lueker_learn":
        policy = LuekerLearn(
            budget,
            horizon,
            ctr=_pop_typed(params, "ctr", float, ctr),
            turnbull_tol=_pop_typed(params, "turnbull_tol", float, 1e-9),
            turnbull_max_iter=_pop_typed(params, "turnbull_max_iter", int, 10_000),
        )
    elif canonical == "fixed_price":
        if "price" not in params:
            raise ValueError("fixed_price requires a 'price' parameter")
        policy = FixedPrice(
            int(params.pop("price")),
            strict_abstain=_pop_typed(params, "strict_abstain", bool, False),
        )
    elif canonical == "fixed_price_search":
        policy = FixedPriceSearch(
            budget,
            horizon,
            rng=rng,
            grid_ratio=_pop_typed(params, "grid_ratio", float, 1.3),
            gamma=_pop_typed(params, "gamma", float, 0.1),
            strict_abstain=_pop_typed(params, "strict_abstain", bool, False),
        )
    elif canonical == "q_learning":
        policy = QLearning(
            budget,
            horizon,
            rng=rng,
            alpha=_pop_typed(params, "alpha", float, 0.1),
            epsilon=_pop_typed(params, "epsilon", float, 0.1),
            epsilon_decay=_pop_typed(params, "epsilon_decay", float, 0.995),
        )
    else:
        scale = params.pop("scale", None)
        if scale in (None, "auto"):
            scale = None
        else:
            scale = float(scale)
        policy = BudgetSmoothing(budget, scale=scale)
    if params:
        raise ValueError(
            f"unknown parameter(s) for {canonical}: {', '.join(sorted(params))}"
        )
    return policy
