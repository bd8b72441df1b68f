"""Sources of auction outcomes: stochastic draws and recorded replays."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distribution import PricePmf
from .policies import AuctionFeedback


@dataclass(frozen=True)
class AuctionOutcome:
    """One auction's hidden state: the clearing price, and whether a won
    impression would convert to a click."""

    market_price: int
    click_available: bool = True

    def __post_init__(self):
        if self.market_price < 1:
            raise ValueError(f"market_price must be >= 1, got {self.market_price}")


def resolve_auction(outcome: AuctionOutcome, bid: int, budget: int) -> AuctionFeedback:
    """Apply second-price semantics to one bid.

    A bid at or above the price wins the impression (ties win); the click
    follows only if one was available, and only a click is charged.
    """
    if bid < 0:
        raise ValueError(f"bid must be >= 0, got {bid}")
    if bid > budget:
        raise ValueError(f"bid {bid} exceeds remaining budget {budget}")
    impression = bid >= outcome.market_price
    click = impression and outcome.click_available
    price_paid = outcome.market_price if click else 0
    return AuctionFeedback(
        bid_placed=bid,
        impression_won=impression,
        click_won=click,
        price_paid=price_paid,
        budget_after=budget - price_paid,
    )


class StochasticMarket:
    """I.i.d. prices from a pmf with an independent click coin."""

    def __init__(
        self,
        pmf: PricePmf,
        ctr: float = 1.0,
        rng: np.random.Generator | None = None,
        above_price: int | None = None,
    ):
        if not 0.0 < ctr <= 1.0:
            raise ValueError(f"ctr must be in (0, 1], got {ctr}")
        self.pmf = pmf
        self.ctr = float(ctr)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.above_price = above_price

    def next_outcome(self) -> AuctionOutcome:
        price = self.pmf.sample(self.rng, above_price=self.above_price)
        click = bool(self.rng.random() < self.ctr)
        return AuctionOutcome(price, click)


@dataclass(frozen=True)
class ReplaySequence:
    """An ordered, immutable record of historical auction outcomes."""

    entries: tuple[AuctionOutcome, ...]
    source: str = "<memory>"

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("replay sequence must be non-empty")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def prices(self) -> np.ndarray:
        return np.array([e.market_price for e in self.entries], dtype=np.int64)


def load_replay(path) -> ReplaySequence:
    """Parse a replay file: one ``price,click`` pair per line.

    An optional single ``price,click`` header is skipped, lines starting
    with ``#`` are comments, and blank lines are ignored.  Malformed rows
    fail with their line number.
    """
    path = Path(path)
    entries = []
    header_allowed = True
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header_allowed and line.replace(" ", "") == "price,click":
                header_allowed = False
                continue
            header_allowed = False
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'price,click', got {line!r}")
            try:
                price = int(parts[0])
                click = int(parts[1])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: price and click must be integers, got {line!r}"
                ) from None
            if price < 1:
                raise ValueError(f"{path}:{lineno}: price must be >= 1, got {price}")
            if click not in (0, 1):
                raise ValueError(f"{path}:{lineno}: click must be 0 or 1, got {click}")
            entries.append(AuctionOutcome(price, bool(click)))
    if not entries:
        raise ValueError(f"{path}: no auction rows found")
    return ReplaySequence(tuple(entries), source=str(path))


class ReplayExhausted(Exception):
    """Raised when a replay market runs out of recorded auctions."""


class ReplayMarket:
    """Serves a recorded sequence in order; raises when exhausted."""

    def __init__(self, sequence: ReplaySequence):
        self.sequence = sequence
        self._cursor = 0

    @property
    def cursor(self) -> int:
        return self._cursor

    @property
    def remaining(self) -> int:
        return len(self.sequence) - self._cursor

    def next_outcome(self) -> AuctionOutcome:
        if self._cursor >= len(self.sequence):
            raise ReplayExhausted(f"replay {self.sequence.source} exhausted")
        outcome = self.sequence.entries[self._cursor]
        self._cursor += 1
        return outcome
