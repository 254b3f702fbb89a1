"""Token supply accounting, charged-order payments and provider listing."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .assets import check_amount
from .errors import (
    ConservationViolation,
    EmptyListing,
    InsufficientBalance,
    NotCharged,
    NotCompleted,
)
from .rewards import Number, as_fraction, epoch_pool


@dataclass
class TokenState:
    """Where every minted native base unit currently sits.

    ``total_minted`` always equals the sum of the five buckets; the ledger
    calls :meth:`check` after every mutation.
    """

    total_minted: int = 0
    circulating: int = 0
    locked_stakes: int = 0
    locked_collateral: int = 0
    escrowed: int = 0
    reward_pool: int = 0

    def held(self) -> int:
        return self.circulating + self.locked_stakes + self.locked_collateral + self.escrowed + self.reward_pool

    def check(self) -> None:
        for name in ("total_minted", "circulating", "locked_stakes", "locked_collateral", "escrowed", "reward_pool"):
            v = getattr(self, name)
            if v < 0:
                raise ConservationViolation(f"{name} went negative: {v}")
            check_amount(v)
        if self.total_minted != self.held():
            raise ConservationViolation(
                f"total_minted {self.total_minted} != buckets {self.held()} ({self})"
            )

    def move(self, src: str, dst: str, amount: int) -> None:
        check_amount(amount)
        have = getattr(self, src)
        if have < amount:
            raise InsufficientBalance(f"{src} holds {have}, need {amount}")
        setattr(self, src, have - amount)
        setattr(self, dst, getattr(self, dst) + amount)

    def mint(self, amount: int, into: str = "reward_pool") -> None:
        check_amount(amount)
        self.total_minted = check_amount(self.total_minted + amount)
        setattr(self, into, getattr(self, into) + amount)

    def canonical_fields(self) -> tuple:
        return (
            self.total_minted,
            self.circulating,
            self.locked_stakes,
            self.locked_collateral,
            self.escrowed,
            self.reward_pool,
        )


@dataclass(frozen=True)
class InflationParams:
    annual_inflation: Fraction = Fraction(5, 100)
    epochs_per_year: int = 100


@dataclass(frozen=True)
class EpochFlows:
    locks: int = 0
    unlocks: int = 0
    # amount paid out of the reward pool into circulation this epoch
    distributed: int = 0


@dataclass(frozen=True)
class SupplyReport:
    minted: int
    circulating_delta: int
    deflationary: bool


def advance_epoch(
    token: TokenState, params: InflationParams, flows: EpochFlows = EpochFlows()
) -> tuple[TokenState, SupplyReport]:
    """Mint the epoch pool, apply stake flows and payouts; returns a new state.

    The circulating delta is exactly ``unlocks - locks + distributed``.
    """
    token.check()
    out = replace(token)
    minted = epoch_pool(out.total_minted, params.annual_inflation, params.epochs_per_year)
    out.mint(minted)
    out.move("circulating", "locked_stakes", flows.locks)
    out.move("locked_stakes", "circulating", flows.unlocks)
    out.move("reward_pool", "circulating", flows.distributed)
    out.check()
    delta = out.circulating - token.circulating
    return out, SupplyReport(minted=minted, circulating_delta=delta, deflationary=delta < 0)


@dataclass(frozen=True)
class FeePolicy:
    coordinator_fee_rate: Fraction = Fraction(2, 100)

    def __post_init__(self) -> None:
        if not 0 <= self.coordinator_fee_rate < 1:
            raise ValueError("coordinator_fee_rate must lie in [0, 1)")

    @classmethod
    def of(cls, rate: Number) -> "FeePolicy":
        return cls(as_fraction(rate))


def fee_split(price: int, fee: FeePolicy) -> tuple[int, int]:
    """(miner_amount, coordinator_fee) with the fee rounded down."""
    r = fee.coordinator_fee_rate
    coordinator = (price * r.numerator) // r.denominator
    return price - coordinator, coordinator


def charged_payment(ledger, order_id: int, fee: FeePolicy) -> tuple[int, int]:
    """Release a completed charged order's escrow to its miner and the coordinators."""
    order = ledger.get_order(order_id)
    price = getattr(order.mode, "price", None)
    if price is None:
        raise NotCharged(f"order {order_id} is uncharged")
    record = ledger.task_cycles.get(order_id)
    if record is None or record.completion_sig is None:
        raise NotCompleted(f"order {order_id} is not completed")
    if ledger.escrow.get(order_id, 0) != price:
        raise ConservationViolation(f"escrow for order {order_id} does not hold its price")
    miner_amount, coordinator_fee = fee_split(price, fee)
    del ledger.escrow[order_id]
    ledger.token.move("escrowed", "circulating", price)
    ledger.credit(record.miner, miner_amount)
    ledger.credit(ledger.fee_account, coordinator_fee)
    record.value_moved = price
    return miner_amount, coordinator_fee


@dataclass(frozen=True)
class ListingEntry:
    miner: str
    customer_rating: float
    subscriber_count: int
    tokens_staked: int
    services: frozenset[str]


def display_rating(reputation: float) -> float:
    """Map reputation in [0, 100] onto a 1-5 star rating."""
    return 1.0 + 4.0 * reputation / 100.0


DEFAULT_LISTING_WEIGHTS = {"rating": 0.5, "subscribers": 0.2, "staked": 0.3}

_FACTORS = {
    "rating": lambda e: e.customer_rating,
    "subscribers": lambda e: e.subscriber_count,
    "staked": lambda e: e.tokens_staked,
}


def _min_max(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def listing_scores(entries: Sequence[ListingEntry], factor_weights: Mapping[str, float]) -> dict[str, float]:
    scores = [0.0] * len(entries)
    for name, w in factor_weights.items():
        if w == 0:
            continue
        column = _min_max([_FACTORS[name](e) for e in entries])
        for i, v in enumerate(column):
            scores[i] += w * v
    return {e.miner: s for e, s in zip(entries, scores)}


def rank_providers(
    entries: Iterable[ListingEntry],
    factor_weights: Optional[Mapping[str, float]] = None,
    service: Optional[str] = None,
) -> list[str]:
    """Order providers for display, best first.

    Each factor is min-max normalized across the listing that remains after
    filtering on ``service``; ties fall back to ascending miner id.
    """
    weights = dict(DEFAULT_LISTING_WEIGHTS if factor_weights is None else factor_weights)
    unknown = set(weights) - set(_FACTORS)
    if unknown:
        raise ValueError(f"unknown listing factors: {sorted(unknown)}")
    if any(w < 0 for w in weights.values()) or not any(w > 0 for w in weights.values()):
        raise ValueError("factor weights must be non-negative and not all zero")
    listing = [e for e in entries if service is None or service in e.services]
    if not listing:
        raise EmptyListing("no provider offers the requested service")
    scores = listing_scores(listing, weights)
    return sorted(scores, key=lambda m: (-scores[m], m))
