"""Contribution accounting, inflation-funded epoch pools and reward apportionment.

All arithmetic is exact: service weights and contributions are
:class:`~fractions.Fraction` values, pools are integer base units, and the
proportional split uses largest-remainder rounding so the pool is always
paid out to the last unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .assets import AssetKind, USD_MICRO
from .errors import UnknownServiceType

Number = Union[int, float, str, Fraction]

DEFAULT_SERVICE_WEIGHTS = {"text": Fraction(1), "image": Fraction(4)}
DEFAULT_Q = Fraction(1, 10)


def as_fraction(x: Number) -> Fraction:
    """Exact conversion; floats go through ``str`` so 0.1 stays 1/10."""
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


class ServiceWeightTable:
    """Per-service contribution weights, fixed for the duration of an epoch."""

    def __init__(self, weights: Optional[Mapping[str, Number]] = None) -> None:
        src = DEFAULT_SERVICE_WEIGHTS if weights is None else weights
        table = {k: as_fraction(v) for k, v in src.items()}
        for name, w in table.items():
            if w <= 0:
                raise ValueError(f"service weight for {name!r} must be positive")
        self._weights = table
        self._staged: Optional[dict[str, Fraction]] = None

    def weight(self, service_type: str) -> Fraction:
        try:
            return self._weights[service_type]
        except KeyError:
            raise UnknownServiceType(service_type) from None

    def __contains__(self, service_type: str) -> bool:
        return service_type in self._weights

    def services(self) -> list[str]:
        return sorted(self._weights)

    def stage_update(self, weights: Mapping[str, Number]) -> None:
        """Queue an exogenous (DAO) weight change; it takes effect at the next epoch."""
        staged = {k: as_fraction(v) for k, v in weights.items()}
        if any(w <= 0 for w in staged.values()):
            raise ValueError("service weights must be positive")
        self._staged = staged

    def apply_staged(self) -> bool:
        if self._staged is None:
            return False
        self._weights.update(self._staged)
        self._staged = None
        return True

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self._weights)

    def canonical_fields(self) -> tuple:
        return (self._weights,)


@dataclass
class ContributionLedger:
    contributions: dict[str, Fraction] = field(default_factory=dict)
    epoch_start: int = 0
    epoch_end: Optional[int] = None

    def get(self, miner: str) -> Fraction:
        return self.contributions.get(miner, Fraction(0))

    def total(self) -> Fraction:
        return sum(self.contributions.values(), Fraction(0))

    def reset(self, epoch_start: int) -> None:
        self.contributions = {}
        self.epoch_start = epoch_start
        self.epoch_end = None

    def canonical_fields(self) -> tuple:
        return (self.contributions, self.epoch_start, self.epoch_end)


@dataclass(frozen=True)
class RewardEpoch:
    pool: int
    allocations: dict[str, int]
    epoch_index: int = 0
    # pool carried to the next epoch when nobody contributed
    carried: int = 0

    @property
    def distributed(self) -> int:
        return sum(self.allocations.values())


def record_contribution(
    cl: ContributionLedger, miner: str, service_type: str, count: int, weights: ServiceWeightTable
) -> None:
    if count < 1:
        raise ValueError("count must be >= 1")
    w = weights.weight(service_type)
    cl.contributions[miner] = cl.get(miner) + count * w


def epoch_pool(total_supply: int, annual_inflation: Number, epochs_per_year: int) -> int:
    """Tokens minted for one epoch: linear pro-ration of the annual rate."""
    rate = as_fraction(annual_inflation)
    if rate < 0:
        raise ValueError("annual_inflation must be non-negative")
    if epochs_per_year < 1:
        raise ValueError("epochs_per_year must be >= 1")
    return (total_supply * rate.numerator) // (rate.denominator * epochs_per_year)


def largest_remainder(shares: Mapping[str, Fraction], total: int) -> dict[str, int]:
    """Apportion ``total`` units by exact ``shares``.

    Every key gets the floor of its quota; leftover units go to the largest
    fractional remainders, ties to the smallest key.
    """
    weight_sum = sum(shares.values(), Fraction(0))
    if weight_sum <= 0:
        raise ValueError("shares must sum to a positive value")
    quotas = {k: total * v / weight_sum for k, v in shares.items()}
    alloc = {k: q.numerator // q.denominator for k, q in quotas.items()}
    leftover = total - sum(alloc.values())
    by_remainder = sorted(quotas, key=lambda k: (-(quotas[k] - alloc[k]), k))
    for k in by_remainder[:leftover]:
        alloc[k] += 1
    return alloc


def distribute(cl: ContributionLedger, pool: int, epoch_index: int = 0) -> RewardEpoch:
    """Split ``pool`` in proportion to contribution, then reset the ledger.

    With zero total contribution nothing is allocated and the whole pool is
    reported as carried to the next epoch.
    """
    if pool < 0:
        raise ValueError("pool must be non-negative")
    positive = {m: c for m, c in cl.contributions.items() if c > 0}
    end = cl.epoch_end
    if not positive:
        cl.reset(end if end is not None else cl.epoch_start)
        return RewardEpoch(pool=pool, allocations={}, epoch_index=epoch_index, carried=pool)
    allocations = largest_remainder(positive, pool)
    cl.reset(end if end is not None else cl.epoch_start)
    return RewardEpoch(pool=pool, allocations=dict(sorted(allocations.items())), epoch_index=epoch_index)


def service_volume_allowance(value_usd_micro: int, asset: AssetKind, q: Number = DEFAULT_Q) -> int:
    """Service units granted for a stake worth ``value_usd_micro``.

    One unit per whole dollar of native tokens; external assets are
    discounted by ``q``.
    """
    qf = as_fraction(q)
    if not 0 < qf <= 1:
        raise ValueError("q must lie in (0, 1]")
    if value_usd_micro < 0:
        raise ValueError("value must be non-negative")
    if asset.is_native:
        return value_usd_micro // USD_MICRO
    return (value_usd_micro * qf.numerator) // (USD_MICRO * qf.denominator)
