"""Logistic miner reputation and deviant-reviewer restriction."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence


class Rating(enum.Enum):
    GOOD = "Good"
    FAIR = "Fair"
    BAD = "Bad"


_VALUES = {Rating.GOOD: 1, Rating.FAIR: 0, Rating.BAD: -1}

DEFAULT_THETA = 0.1


def rating_value(r: Rating) -> int:
    return _VALUES[r]


def logistic_score(total: float, theta: float) -> float:
    """100 / (1 + exp(-theta * total)), evaluated without overflow."""
    x = theta * total
    if x >= 0:
        return 100.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return 100.0 * e / (1.0 + e)


def reputation_score(latest_ratings: Mapping[str, Rating], theta: float = DEFAULT_THETA) -> float:
    """Bounded reputation from each client's latest rating.

    ``latest_ratings`` holds at most one rating per client; the score is the
    logistic of the summed rating values scaled into [0, 100].
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    return logistic_score(sum(_VALUES[r] for r in latest_ratings.values()), theta)


@dataclass(frozen=True)
class ReputationParams:
    theta: float = DEFAULT_THETA
    deviation_window: int = 50
    deviation_fraction: float = 0.6
    min_samples: int = 10
    base_restriction: int = 100
    # services need this many distinct raters before a majority is defined
    min_raters: int = 3

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.deviation_window < 1:
            raise ValueError("deviation_window must be >= 1")
        if not 0 < self.deviation_fraction <= 1:
            raise ValueError("deviation_fraction must lie in (0, 1]")
        if self.base_restriction < 1:
            raise ValueError("base_restriction must be >= 1 tick")


@dataclass(frozen=True)
class RestrictionState:
    client: str
    until: int
    level: int

    def duration(self, params: ReputationParams) -> int:
        return restriction_duration(self.level, params)

    def canonical_fields(self) -> tuple:
        return (self.client, self.until, self.level)


def restriction_duration(level: int, params: ReputationParams) -> int:
    return params.base_restriction << level


def majority_rating(ratings: Iterable[Rating], min_raters: int = 3) -> Optional[Rating]:
    """Strict plurality rating among ``ratings``; None if too few or tied."""
    return majority_from_counts(Counter(ratings), min_raters)


def majority_from_counts(counts: Mapping[Rating, int], min_raters: int = 3) -> Optional[Rating]:
    """Same as :func:`majority_rating` for a pre-tallied rating histogram."""
    if sum(counts.values()) < min_raters:
        return None
    ranked = sorted(((n, r) for r, n in counts.items() if n > 0), key=lambda x: -x[0])
    if len(ranked) > 1 and ranked[0][0] == ranked[1][0]:
        return None
    return ranked[0][1]


def detect_deviant_reviewer(
    client_history: Sequence[tuple[str, Rating]],
    co_rating_majorities: Mapping[str, Optional[Rating]],
    params: ReputationParams,
) -> bool:
    """True when a client's recent reviews consistently diverge from the majority.

    ``client_history`` is the client's rating events oldest first as
    ``(service, rating)`` pairs; ``co_rating_majorities`` maps each service to
    the other raters' majority, or None where no majority exists.  Only the
    newest ``deviation_window`` co-rated events count.
    """
    samples = [
        (rating, co_rating_majorities[svc])
        for svc, rating in client_history
        if co_rating_majorities.get(svc) is not None
    ][-params.deviation_window:]
    if len(samples) < params.min_samples:
        return False
    disagreements = sum(1 for mine, majority in samples if mine is not majority)
    return disagreements / len(samples) > params.deviation_fraction


def apply_restriction(
    state: Optional[RestrictionState], now: int, params: ReputationParams, client: str = ""
) -> RestrictionState:
    """Restrict a client from rating; each repeat offense doubles the duration."""
    if state is None:
        return RestrictionState(client=client, until=now + params.base_restriction, level=0)
    level = state.level + 1
    return RestrictionState(client=state.client, until=now + restriction_duration(level, params), level=level)
