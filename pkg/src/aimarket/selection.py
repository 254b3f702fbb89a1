"""Reputation-weighted verifiable random miner selection.

The randomness beacon is a keyed-hash stand-in for a VRF: it exposes the
same eval/verify pair, so a real VRF can replace it without touching the
selection code.
"""

from __future__ import annotations

import hashlib
import hmac
import threading
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Sequence

from .encoding import encode_fields
from .errors import AlreadyAllocated, EmptyInput, NoEligibleMiners, ZeroTotalReputation

_VALUE_DOMAIN = b"aimarket/beacon/value\x00"
_PROOF_DOMAIN = b"aimarket/beacon/proof\x00"


@dataclass
class RandomnessBeacon:
    seed_key: bytes
    counter: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.seed_key) != 32:
            raise ValueError("seed_key must be 32 bytes")


def beacon_eval(beacon: RandomnessBeacon, data: bytes) -> tuple[bytes, bytes]:
    """Return ``(value, proof)`` for ``data``; deterministic in (key, data)."""
    if not data:
        raise EmptyInput("beacon input must be non-empty")
    value = hmac.new(beacon.seed_key, _VALUE_DOMAIN + data, hashlib.sha256).digest()
    proof = hmac.new(beacon.seed_key, _PROOF_DOMAIN + data + value, hashlib.sha256).digest()
    with beacon._lock:
        beacon.counter += 1
    return value, proof


def beacon_verify(beacon: RandomnessBeacon, value: bytes, proof: bytes, data: bytes) -> bool:
    if not data:
        return False
    expected = hmac.new(beacon.seed_key, _VALUE_DOMAIN + data, hashlib.sha256).digest()
    if not hmac.compare_digest(expected, value):
        return False
    expected_proof = hmac.new(beacon.seed_key, _PROOF_DOMAIN + data + value, hashlib.sha256).digest()
    return hmac.compare_digest(expected_proof, proof)


@dataclass(frozen=True)
class EligibleSet:
    miners: tuple[tuple[str, float], ...]
    context: bytes = b""


def unit_interval(value: bytes) -> float:
    """Uniform draw in [0, 1) from the leading bits of ``value``.

    Only 53 bits are kept: a full 64-bit numerator can round up to 1.0.
    """
    return (int.from_bytes(value[:8], "big") >> 11) * 2.0**-53


def select_miner(value: bytes, eligible: EligibleSet) -> str:
    """Roulette wheel: the miner whose cumulative-reputation interval holds u * total."""
    miners = eligible.miners
    if not miners:
        raise NoEligibleMiners("eligible set is empty")
    cumulative = list(accumulate(r for _, r in miners))
    total = cumulative[-1]
    if not total > 0:
        raise ZeroTotalReputation("sum of reputations is zero")
    target = unit_interval(value) * total
    # first interval whose upper edge is strictly above target; zero-width
    # intervals can never satisfy that
    idx = bisect_right(cumulative, target)
    if idx >= len(miners):
        idx = max(i for i, (_, r) in enumerate(miners) if r > 0)
    return miners[idx][0]


def selection_probabilities(reputations: Sequence[float]) -> list[float]:
    total = sum(reputations)
    return [r / total for r in reputations]


def route_request(ledger, order, beacon: RandomnessBeacon) -> str:
    """Pick the miner for an unallocated order.

    Charged orders that name a provider get that provider when it is
    eligible; everything else goes through the weighted beacon draw keyed on
    the order id, so a client cannot steer its request.
    """
    if order.id in ledger.task_cycles:
        raise AlreadyAllocated(order.id)
    eligible = ledger.eligible_miners(order.service_type)
    chosen = getattr(order.mode, "chosen_miner", None)
    if chosen is not None:
        if any(m == chosen for m, _ in eligible):
            return chosen
        raise NoEligibleMiners(f"chosen provider {chosen} is not available")
    if not eligible:
        raise NoEligibleMiners(f"no Ready miner offers {order.service_type}")
    context = encode_fields("route", order.id)
    value, _proof = beacon_eval(beacon, context)
    return select_miner(value, EligibleSet(tuple(eligible), context))
