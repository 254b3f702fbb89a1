"""Stake-weighted interleaved round-robin batching at a single miner."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyBatch, IllegalTransition, ZeroStake


class MinerStatus(enum.Enum):
    READY = "Ready"
    BUSY = "Busy"
    UNREGISTERED = "Unregistered"


@dataclass(frozen=True)
class BatchEntry:
    client: str
    request_ids: tuple[int, ...]
    stake: int


@dataclass(frozen=True)
class RequestBatch:
    miner: str
    entries: tuple[BatchEntry, ...]
    opened_at: int = 0

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyBatch(f"batch for {self.miner} has no entries")
        for e in self.entries:
            if e.stake <= 0:
                raise ZeroStake(f"client {e.client} has non-positive stake")
            if not e.request_ids:
                raise EmptyBatch(f"client {e.client} has no requests")


@dataclass(frozen=True)
class Schedule:
    serve_order: tuple[int, ...]
    deferred: tuple[int, ...]
    rounds_used: int


def compute_weights(stakes: Sequence[int]) -> list[int]:
    """w_r = floor(s_r / s_min)."""
    if not stakes:
        raise EmptyBatch("no stakes")
    if any(s <= 0 for s in stakes):
        raise ZeroStake("all stakes must be positive")
    s_min = min(stakes)
    return [s // s_min for s in stakes]


def build_schedule(batch: RequestBatch) -> Schedule:
    """Serve one request per eligible client per round, clients in id order.

    A client is eligible in round ``i`` while it has requests left and its
    weight is at least ``i``.  Whatever exceeds the weight is deferred to
    the client's next batch in FIFO order.
    """
    entries = sorted(batch.entries, key=lambda e: e.client)
    weights = compute_weights([e.stake for e in entries])
    caps = [min(len(e.request_ids), w) for e, w in zip(entries, weights)]
    rounds = max(caps)
    serve: list[int] = []
    for i in range(rounds):
        for e, cap in zip(entries, caps):
            if i < cap:
                serve.append(e.request_ids[i])
    deferred = [rid for e, cap in zip(entries, caps) for rid in e.request_ids[cap:]]
    return Schedule(serve_order=tuple(serve), deferred=tuple(deferred), rounds_used=rounds)


_ALLOWED = {
    (MinerStatus.READY, MinerStatus.BUSY),
    (MinerStatus.BUSY, MinerStatus.READY),
    (MinerStatus.READY, MinerStatus.UNREGISTERED),
    (MinerStatus.UNREGISTERED, MinerStatus.READY),
}


def set_status(node, status: MinerStatus, schedule_done: bool = True) -> None:
    """Move ``node`` (anything with a ``status`` attribute) to ``status``.

    Busy -> Ready is only legal once the open schedule has been fully served.
    """
    current = node.status
    if current is status:
        return
    if (current, status) not in _ALLOWED:
        raise IllegalTransition(f"{current.value} -> {status.value}")
    if current is MinerStatus.BUSY and not schedule_done:
        raise IllegalTransition("Busy -> Ready before the schedule was served")
    node.status = status
