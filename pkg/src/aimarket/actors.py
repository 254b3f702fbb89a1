"""Client and miner behaviour as message-producing state machines.

Actors never touch the ledger directly.  Each step consumes an inbox and a
read-only view and returns signed :class:`Message` values for the
simulation bus; the coordinator applies them to the ledger.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Any, Optional, Protocol, Sequence

from .encoding import Keyring, encode_fields
from .errors import NotAllocatedToMe, NotExecuted
from .ledger import UNCHARGED, Charged, OrderMode, claim_message
from .reputation import Rating
from .scheduler import BatchEntry, MinerStatus, RequestBatch, build_schedule


class MessageKind(enum.Enum):
    PUT_ORDER = "PutOrder"
    ALLOCATION = "Allocation"
    EXEC_CLAIM = "ExecClaim"
    OUTPUT = "Output"
    CONFIRMATION = "Confirmation"
    RATE = "RateMsg"
    REGISTER = "RegisterMsg"
    UNREGISTER = "UnregisterMsg"


class _Payload:
    def canonical_fields(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True)
class PutOrder(_Payload):
    service_type: str
    mode: OrderMode = UNCHARGED


@dataclass(frozen=True)
class Allocation(_Payload):
    order_id: int
    miner: str
    client: str
    service_type: str


@dataclass(frozen=True)
class ExecClaim(_Payload):
    order_id: int
    miner: str
    claim_sig: bytes


@dataclass(frozen=True)
class Output(_Payload):
    order_id: int
    miner: str
    correct: bool


@dataclass(frozen=True)
class Confirmation(_Payload):
    order_id: int


@dataclass(frozen=True)
class RateMsg(_Payload):
    order_id: int
    miner: str
    rating: Rating


@dataclass(frozen=True)
class RegisterMsg(_Payload):
    collateral: int
    services: frozenset


@dataclass(frozen=True)
class UnregisterMsg(_Payload):
    pass


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: str
    recipient: str
    payload: Any
    signature: bytes = b""

    def body(self) -> bytes:
        return encode_fields(self.kind, self.sender, self.recipient, self.payload)


COORDINATOR = "coordinator"


def make_message(keyring: Keyring, kind: MessageKind, sender: str, recipient: str, payload: Any) -> Message:
    unsigned = Message(kind, sender, recipient, payload)
    return Message(kind, sender, recipient, payload, keyring.sign(sender, unsigned.body()))


def verify_message(keyring: Keyring, msg: Message) -> bool:
    return keyring.verify(msg.sender, msg.body(), msg.signature)


class Behavior(enum.Enum):
    HONEST_CLIENT = "honest_client"
    DEVIANT_REVIEWER = "deviant_reviewer"
    SELF_DEALING = "self_dealing"
    SYBIL_FLOODER = "sybil_flooder"
    HONEST_MINER = "honest_miner"
    DOS_MINER = "dos_miner"


class LedgerView(Protocol):
    """What an actor may read from its coordinator."""

    def frozen_until(self, client: str, service_type: str) -> Optional[int]: ...

    def pass_remaining(self, client: str) -> float: ...

    def service_weight(self, service_type: str) -> float: ...

    def top_provider(self, service_type: str) -> Optional[str]: ...

    def stake_weight(self, client: str) -> int: ...


# -- clients --------------------------------------------------------------


@dataclass
class Outstanding:
    order_id: int
    miner: str
    noticed_at: int
    service_type: str


@dataclass
class ClientState:
    id: str
    behavior: Behavior
    rng: random.Random
    services: tuple[str, ...] = ("text",)
    demand: float = 0.05
    burst: int = 1
    charged: bool = False
    price: int = 0
    p_rate: float = 1.0
    late_after: int = 50
    patience: int = 100
    # self-dealing sybils only
    own_miner: Optional[str] = None
    outstanding: dict[int, Outstanding] = field(default_factory=dict)
    # put timestamps per service, used by sybils to stay under the threshold
    sent: dict[str, deque] = field(default_factory=dict)


def honest_rating(correct: bool, elapsed: int, late_after: int) -> Rating:
    if not correct:
        return Rating.BAD
    return Rating.GOOD if elapsed <= late_after else Rating.FAIR


def _invert(r: Rating) -> Rating:
    return {Rating.GOOD: Rating.BAD, Rating.BAD: Rating.GOOD, Rating.FAIR: Rating.FAIR}[r]


def _rating_for(state: ClientState, miner: str, honest: Rating) -> Optional[Rating]:
    if state.behavior is Behavior.DEVIANT_REVIEWER:
        return _invert(honest)
    if state.behavior is Behavior.SELF_DEALING:
        return Rating.GOOD if miner == state.own_miner else None
    return honest


def _demand_orders(state: ClientState, view: LedgerView, now: int, policy=None) -> list[PutOrder]:
    if state.behavior is Behavior.SELF_DEALING:
        return _sybil_orders(state, view, now, policy)
    if state.rng.random() >= state.demand:
        return []
    out = []
    for _ in range(state.burst):
        svc = state.services[0] if len(state.services) == 1 else state.rng.choice(state.services)
        if view.frozen_until(state.id, svc) is not None:
            continue
        if state.charged:
            out.append(PutOrder(svc, Charged(state.price, view.top_provider(svc))))
        else:
            out.append(PutOrder(svc))
    return out


def _sybil_orders(state: ClientState, view: LedgerView, now: int, policy) -> list[PutOrder]:
    """As many orders as the request threshold and remaining allowance permit."""
    out = []
    budget = view.pass_remaining(state.id)
    for svc in state.services:
        if view.frozen_until(state.id, svc) is not None:
            continue
        sent = state.sent.setdefault(svc, deque())
        while sent and sent[0] <= now - policy.window:
            sent.popleft()
        w = view.service_weight(svc)
        while len(sent) < policy.max_requests and budget >= w and len(out) < state.burst:
            sent.append(now)
            budget -= w
            out.append(PutOrder(svc))
    return out


def client_step(
    state: ClientState,
    inbox: Sequence[Message],
    view: LedgerView,
    now: int,
    keyring: Keyring,
    policy=None,
) -> list[Message]:
    """Advance one client by one tick: Get, Rate, then Put."""
    out: list[Message] = []

    def emit(kind, payload):
        out.append(make_message(keyring, kind, state.id, COORDINATOR, payload))

    for msg in inbox:
        p = msg.payload
        if msg.kind is MessageKind.ALLOCATION:
            state.outstanding[p.order_id] = Outstanding(p.order_id, p.miner, now, p.service_type)
        elif msg.kind is MessageKind.OUTPUT:
            job = state.outstanding.pop(p.order_id, None)
            if job is None:
                continue
            emit(MessageKind.CONFIRMATION, Confirmation(p.order_id))
            if state.rng.random() < state.p_rate:
                rating = _rating_for(state, p.miner, honest_rating(p.correct, now - job.noticed_at, state.late_after))
                if rating is not None:
                    emit(MessageKind.RATE, RateMsg(p.order_id, p.miner, rating))

    # outputs that never arrived
    for oid in [o for o, job in state.outstanding.items() if now - job.noticed_at >= state.patience]:
        job = state.outstanding.pop(oid)
        rating = _rating_for(state, job.miner, Rating.BAD)
        if rating is not None:
            emit(MessageKind.RATE, RateMsg(oid, job.miner, rating))

    for put in _demand_orders(state, view, now, policy):
        emit(MessageKind.PUT_ORDER, put)
    return out


@dataclass
class SelfDealingPair:
    """One adversary running a miner plus ``sybils`` fake clients."""

    miner: str
    sybils: list[ClientState]


def self_dealing_step(
    pair: SelfDealingPair,
    inboxes: dict[str, Sequence[Message]],
    view: LedgerView,
    now: int,
    keyring: Keyring,
    policy,
) -> list[Message]:
    out: list[Message] = []
    for sybil in pair.sybils:
        out.extend(client_step(sybil, inboxes.get(sybil.id, ()), view, now, keyring, policy))
    return out


# -- miners ---------------------------------------------------------------


class DosMode(enum.Enum):
    SILENT = "silent"  # never claims
    WITHHOLD = "withhold"  # claims, never delivers
    LOW_QUALITY = "low_quality"  # claims and delivers wrong output


@dataclass
class OutputStatus:
    success: bool
    message: Optional[Message] = None


@dataclass
class MinerState:
    id: str
    behavior: Behavior
    latencies: dict[str, int]
    dos_mode: DosMode = DosMode.SILENT
    status: MinerStatus = MinerStatus.READY
    allocated: dict[int, Allocation] = field(default_factory=dict)
    pending: list[int] = field(default_factory=list)
    queue: deque = field(default_factory=deque)
    current: Optional[int] = None
    finish_at: int = 0
    executed: set[int] = field(default_factory=set)
    batches: int = 0


def miner_exec(state: MinerState, order_id: int, keyring: Keyring) -> Message:
    """Sign a completion claim for an order allocated to this miner."""
    if order_id not in state.allocated:
        raise NotAllocatedToMe(f"order {order_id} is not allocated to {state.id}")
    state.executed.add(order_id)
    claim = ExecClaim(order_id, state.id, keyring.sign(state.id, claim_message(order_id, state.id)))
    return make_message(keyring, MessageKind.EXEC_CLAIM, state.id, COORDINATOR, claim)


def miner_send_output(state: MinerState, order_id: int, keyring: Keyring) -> OutputStatus:
    """Deliver the generated output to the client over the P2P link."""
    if order_id not in state.executed:
        raise NotExecuted(f"order {order_id} has not been executed")
    alloc = state.allocated[order_id]
    if state.behavior is Behavior.DOS_MINER and state.dos_mode is DosMode.WITHHOLD:
        return OutputStatus(False)
    correct = not (state.behavior is Behavior.DOS_MINER and state.dos_mode is DosMode.LOW_QUALITY)
    msg = make_message(keyring, MessageKind.OUTPUT, state.id, alloc.client, Output(order_id, state.id, correct))
    return OutputStatus(True, msg)


def open_batch(state: MinerState, view: LedgerView, now: int) -> Optional[RequestBatch]:
    """Close intake and schedule every pending request by stake-weighted round robin."""
    if state.status is not MinerStatus.READY or not state.pending:
        return None
    by_client: dict[str, list[int]] = {}
    for oid in state.pending:
        by_client.setdefault(state.allocated[oid].client, []).append(oid)
    stakes = {c: view.stake_weight(c) for c in by_client}
    staked = [s for s in stakes.values() if s > 0]
    floor = min(staked) if staked else 1
    entries = tuple(
        BatchEntry(c, tuple(ids), stakes[c] if stakes[c] > 0 else floor) for c, ids in sorted(by_client.items())
    )
    batch = RequestBatch(state.id, entries, now)
    schedule = build_schedule(batch)
    state.pending = list(schedule.deferred)
    state.queue = deque(schedule.serve_order)
    state.status = MinerStatus.BUSY
    state.batches += 1
    return batch


def miner_step(state: MinerState, inbox: Sequence[Message], view: LedgerView, now: int, keyring: Keyring) -> list[Message]:
    """Take allocations, open a batch when Ready, finish due work."""
    out: list[Message] = []
    for msg in inbox:
        if msg.kind is MessageKind.ALLOCATION:
            a = msg.payload
            state.allocated[a.order_id] = a
            state.pending.append(a.order_id)
    open_batch(state, view, now)
    while state.status is MinerStatus.BUSY:
        if state.current is None:
            if not state.queue:
                state.status = MinerStatus.READY
                break
            state.current = state.queue.popleft()
            svc = state.allocated[state.current].service_type
            state.finish_at = now + state.latencies[svc]
        if state.finish_at > now:
            break
        oid = state.current
        state.current = None
        if not (state.behavior is Behavior.DOS_MINER and state.dos_mode is DosMode.SILENT):
            out.append(miner_exec(state, oid, keyring))
            status = miner_send_output(state, oid, keyring)
            if status.message is not None:
                out.append(status.message)
        del state.allocated[oid]
        state.executed.discard(oid)
    return out
