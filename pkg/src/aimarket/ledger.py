"""The global ledger: orders, task cycles, node info, stakes and token state.

:class:`GlobalLedger` is a single-writer state machine.  Every public
mutator either applies completely or raises a :class:`ProtocolError`
before touching state.
"""

from __future__ import annotations

import copy
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from . import errors
from .assets import AssetKind, check_amount
from .economics import FeePolicy, InflationParams, TokenState, charged_payment
from .encoding import Keyring, digest, encode, encode_fields
from .reputation import (
    Rating,
    ReputationParams,
    RestrictionState,
    apply_restriction,
    detect_deviant_reviewer,
    logistic_score,
    majority_from_counts,
    rating_value,
)
from .rewards import (
    DEFAULT_Q,
    ContributionLedger,
    Number,
    RewardEpoch,
    ServiceWeightTable,
    as_fraction,
    distribute,
    epoch_pool,
    record_contribution,
    service_volume_allowance,
)
from .scheduler import MinerStatus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StakeRecord:
    client: str
    asset: AssetKind
    amount: int
    value_usd_micro: int
    locked_at: int

    def canonical_fields(self) -> tuple:
        return (self.client, self.asset, self.amount, self.value_usd_micro, self.locked_at)


@dataclass
class ServicePass:
    client: str
    allowance: int
    issued_at: int
    active: bool = True
    # units left this epoch; fractional service weights make this a Fraction
    remaining: Fraction = Fraction(0)

    def canonical_fields(self) -> tuple:
        return (self.client, self.allowance, self.issued_at, self.active, self.remaining)


@dataclass(frozen=True)
class Uncharged:
    def canonical_fields(self) -> tuple:
        return ("Uncharged",)


@dataclass(frozen=True)
class Charged:
    price: int
    chosen_miner: Optional[str] = None

    def __post_init__(self) -> None:
        if self.price <= 0:
            raise errors.ZeroPrice("charged orders need a positive price")
        check_amount(self.price)

    def canonical_fields(self) -> tuple:
        return ("Charged", self.price, self.chosen_miner)


OrderMode = Union[Uncharged, Charged]
UNCHARGED = Uncharged()


@dataclass(frozen=True)
class Order:
    id: int
    client: str
    service_type: str
    mode: OrderMode
    submitted_at: int

    @property
    def charged(self) -> bool:
        return isinstance(self.mode, Charged)

    def canonical_fields(self) -> tuple:
        return (self.id, self.client, self.service_type, self.mode, self.submitted_at)


@dataclass
class TaskCycleRecord:
    order: int
    miner: str
    allocated_at: int
    completion_sig: Optional[bytes] = None
    rating: Optional[Rating] = None
    value_moved: int = 0

    @property
    def completed(self) -> bool:
        return self.completion_sig is not None

    def canonical_fields(self) -> tuple:
        return (self.order, self.miner, self.allocated_at, self.completion_sig, self.rating, self.value_moved)


@dataclass
class NodeInfo:
    miner: str
    collateral: int
    status: MinerStatus
    supported_services: frozenset[str]
    latest_ratings: dict[str, Rating] = field(default_factory=dict)
    reputation: float = 50.0
    contribution: Fraction = Fraction(0)
    subscribers: set[str] = field(default_factory=set)
    rating_sum: int = 0
    # histogram of latest_ratings, kept alongside it for majority lookups
    rating_tally: Counter = field(default_factory=Counter, repr=False, compare=False)

    @property
    def subscriber_count(self) -> int:
        return len(self.subscribers)

    def canonical_fields(self) -> tuple:
        return (
            self.miner,
            self.collateral,
            self.status,
            self.supported_services,
            self.latest_ratings,
            self.reputation,
            self.contribution,
            self.subscribers,
        )


def claim_message(order_id: int, miner: str) -> bytes:
    """Bytes a miner signs to claim completion of ``order_id``."""
    return encode_fields("ExecClaim", order_id, miner)


class GlobalLedger:
    """Replicated protocol state and the transitions that change it."""

    def __init__(
        self,
        keyring: Keyring,
        weights: Optional[ServiceWeightTable] = None,
        *,
        q: Number = DEFAULT_Q,
        min_collateral: int = 0,
        reputation: Optional[ReputationParams] = None,
        fee: Optional[FeePolicy] = None,
        fee_account: str = "coordinators",
    ) -> None:
        self.keyring = keyring
        self.weights = weights if weights is not None else ServiceWeightTable()
        self.q = as_fraction(q)
        self.min_collateral = check_amount(min_collateral)
        self.reputation_params = reputation or ReputationParams()
        self.fee = fee or FeePolicy()
        self.fee_account = fee_account

        self.orders: dict[int, Order] = {}
        self.task_cycles: dict[int, TaskCycleRecord] = {}
        self.nodes: dict[str, NodeInfo] = {}
        self.stakes: dict[str, StakeRecord] = {}
        self.passes: dict[str, ServicePass] = {}
        self.token = TokenState()
        self.tick = 0

        self.balances: dict[str, int] = {}
        self.escrow: dict[int, int] = {}
        self.expired: set[int] = set()
        self.confirmed: set[int] = set()
        self.contributions = ContributionLedger()
        self.restrictions: dict[str, RestrictionState] = {}
        self.restriction_log: list[RestrictionState] = []
        self.epoch_index = 0
        self._next_order = 1
        self._inflight_client: dict[str, int] = {}
        self._inflight_miner: dict[str, int] = {}
        # (client, miner) -> newest concluded order between them
        self._concluded: dict[tuple[str, str], int] = {}
        self._rating_history: dict[str, list[tuple[str, Rating]]] = {}

    # -- balances ---------------------------------------------------------

    def balance(self, account: str) -> int:
        return self.balances.get(account, 0)

    def credit(self, account: str, amount: int) -> None:
        """Add ``amount`` to an account; the caller has already moved it into circulation."""
        self.balances[account] = check_amount(self.balance(account) + amount)

    def _debit(self, account: str, amount: int) -> None:
        have = self.balance(account)
        if have < amount:
            raise errors.InsufficientBalance(f"{account} holds {have}, needs {amount}")
        self.balances[account] = have - amount

    def mint_genesis(self, account: str, amount: int) -> None:
        """Initial allocation straight into circulation."""
        self.token.mint(amount, into="circulating")
        self.credit(account, amount)

    def advance_to(self, tick: int) -> None:
        if tick < self.tick:
            raise ValueError(f"tick went backwards: {tick} < {self.tick}")
        self.tick = tick

    # -- staking ----------------------------------------------------------

    def stake_tokens(self, client: str, asset: AssetKind, amount: int, value_usd_micro: int) -> ServicePass:
        if amount <= 0 or value_usd_micro <= 0:
            raise errors.ZeroStake(f"{client}: stake amount and value must be positive")
        check_amount(amount)
        current = self.passes.get(client)
        if current is not None and current.active:
            raise errors.PassAlreadyActive(client)
        if asset.is_native:
            self._debit(client, amount)
            self.token.move("circulating", "locked_stakes", amount)
        self.stakes[client] = StakeRecord(client, asset, amount, value_usd_micro, self.tick)
        allowance = service_volume_allowance(value_usd_micro, asset, self.q)
        sp = ServicePass(client, allowance, self.tick, True, Fraction(allowance))
        self.passes[client] = sp
        return sp

    def unstake_tokens(self, client: str) -> int:
        sp = self.passes.get(client)
        if sp is None or not sp.active:
            raise errors.NoActivePass(client)
        if self._inflight_client.get(client, 0):
            raise errors.InFlightOrders(f"{client} has orders in flight")
        record = self.stakes.pop(client)
        sp.active = False
        sp.remaining = Fraction(0)
        if record.asset.is_native:
            self.token.move("locked_stakes", "circulating", record.amount)
            self.credit(client, record.amount)
        return record.amount

    def stake_weight(self, client: str) -> int:
        """Stake value used for scheduling weights: q-discounted micro-dollars."""
        record = self.stakes.get(client)
        if record is None:
            return 0
        if record.asset.is_native:
            return record.value_usd_micro
        return (record.value_usd_micro * self.q.numerator) // self.q.denominator

    # -- client cycle -----------------------------------------------------

    def put_order(self, client: str, service_type: str, mode: OrderMode = UNCHARGED) -> int:
        weight = self.weights.weight(service_type)
        if isinstance(mode, Charged):
            self._debit(client, mode.price)
            self.token.move("circulating", "escrowed", mode.price)
        else:
            sp = self.passes.get(client)
            if sp is None or not sp.active:
                raise errors.InvalidServicePass(f"{client} holds no valid service pass")
            if sp.remaining < weight:
                raise errors.InsufficientAllowance(
                    f"{client} has {sp.remaining} units left, {service_type} costs {weight}"
                )
            sp.remaining -= weight
        oid = self._next_order
        self._next_order += 1
        self.orders[oid] = Order(oid, client, service_type, mode, self.tick)
        if isinstance(mode, Charged):
            self.escrow[oid] = mode.price
        return oid

    def get_order(self, order_id: int) -> Order:
        try:
            return self.orders[order_id]
        except KeyError:
            raise errors.OrderNotFound(order_id) from None

    def record_allocation(self, order_id: int, miner: str) -> TaskCycleRecord:
        order = self.get_order(order_id)
        if order_id in self.task_cycles:
            raise errors.AlreadyAllocated(order_id)
        if order_id in self.expired:
            raise errors.OrderExpired(order_id)
        node = self.nodes.get(miner)
        if node is None or node.status is not MinerStatus.READY:
            raise errors.MinerUnavailable(f"{miner} is not registered and Ready")
        if order.service_type not in node.supported_services:
            raise errors.MinerUnavailable(f"{miner} does not offer {order.service_type}")
        record = TaskCycleRecord(order_id, miner, self.tick)
        self.task_cycles[order_id] = record
        self._inflight_client[order.client] = self._inflight_client.get(order.client, 0) + 1
        self._inflight_miner[miner] = self._inflight_miner.get(miner, 0) + 1
        return record

    def record_completion(self, order_id: int, signature: bytes) -> None:
        order = self.get_order(order_id)
        record = self.task_cycles.get(order_id)
        if record is None:
            raise errors.NotAllocated(order_id)
        if record.completion_sig is not None:
            raise errors.AlreadyCompleted(order_id)
        if order_id in self.expired:
            raise errors.OrderExpired(order_id)
        if not self.keyring.verify(record.miner, claim_message(order_id, record.miner), signature):
            raise errors.BadSignature(f"claim for order {order_id} not signed by {record.miner}")
        record.completion_sig = signature
        self._release_inflight(order.client, record.miner)
        node = self.nodes[record.miner]
        node.subscribers.add(order.client)
        self._concluded[(order.client, record.miner)] = order_id
        if order.charged:
            charged_payment(self, order_id, self.fee)
        else:
            record_contribution(self.contributions, record.miner, order.service_type, 1, self.weights)
            node.contribution = self.contributions.get(record.miner)
            record.value_moved = 0
        self.token.check()

    def confirm_delivery(self, order_id: int, client: str) -> None:
        """Client-side confirmation that the output arrived (Get)."""
        order = self.get_order(order_id)
        if order.client != client:
            raise errors.OrderNotFound(f"order {order_id} does not belong to {client}")
        record = self.task_cycles.get(order_id)
        if record is None or not record.completed:
            raise errors.NotCompleted(order_id)
        self.confirmed.add(order_id)

    def expire_order(self, order_id: int) -> None:
        """Cancel an order that was not completed in time and refund its client."""
        order = self.get_order(order_id)
        record = self.task_cycles.get(order_id)
        if record is not None and record.completed:
            raise errors.AlreadyCompleted(order_id)
        if order_id in self.expired:
            return
        self.expired.add(order_id)
        if isinstance(order.mode, Charged):
            price = self.escrow.pop(order_id)
            self.token.move("escrowed", "circulating", price)
            self.credit(order.client, price)
        else:
            sp = self.passes.get(order.client)
            if sp is not None and sp.active:
                sp.remaining = min(Fraction(sp.allowance), sp.remaining + self.weights.weight(order.service_type))
        if record is not None:
            self._release_inflight(order.client, record.miner)
            self._concluded[(order.client, record.miner)] = order_id

    def _release_inflight(self, client: str, miner: str) -> None:
        self._inflight_client[client] -= 1
        self._inflight_miner[miner] -= 1

    def inflight(self, *, client: Optional[str] = None, miner: Optional[str] = None) -> int:
        if client is not None:
            return self._inflight_client.get(client, 0)
        return self._inflight_miner.get(miner, 0)

    def order_stage(self, order_id: int) -> str:
        """One of put, allocated, completed, rated, expired."""
        self.get_order(order_id)
        if order_id in self.expired:
            return "expired"
        record = self.task_cycles.get(order_id)
        if record is None:
            return "put"
        if record.rating is not None:
            return "rated"
        return "completed" if record.completed else "allocated"

    # -- ratings ----------------------------------------------------------

    def is_restricted(self, client: str) -> bool:
        state = self.restrictions.get(client)
        return state is not None and self.tick < state.until

    def rate_service(self, client: str, miner: str, rating: Rating) -> None:
        """Record ``client``'s latest rating of ``miner`` and refresh its reputation.

        Allowed once some order between the two has concluded, either
        completed or expired after allocation (a missing output is rateable).
        """
        oid = self._concluded.get((client, miner))
        if oid is None:
            raise errors.NoCompletedService(f"{client} has no concluded service from {miner}")
        if self.is_restricted(client):
            raise errors.ClientRestricted(f"{client} restricted until {self.restrictions[client].until}")
        node = self.nodes[miner]
        previous = node.latest_ratings.get(client)
        if previous is not None:
            node.rating_sum -= rating_value(previous)
            node.rating_tally[previous] -= 1
        node.latest_ratings[client] = rating
        node.rating_sum += rating_value(rating)
        node.rating_tally[rating] += 1
        node.reputation = logistic_score(node.rating_sum, self.reputation_params.theta)
        record = self.task_cycles[oid]
        if record.completed:
            record.rating = rating
        self._rating_history.setdefault(client, []).append((miner, rating))
        self._check_deviant(client)

    def co_rating_majorities(self, client: str) -> dict[str, Optional[Rating]]:
        """Majority rating per miner among raters other than ``client``."""
        out: dict[str, Optional[Rating]] = {}
        min_raters = self.reputation_params.min_raters
        for miner in {m for m, _ in self._rating_history.get(client, ())}:
            node = self.nodes[miner]
            counts = node.rating_tally
            own = node.latest_ratings.get(client)
            if own is not None:
                counts = counts.copy()
                counts[own] -= 1
            out[miner] = majority_from_counts(counts, min_raters)
        return out

    def _check_deviant(self, client: str) -> None:
        params = self.reputation_params
        history = self._rating_history[client]
        if len(history) < params.min_samples:
            return
        del history[: max(0, len(history) - params.deviation_window)]
        if detect_deviant_reviewer(history, self.co_rating_majorities(client), params):
            state = apply_restriction(self.restrictions.get(client), self.tick, params, client)
            self.restrictions[client] = state
            self.restriction_log.append(state)
            # fresh evidence is required for the next offense
            history.clear()
            logger.debug("restricted %s until %d (level %d)", client, state.until, state.level)

    # -- mining cycle -----------------------------------------------------

    def register_miner(self, miner: str, collateral: int, services) -> NodeInfo:
        services = frozenset(services)
        for s in services:
            self.weights.weight(s)
        node = self.nodes.get(miner)
        if node is not None and node.status is not MinerStatus.UNREGISTERED:
            raise errors.AlreadyRegistered(miner)
        if collateral < self.min_collateral:
            raise errors.CollateralTooLow(f"{collateral} < minimum {self.min_collateral}")
        self._debit(miner, collateral)
        self.token.move("circulating", "locked_collateral", collateral)
        if node is None:
            node = NodeInfo(miner, collateral, MinerStatus.READY, services)
            self.nodes[miner] = node
        else:
            # history survives re-registration so an identity cannot wash its ratings
            node.collateral = collateral
            node.status = MinerStatus.READY
            node.supported_services = services
        return node

    def unregister_miner(self, miner: str) -> int:
        node = self.nodes.get(miner)
        if node is None or node.status is MinerStatus.UNREGISTERED:
            raise errors.NotRegistered(miner)
        if self._inflight_miner.get(miner, 0) or node.status is MinerStatus.BUSY:
            raise errors.InFlightWork(f"{miner} has allocations in flight")
        amount = node.collateral
        self.token.move("locked_collateral", "circulating", amount)
        self.credit(miner, amount)
        node.collateral = 0
        node.status = MinerStatus.UNREGISTERED
        return amount

    def eligible_miners(self, service_type: str) -> list[tuple[str, float]]:
        return [
            (m, n.reputation)
            for m, n in sorted(self.nodes.items())
            if n.status is MinerStatus.READY and service_type in n.supported_services
        ]

    # -- epochs -----------------------------------------------------------

    def close_epoch(self, inflation: InflationParams) -> tuple[int, RewardEpoch]:
        """Mint, distribute the reward pool, and replenish allowances.

        Returns ``(minted, epoch)``; an epoch with no contribution leaves the
        pool in place for the next one.
        """
        minted = epoch_pool(self.token.total_minted, inflation.annual_inflation, inflation.epochs_per_year)
        self.token.mint(minted)
        self.contributions.epoch_end = self.tick
        epoch = distribute(self.contributions, self.token.reward_pool, self.epoch_index)
        for miner, amount in epoch.allocations.items():
            self.token.move("reward_pool", "circulating", amount)
            self.credit(miner, amount)
        for node in self.nodes.values():
            node.contribution = Fraction(0)
        for sp in self.passes.values():
            if sp.active:
                sp.remaining = Fraction(sp.allowance)
        self.weights.apply_staged()
        self.epoch_index += 1
        self.token.check()
        return minted, epoch

    # -- integrity --------------------------------------------------------

    def check_invariants(self) -> None:
        self.token.check()
        if sum(self.balances.values()) != self.token.circulating:
            raise errors.ConservationViolation("account balances do not sum to circulating supply")
        if sum(self.escrow.values()) != self.token.escrowed:
            raise errors.ConservationViolation("escrow entries do not sum to escrowed supply")
        staked = sum(s.amount for s in self.stakes.values() if s.asset.is_native)
        if staked != self.token.locked_stakes:
            raise errors.ConservationViolation("stake records do not sum to locked stakes")
        if sum(n.collateral for n in self.nodes.values()) != self.token.locked_collateral:
            raise errors.ConservationViolation("collateral does not sum to locked collateral")

    def canonical_fields(self) -> tuple:
        return (
            self.orders,
            self.task_cycles,
            self.nodes,
            self.stakes,
            self.passes,
            self.token,
            self.tick,
            self.balances,
            self.escrow,
            self.expired,
            self.contributions,
            self.restrictions,
            self.epoch_index,
        )

    def state_hash(self) -> bytes:
        return digest(encode(self))

    def snapshot(self) -> "GlobalLedger":
        """Independent deep copy, safe to hand to a reader thread."""
        return copy.deepcopy(self)
