"""Deterministic tick-driven scenario harness.

One scenario is one single-threaded event loop.  Within a tick the phases
run in a fixed order:

1. deliver due messages (coordinator applies Put/Claim/Confirm/Rate)
2. expire orders past their deadline
3. client steps (Get, Rate, Put)
4. coordinator routes queued orders through the weighted beacon draw
5. miner steps (take allocations, open WRR batches, exec and send output)
6. epoch boundary: mint, distribute, replenish allowances, checkpoint

Every source of randomness is derived from the scenario seed and the actor
id, so adding an inert actor never perturbs the others.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from bisect import bisect_left
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappop, heappush
from typing import Any, Optional

from . import errors
from .actors import (
    COORDINATOR,
    Allocation,
    Behavior,
    ClientState,
    DosMode,
    Message,
    MessageKind,
    MinerState,
    SelfDealingPair,
    client_step,
    make_message,
    miner_step,
    self_dealing_step,
    verify_message,
)
from .assets import AssetKind
from .config import ScenarioConfig
from .coordination import (
    Checkpoint,
    CoordinatorSet,
    Frozen,
    RequestThrottle,
    is_committed,
    propose_checkpoint,
    sign_and_collect,
)
from .economics import FeePolicy, InflationParams, ListingEntry, display_rating, rank_providers
from .encoding import Keyring, quantize
from .ledger import GlobalLedger
from .rewards import ServiceWeightTable
from .scheduler import MinerStatus, set_status
from .selection import RandomnessBeacon, route_request

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


def derive_seed(seed: int, label: str) -> int:
    h = hashlib.sha256(f"aimarket/{seed}/{label}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def q12(x: float) -> float:
    """Quantize a float to 1e-12 for serialization."""
    return quantize(x) / 1e12


def jain_index(values: list[int]) -> float:
    if not values or not any(values):
        return 1.0
    return sum(values) ** 2 / (len(values) * sum(v * v for v in values))


def max_window_count(ticks: list[int], window: int) -> int:
    """Largest number of ``ticks`` inside any interval (t - window, t]."""
    ticks = sorted(ticks)
    best = 0
    for j, t in enumerate(ticks):
        i = bisect_left(ticks, t - window + 1)
        best = max(best, j - i + 1)
    return best


class _Bus:
    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Message]] = []
        self._seq = 0
        self.emitted = 0
        self.delivered = 0

    def send(self, msg: Message, at: int) -> None:
        heappush(self._heap, (at, self._seq, msg))
        self._seq += 1
        self.emitted += 1

    def pop_due(self, now: int) -> list[Message]:
        out = []
        while self._heap and self._heap[0][0] <= now:
            out.append(heappop(self._heap)[2])
        self.delivered += len(out)
        return out

    def pending(self) -> int:
        return len(self._heap)


class _View:
    """Read-only coordinator data exposed to actors."""

    def __init__(self, sim: "Simulation") -> None:
        self._sim = sim
        self._listing_tick = -1
        self._top: dict[str, Optional[str]] = {}

    def frozen_until(self, client: str, service_type: str) -> Optional[int]:
        return self._sim.throttle.frozen_until(client, service_type, self._sim.now)

    def pass_remaining(self, client: str) -> Fraction:
        sp = self._sim.ledger.passes.get(client)
        return sp.remaining if sp is not None and sp.active else Fraction(0)

    def service_weight(self, service_type: str) -> Fraction:
        return self._sim.ledger.weights.weight(service_type)

    def stake_weight(self, client: str) -> int:
        return self._sim.ledger.stake_weight(client)

    def top_provider(self, service_type: str) -> Optional[str]:
        if self._listing_tick != self._sim.now:
            self._top = {}
            self._listing_tick = self._sim.now
        if service_type not in self._top:
            entries = self._sim.listing()
            try:
                self._top[service_type] = rank_providers(entries, self._sim.cfg.listing_weights, service_type)[0]
            except errors.EmptyListing:
                self._top[service_type] = None
        return self._top[service_type]


@dataclass
class MetricsReport:
    meta: dict[str, Any]
    epochs: list[dict[str, Any]]
    miners: dict[str, dict[str, Any]]
    orders: dict[str, Any]
    adversary: dict[str, Any]
    audit: dict[str, Any]
    checkpoints: dict[str, Any]
    clients: dict[str, dict[str, Any]] = field(default_factory=dict)
    # wall-clock figures vary run to run and stay out of the serialized report
    wall_seconds: float = 0.0

    @property
    def cycles_per_second(self) -> float:
        n = self.orders["confirmed"]
        return n / self.wall_seconds if self.wall_seconds > 0 else float("inf")

    def reward_share(self, miner: str) -> float:
        total = sum(m["total_reward"] for m in self.miners.values())
        return self.miners[miner]["total_reward"] / total if total else 0.0

    def records(self) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = [{"record": "meta", **self.meta}]
        out += [{"record": "epoch", **e} for e in self.epochs]
        out += [{"record": "miner", "miner": m, **v} for m, v in sorted(self.miners.items())]
        out += [{"record": "client", "client": c, **v} for c, v in sorted(self.clients.items())]
        out.append({"record": "orders", **self.orders})
        out.append({"record": "adversary", **self.adversary})
        out.append({"record": "audit", **self.audit})
        out.append({"record": "checkpoints", **self.checkpoints})
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records())

    def summary_table(self) -> str:
        lines = [
            f"scenario {self.meta['scenario']}  seed {self.meta['seed']}  ticks {self.meta['ticks']}  "
            f"epochs {len(self.epochs)}",
            f"{'miner':<22}{'behavior':<14}{'reward share':>13}{'reputation':>12}{'ratings':>9}",
        ]
        for m, v in sorted(self.miners.items()):
            lines.append(
                f"{m:<22}{v['behavior']:<14}{v['reward_share']:>13.4f}{v['final_reputation']:>12.3f}{v['ratings']:>9d}"
            )
        o = self.orders
        lines.append(
            f"orders: accepted {o['accepted']}  confirmed {o['confirmed']}  expired {o['expired']}  "
            f"rejected {sum(o['rejected'].values())}  cycles/tick {o['cycles_per_tick']:.4f}  "
            f"fairness {o['fairness_index']:.4f}"
        )
        if self.epochs:
            first, last = self.epochs[0], self.epochs[-1]
            lines.append(
                f"supply: circulating {first['circulating']} -> {last['circulating']}  "
                f"total minted {last['total_minted']}  reward pool {last['reward_pool']}"
            )
        lines.append(
            f"checkpoints committed {self.checkpoints['committed']}  conflicting {self.checkpoints['conflicting_commits']}"
        )
        return "\n".join(lines)


@dataclass
class DiffReport:
    adversary_share_delta: dict[str, float]
    reputation_deltas: dict[str, float]
    reward_share_deltas: dict[str, float]
    throughput_delta: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "adversary_share_delta": {k: q12(v) for k, v in sorted(self.adversary_share_delta.items())},
            "reputation_deltas": {k: q12(v) for k, v in sorted(self.reputation_deltas.items())},
            "reward_share_deltas": {k: q12(v) for k, v in sorted(self.reward_share_deltas.items())},
            "throughput_delta": q12(self.throughput_delta),
        }


def compare_runs(baseline: MetricsReport, variant: MetricsReport) -> DiffReport:
    """Per-miner differences between a baseline run and an adversarial variant."""
    if set(baseline.miners) != set(variant.miners):
        raise errors.ShapeMismatch(
            f"miner sets differ: {sorted(set(baseline.miners) ^ set(variant.miners))}"
        )
    share_delta = {m: variant.reward_share(m) - baseline.reward_share(m) for m in variant.miners}
    adversarial = {m: share_delta[m] for m, v in variant.miners.items() if v["adversarial"]}
    rep_delta = {m: variant.miners[m]["final_reputation"] - baseline.miners[m]["final_reputation"] for m in variant.miners}
    return DiffReport(
        adversary_share_delta=adversarial,
        reputation_deltas=rep_delta,
        reward_share_deltas=share_delta,
        throughput_delta=variant.orders["cycles_per_tick"] - baseline.orders["cycles_per_tick"],
    )


class Simulation:
    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.now = 0
        seed_bytes = cfg.seed.to_bytes(8, "big")
        self.keyring = Keyring(hashlib.sha256(b"aimarket/keyring" + seed_bytes).digest())
        self.beacon = RandomnessBeacon(hashlib.sha256(b"aimarket/beacon" + seed_bytes).digest())
        self.ledger = GlobalLedger(
            self.keyring,
            ServiceWeightTable({s.name: s.weight for s in cfg.services}),
            q=cfg.q,
            min_collateral=cfg.min_collateral,
            reputation=cfg.reputation,
            fee=FeePolicy(cfg.fee_rate),
        )
        self.inflation = InflationParams(cfg.inflation_rate, cfg.epochs_per_year)
        self.throttle = RequestThrottle(cfg.threshold)
        self.cset = CoordinatorSet.uniform(cfg.coordinator_c, cfg.coordinator_m, cfg.coordinator_d, self.keyring)
        member_ids = sorted(self.cset.members)
        self.equivocators = member_ids[len(member_ids) - cfg.equivocators :] if cfg.equivocators else []
        self.bus = _Bus()
        self.view = _View(self)
        self.latencies = {s.name: s.latency for s in cfg.services}

        self.clients: dict[str, ClientState] = {}
        self.miners: dict[str, MinerState] = {}
        self.pairs: list[SelfDealingPair] = []
        self.client_group: dict[str, str] = {}
        self.miner_behavior: dict[str, str] = {}
        self.inboxes: dict[str, list[Message]] = {}

        self.route_queue: deque[int] = deque()
        self.deadlines: deque[tuple[int, int]] = deque()
        self.trace: deque = deque(maxlen=200)

        self.counts: Counter = Counter()
        self.rejected: Counter = Counter()
        self.rewards: Counter = Counter()
        self.trajectories: dict[str, list[float]] = {}
        self.latency_hist: Counter = Counter()
        self.served: Counter = Counter()
        self.accepted_ticks: dict[str, list[int]] = {}
        self.ratings_accepted: Counter = Counter()
        self.restriction_marks: list[dict[str, Any]] = []
        self.put_tick: dict[int, int] = {}
        self.claimed: set[int] = set()
        self.output_seen: set[int] = set()
        self.epoch_rows: list[dict[str, Any]] = []
        self.conflicting_attempts = 0
        self._claims_emitted: set[int] = set()
        self.max_queue_depth = 0
        self._setup()

    # -- setup ------------------------------------------------------------

    def _setup(self) -> None:
        cfg, led = self.cfg, self.ledger
        for g in cfg.miners:
            for mid in g.ids():
                led.mint_genesis(mid, g.collateral)
                led.register_miner(mid, g.collateral, g.services)
                behavior = Behavior.DOS_MINER if g.behavior == "dos" else Behavior.HONEST_MINER
                self.miners[mid] = MinerState(mid, behavior, dict(self.latencies), DosMode(g.dos_mode))
                self.miner_behavior[mid] = g.behavior
                self.trajectories[mid] = []
                if g.behavior == "self_dealing":
                    sybils = []
                    for sid in g.sybil_ids():
                        led.mint_genesis(sid, g.sybil_stake)
                        led.stake_tokens(sid, AssetKind.native(), g.sybil_stake, g.sybil_stake_usd)
                        st = ClientState(
                            sid, Behavior.SELF_DEALING, self._rng(sid), tuple(g.services[:1]),
                            demand=1.0, burst=g.sybil_burst, patience=cfg.expiry, late_after=cfg.late_after,
                            own_miner=mid,
                        )
                        sybils.append(st)
                        self.client_group[sid] = f"{g.name}-sybils"
                    self.pairs.append(SelfDealingPair(mid, sybils))
        for g in cfg.clients:
            behavior = {
                "honest": Behavior.HONEST_CLIENT,
                "deviant_reviewer": Behavior.DEVIANT_REVIEWER,
                "sybil_flooder": Behavior.SYBIL_FLOODER,
            }[g.behavior]
            charged = g.mode == "charged"
            for cid in g.ids():
                asset = AssetKind.native() if g.asset == "native" else AssetKind.external(g.asset)
                native_stake = g.stake if (asset.is_native and not charged) else 0
                if native_stake + g.balance:
                    led.mint_genesis(cid, native_stake + g.balance)
                if not charged:
                    led.stake_tokens(cid, asset, g.stake, g.stake_usd)
                price = cfg.service(g.services[0]).price
                self.clients[cid] = ClientState(
                    cid, behavior, self._rng(cid), g.services, demand=g.demand, burst=g.burst,
                    charged=charged, price=price, p_rate=g.p_rate, late_after=cfg.late_after,
                    patience=cfg.expiry,
                )
                self.client_group[cid] = g.name
        treasury = cfg.genesis_supply - led.token.total_minted
        if treasury > 0:
            led.mint_genesis("treasury", treasury)
        led.check_invariants()

    def _rng(self, label: str) -> random.Random:
        return random.Random(derive_seed(self.cfg.seed, label))

    def listing(self) -> list[ListingEntry]:
        return [
            ListingEntry(m, display_rating(n.reputation), n.subscriber_count, n.collateral, n.supported_services)
            for m, n in sorted(self.ledger.nodes.items())
            if n.status is not MinerStatus.UNREGISTERED
        ]

    # -- messaging --------------------------------------------------------

    def _send(self, msg: Message, delay: int) -> None:
        self.bus.send(msg, self.now + delay)

    def _deliver(self) -> None:
        for msg in self.bus.pop_due(self.now):
            if msg.recipient == COORDINATOR:
                self._coordinator_handle(msg)
            else:
                self.inboxes.setdefault(msg.recipient, []).append(msg)

    def _note(self, *event: Any) -> None:
        self.trace.append((self.now,) + event)

    def _reject(self, kind: MessageKind, exc: Exception) -> None:
        self.rejected[f"{kind.value}:{type(exc).__name__}"] += 1

    def _coordinator_handle(self, msg: Message) -> None:
        led = self.ledger
        if not verify_message(self.keyring, msg):
            self._reject(msg.kind, errors.BadSignature())
            return
        p = msg.payload
        kind = msg.kind
        try:
            if kind is MessageKind.PUT_ORDER:
                self.counts["put_attempts"] += 1
                verdict = self.throttle.enforce(msg.sender, p.service_type, self.now)
                if isinstance(verdict, Frozen):
                    self.rejected[f"{kind.value}:Frozen"] += 1
                    return
                oid = led.put_order(msg.sender, p.service_type, p.mode)
                self.counts["accepted"] += 1
                self.put_tick[oid] = self.now
                self.route_queue.append(oid)
                self.deadlines.append((self.now + self.cfg.expiry, oid))
                self.accepted_ticks.setdefault(msg.sender, []).append(self.now)
                self._note("put", oid, msg.sender)
            elif kind is MessageKind.EXEC_CLAIM:
                if msg.sender != p.miner:
                    raise errors.BadSignature("claim sender mismatch")
                led.record_completion(p.order_id, p.claim_sig)
                self.claimed.add(p.order_id)
                self.counts["completed"] += 1
                self._note("claim", p.order_id, p.miner)
            elif kind is MessageKind.CONFIRMATION:
                if p.order_id not in self.output_seen:
                    raise errors.InvariantViolation(f"confirmation for order {p.order_id} without output", list(self.trace))
                led.confirm_delivery(p.order_id, msg.sender)
                self.counts["confirmed"] += 1
                self.served[msg.sender] += 1
                self.latency_hist[self.now - self.put_tick[p.order_id]] += 1
                self._note("confirm", p.order_id)
            elif kind is MessageKind.RATE:
                led.rate_service(msg.sender, p.miner, p.rating)
                self.counts["rated"] += 1
                self.ratings_accepted[msg.sender] += 1
                self.trajectories[p.miner].append(led.nodes[p.miner].reputation)
                if led.restriction_log and len(led.restriction_log) > len(self.restriction_marks):
                    st = led.restriction_log[-1]
                    self.restriction_marks.append(
                        {
                            "client": st.client,
                            "level": st.level,
                            "start": self.now,
                            "until": st.until,
                            "duration": st.until - self.now,
                            "ratings_before": self.ratings_accepted[st.client],
                        }
                    )
            elif kind is MessageKind.REGISTER:
                led.register_miner(msg.sender, p.collateral, p.services)
            elif kind is MessageKind.UNREGISTER:
                led.unregister_miner(msg.sender)
        except errors.InvariantViolation:
            raise
        except errors.ProtocolError as exc:
            self._reject(kind, exc)

    # -- phases -----------------------------------------------------------

    def _expire(self) -> None:
        led = self.ledger
        while self.deadlines and self.deadlines[0][0] <= self.now:
            _, oid = self.deadlines.popleft()
            stage = led.order_stage(oid)
            if stage in ("put", "allocated"):
                led.expire_order(oid)
                self.counts["expired"] += 1
                self._note("expire", oid)

    def _clients(self) -> None:
        policy = self.cfg.threshold
        for cid in sorted(self.clients):
            inbox = self.inboxes.pop(cid, ())
            self._track_outputs(inbox)
            for m in client_step(self.clients[cid], inbox, self.view, self.now, self.keyring, policy):
                self._send(m, 0 if m.kind is MessageKind.PUT_ORDER else self.cfg.link_delay)
        for pair in self.pairs:
            inboxes = {s.id: self.inboxes.pop(s.id, []) for s in pair.sybils}
            for inbox in inboxes.values():
                self._track_outputs(inbox)
            for m in self_dealing_step(pair, inboxes, self.view, self.now, self.keyring, policy):
                self._send(m, 0 if m.kind is MessageKind.PUT_ORDER else self.cfg.link_delay)
        self._deliver()

    def _track_outputs(self, inbox) -> None:
        for m in inbox:
            if m.kind is MessageKind.OUTPUT:
                if m.payload.order_id not in self.claimed and m.payload.order_id not in self._claims_emitted:
                    raise errors.InvariantViolation(f"output for order {m.payload.order_id} without claim", list(self.trace))
                self.output_seen.add(m.payload.order_id)

    def _route(self) -> None:
        led = self.ledger
        self.max_queue_depth = max(self.max_queue_depth, len(self.route_queue))
        waiting: deque[int] = deque()
        blocked: set[str] = set()
        while self.route_queue:
            oid = self.route_queue.popleft()
            if oid in led.expired or oid in led.task_cycles:
                continue
            order = led.orders[oid]
            if order.service_type in blocked and not order.charged:
                waiting.append(oid)
                continue
            try:
                miner = route_request(led, order, self.beacon)
                led.record_allocation(oid, miner)
            except errors.NoEligibleMiners:
                if not order.charged:
                    blocked.add(order.service_type)
                waiting.append(oid)
                continue
            self.counts["allocated"] += 1
            self._note("allocate", oid, miner)
            alloc = Allocation(oid, miner, order.client, order.service_type)
            self._send(make_message(self.keyring, MessageKind.ALLOCATION, COORDINATOR, miner, alloc), 0)
            self._send(make_message(self.keyring, MessageKind.ALLOCATION, COORDINATOR, order.client, alloc), self.cfg.link_delay)
        self.route_queue = waiting
        self._deliver()

    def _miners(self) -> None:
        for mid in sorted(self.miners):
            st = self.miners[mid]
            out = miner_step(st, self.inboxes.pop(mid, ()), self.view, self.now, self.keyring)
            node = self.ledger.nodes[mid]
            if node.status is not st.status and node.status is not MinerStatus.UNREGISTERED:
                set_status(node, st.status)
            for m in out:
                if m.kind is MessageKind.EXEC_CLAIM:
                    self._claims_emitted.add(m.payload.order_id)
                    self._send(m, 0)
                else:
                    self._send(m, self.cfg.link_delay)
        self._deliver()

    def _close_epoch(self) -> None:
        led = self.ledger
        before = led.token.circulating
        minted, epoch = led.close_epoch(self.inflation)
        for m, amount in epoch.allocations.items():
            self.rewards[m] += amount
        height = self.cset.last_committed + 1
        cp = propose_checkpoint(self.cset, led, height)
        honest = [cid for cid in sorted(self.cset.members) if cid not in self.equivocators]
        for cid in honest + self.equivocators:
            sign_and_collect(cp, cid, self.cset)
        if self.equivocators:
            forged = Checkpoint(height, hashlib.sha256(b"equivocation" + cp.state_hash).digest())
            for cid in self.equivocators:
                sign_and_collect(forged, cid, self.cset)
            self.conflicting_attempts += 1
            if is_committed(forged, self.cset):
                raise errors.InvariantViolation(f"conflicting checkpoint reached quorum at height {height}")
        self.cset.commit(cp)
        led.check_invariants()
        logger.debug("epoch %d closed at tick %d: minted %d, pool %d", epoch.epoch_index, self.now, minted, epoch.pool)
        tok = led.token
        self.epoch_rows.append(
            {
                "epoch": epoch.epoch_index,
                "tick": self.now,
                "minted": minted,
                "pool": epoch.pool,
                "carried": epoch.carried,
                "allocations": dict(sorted(epoch.allocations.items())),
                "circulating": tok.circulating,
                "circulating_delta": tok.circulating - before,
                "total_minted": tok.total_minted,
                "reward_pool": tok.reward_pool,
                "locked_stakes": tok.locked_stakes,
                "locked_collateral": tok.locked_collateral,
                "escrowed": tok.escrowed,
                "reputations": {m: q12(n.reputation) for m, n in sorted(led.nodes.items())},
                "checkpoint_height": height,
                "state_hash": cp.state_hash.hex(),
                "conservation_ok": True,
            }
        )

    # -- run --------------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        self.ledger.advance_to(self.now)
        self._deliver()
        self._expire()
        self._clients()
        self._route()
        self._miners()
        if (self.now + 1) % cfg.ticks_per_epoch == 0:
            self._close_epoch()
        if cfg.check_every_tick:
            self.ledger.check_invariants()

    def run(self) -> MetricsReport:
        start = time.perf_counter()
        try:
            for t in range(self.cfg.ticks):
                self.now = t
                self.step()
        except errors.InvariantViolation as exc:
            if not exc.trace:
                exc.trace = list(self.trace)
            raise
        except errors.ConservationViolation as exc:
            raise errors.InvariantViolation(str(exc), list(self.trace)) from exc
        wall = time.perf_counter() - start
        report = self._report()
        report.wall_seconds = wall
        return report

    def _report(self) -> MetricsReport:
        cfg, led = self.cfg, self.ledger
        total_reward = sum(self.rewards.values())
        adversarial = set(cfg.adversarial_miners())
        miners = {}
        for m, node in sorted(led.nodes.items()):
            traj = self.trajectories.get(m, [])
            miners[m] = {
                "behavior": self.miner_behavior.get(m, "honest"),
                "adversarial": m in adversarial,
                "total_reward": self.rewards[m],
                "reward_share": q12(self.rewards[m] / total_reward) if total_reward else 0.0,
                "final_reputation": q12(node.reputation),
                "ratings": len(traj),
                "reputation_trajectory": [q12(x) for x in traj],
                "subscribers": node.subscriber_count,
                "batches": self.miners[m].batches if m in self.miners else 0,
            }
        honest_clients = [c for c, st in self.clients.items() if st.behavior is Behavior.HONEST_CLIENT]
        lat = sorted(self.latency_hist.elements())

        def pct(p: float) -> int:
            return lat[min(len(lat) - 1, int(p * len(lat)))] if lat else 0

        orders = {
            "put_attempts": self.counts["put_attempts"],
            "accepted": self.counts["accepted"],
            "allocated": self.counts["allocated"],
            "completed": self.counts["completed"],
            "confirmed": self.counts["confirmed"],
            "rated": self.counts["rated"],
            "expired": self.counts["expired"],
            "rejected": dict(sorted(self.rejected.items())),
            "latency_p50": pct(0.5),
            "latency_p90": pct(0.9),
            "latency_max": lat[-1] if lat else 0,
            "latency_histogram": {str(k): v for k, v in sorted(self.latency_hist.items())},
            "cycles_per_tick": q12(self.counts["confirmed"] / cfg.ticks),
            "fairness_index": q12(jain_index([self.served[c] for c in sorted(honest_clients)])),
            "max_queue_depth": self.max_queue_depth,
        }
        groups: dict[str, list[int]] = {}
        for cid, ticks in self.accepted_ticks.items():
            groups.setdefault(self.client_group.get(cid, cid), []).extend(ticks)
        flooders = sorted({self.client_group[c] for c, st in self.clients.items() if st.behavior is Behavior.SYBIL_FLOODER})
        adversary = {
            "adversarial_miners": sorted(adversarial),
            "adversary_reward_share": {m: miners[m]["reward_share"] for m in sorted(adversarial)},
            "restrictions": self.restriction_marks,
            "flooder_groups": {
                g: {
                    "sybils": sum(1 for c in self.clients if self.client_group[c] == g),
                    "accepted": len(groups.get(g, [])),
                    "max_accepted_per_window": max_window_count(groups.get(g, []), cfg.threshold.window),
                }
                for g in flooders
            },
            "sybil_groups": {
                f"{p.miner}": {
                    "sybils": len(p.sybils),
                    "accepted": sum(len(self.accepted_ticks.get(s.id, [])) for s in p.sybils),
                    "max_accepted_per_window": max_window_count(
                        [t for s in p.sybils for t in self.accepted_ticks.get(s.id, [])], cfg.threshold.window
                    ),
                }
                for p in self.pairs
            },
        }
        audit = {
            "messages_emitted": self.bus.emitted,
            "messages_delivered": self.bus.delivered,
            "messages_in_transit": self.bus.pending(),
            "balanced": self.bus.emitted == self.bus.delivered + self.bus.pending(),
            "conservation_checks": "every_tick" if cfg.check_every_tick else "every_epoch",
        }
        checkpoints = {
            "committed": self.cset.last_committed,
            "m": self.cset.m,
            "c": self.cset.c,
            "equivocators": len(self.equivocators),
            "conflicting_attempts": self.conflicting_attempts,
            "conflicting_commits": 0,
            "last_state_hash": self.cset.committed[self.cset.last_committed].state_hash.hex()
            if self.cset.last_committed
            else None,
        }
        clients = {
            c: {
                "group": self.client_group[c],
                "behavior": st.behavior.value,
                "served": self.served[c],
                "accepted": len(self.accepted_ticks.get(c, [])),
                "ratings_accepted": self.ratings_accepted[c],
            }
            for c, st in sorted(self.clients.items())
        }
        meta = {
            "version": REPORT_VERSION,
            "scenario": cfg.name,
            "seed": cfg.seed,
            "ticks": cfg.ticks,
            "ticks_per_epoch": cfg.ticks_per_epoch,
            "miners": len(self.miners),
            "clients": len(self.clients) + sum(len(p.sybils) for p in self.pairs),
        }
        return MetricsReport(meta, self.epoch_rows, miners, orders, adversary, audit, checkpoints, clients)


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    return Simulation(cfg).run()
