from fractions import Fraction

import pytest

from aimarket import errors
from aimarket.assets import MAX_AMOUNT, NATIVE, TOKEN, USD_MICRO, AssetKind, check_amount
from aimarket.economics import InflationParams
from aimarket.encoding import Keyring
from aimarket.ledger import UNCHARGED, Charged, GlobalLedger, claim_message
from aimarket.reputation import Rating
from aimarket.scheduler import MinerStatus

from conftest import fund, miner, staked_client


def allocate(ledger, client, miner_id, service="text", mode=UNCHARGED):
    oid = ledger.put_order(client, service, mode)
    ledger.record_allocation(oid, miner_id)
    return oid


def complete(ledger, keyring, oid):
    m = ledger.task_cycles[oid].miner
    ledger.record_completion(oid, keyring.sign(m, claim_message(oid, m)))


# staking -------------------------------------------------------------------


def test_native_stake_grants_one_unit_per_dollar(ledger):
    sp = staked_client(ledger, "A", tokens=100, usd=100)
    assert sp.allowance == 100
    assert ledger.token.locked_stakes == 100 * TOKEN
    assert ledger.balance("A") == 0


def test_external_stake_is_discounted_by_q(ledger):
    sp = ledger.stake_tokens("B", AssetKind.external("WBTC"), 3, 100 * USD_MICRO)
    assert sp.allowance == 10
    # external assets never enter the native supply
    assert ledger.token.locked_stakes == 0


def test_zero_stake_rejected(ledger):
    with pytest.raises(errors.ZeroStake):
        ledger.stake_tokens("C", NATIVE, 0, 0)


def test_second_active_pass_rejected(ledger):
    staked_client(ledger, "A")
    fund(ledger, "A", 10)
    with pytest.raises(errors.PassAlreadyActive):
        ledger.stake_tokens("A", NATIVE, 10 * TOKEN, 10 * USD_MICRO)


def test_unstake_refunds_exactly(ledger):
    staked_client(ledger, "A", tokens=100)
    assert ledger.unstake_tokens("A") == 100 * TOKEN
    assert ledger.balance("A") == 100 * TOKEN
    assert not ledger.passes["A"].active
    ledger.check_invariants()


def test_unstake_without_pass(ledger):
    with pytest.raises(errors.NoActivePass):
        ledger.unstake_tokens("nobody")


def test_unstake_blocked_by_inflight_order(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M")
    allocate(ledger, "A", "M")
    with pytest.raises(errors.InFlightOrders):
        ledger.unstake_tokens("A")


def test_amount_bounds():
    assert check_amount(MAX_AMOUNT) == MAX_AMOUNT
    with pytest.raises(errors.AmountOverflow):
        check_amount(MAX_AMOUNT + 1)
    with pytest.raises(errors.AmountOverflow):
        check_amount(-1)


# orders --------------------------------------------------------------------


def test_put_order_decrements_allowance(ledger):
    staked_client(ledger, "A")
    oid = ledger.put_order("A", "text")
    assert oid == 1
    assert ledger.passes["A"].remaining == 99


def test_put_order_image_costs_its_weight(ledger):
    staked_client(ledger, "A")
    ledger.put_order("A", "image")
    assert ledger.passes["A"].remaining == 96


def test_put_order_without_pass(ledger):
    with pytest.raises(errors.InvalidServicePass):
        ledger.put_order("A", "text")


def test_put_order_exhausted_allowance(ledger):
    staked_client(ledger, "A", tokens=3, usd=3)
    ledger.put_order("A", "text")
    with pytest.raises(errors.InsufficientAllowance):
        ledger.put_order("A", "image")


def test_unknown_service(ledger):
    staked_client(ledger, "A")
    with pytest.raises(errors.UnknownServiceType):
        ledger.put_order("A", "video")


def test_charged_price_zero_rejected_at_construction():
    with pytest.raises(errors.ZeroPrice):
        Charged(0)


def test_charged_order_escrows_price(ledger):
    fund(ledger, "A", 50)
    oid = ledger.put_order("A", "text", Charged(20 * TOKEN))
    assert ledger.escrow[oid] == 20 * TOKEN
    assert ledger.token.escrowed == 20 * TOKEN
    ledger.check_invariants()


def test_charged_order_needs_balance(ledger):
    with pytest.raises(errors.InsufficientBalance):
        ledger.put_order("A", "text", Charged(TOKEN))


# allocation and completion -------------------------------------------------


def test_allocation_happy_path_and_duplicate(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = ledger.put_order("A", "text")
    rec = ledger.record_allocation(oid, "M")
    assert rec.miner == "M" and not rec.completed
    with pytest.raises(errors.AlreadyAllocated):
        ledger.record_allocation(oid, "M")


def test_allocation_to_busy_miner(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M").status = MinerStatus.BUSY
    oid = ledger.put_order("A", "text")
    with pytest.raises(errors.MinerUnavailable):
        ledger.record_allocation(oid, "M")


def test_completion_adds_service_weight(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = allocate(ledger, "A", "M", "image")
    complete(ledger, keyring, oid)
    assert ledger.contributions.get("M") == 4
    assert ledger.task_cycles[oid].completed


def test_forged_claim(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = allocate(ledger, "A", "M")
    with pytest.raises(errors.BadSignature):
        ledger.record_completion(oid, keyring.sign("someone-else", claim_message(oid, "M")))


def test_duplicate_completion_does_not_double_count(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = allocate(ledger, "A", "M")
    complete(ledger, keyring, oid)
    with pytest.raises(errors.AlreadyCompleted):
        complete(ledger, keyring, oid)
    assert ledger.contributions.get("M") == 1


def test_completion_before_allocation(ledger, keyring):
    staked_client(ledger, "A")
    oid = ledger.put_order("A", "text")
    with pytest.raises(errors.NotAllocated):
        ledger.record_completion(oid, b"x" * 32)


def test_charged_completion_pays_miner_and_fee(ledger, keyring):
    fund(ledger, "A", 2000)
    miner(ledger, "M")
    oid = allocate(ledger, "A", "M", mode=Charged(1000 * TOKEN, "M"))
    complete(ledger, keyring, oid)
    assert ledger.balance("M") == 980 * TOKEN
    assert ledger.balance("coordinators") == 20 * TOKEN
    assert ledger.contributions.get("M") == 0
    ledger.check_invariants()


def test_expiry_refunds_allowance_and_escrow(ledger):
    staked_client(ledger, "A")
    fund(ledger, "A", 10)
    miner(ledger, "M")
    o1 = ledger.put_order("A", "image")
    o2 = allocate(ledger, "A", "M", mode=Charged(10 * TOKEN))
    ledger.expire_order(o1)
    ledger.expire_order(o2)
    assert ledger.passes["A"].remaining == 100
    assert ledger.balance("A") == 10 * TOKEN
    assert ledger.order_stage(o2) == "expired"
    assert ledger.inflight(client="A") == 0
    ledger.check_invariants()


def test_expired_order_cannot_complete(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = allocate(ledger, "A", "M")
    ledger.expire_order(oid)
    with pytest.raises(errors.OrderExpired):
        complete(ledger, keyring, oid)


def test_order_stages(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = ledger.put_order("A", "text")
    assert ledger.order_stage(oid) == "put"
    ledger.record_allocation(oid, "M")
    assert ledger.order_stage(oid) == "allocated"
    complete(ledger, keyring, oid)
    assert ledger.order_stage(oid) == "completed"
    ledger.rate_service("A", "M", Rating.GOOD)
    assert ledger.order_stage(oid) == "rated"
    with pytest.raises(errors.OrderNotFound):
        ledger.order_stage(999)


# ratings -------------------------------------------------------------------


def test_first_good_rating_raises_reputation(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    complete(ledger, keyring, allocate(ledger, "A", "M"))
    ledger.rate_service("A", "M", Rating.GOOD)
    node = ledger.nodes["M"]
    assert node.rating_sum == 1
    assert node.reputation > 50


def test_only_latest_rating_counts(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    complete(ledger, keyring, allocate(ledger, "A", "M"))
    ledger.rate_service("A", "M", Rating.GOOD)
    ledger.rate_service("A", "M", Rating.BAD)
    node = ledger.nodes["M"]
    assert node.rating_sum == -1
    assert node.latest_ratings == {"A": Rating.BAD}


def test_rating_requires_concluded_service(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M")
    with pytest.raises(errors.NoCompletedService):
        ledger.rate_service("A", "M", Rating.GOOD)
    allocate(ledger, "A", "M")
    with pytest.raises(errors.NoCompletedService):
        ledger.rate_service("A", "M", Rating.GOOD)


def test_expired_allocation_is_rateable(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M")
    ledger.expire_order(allocate(ledger, "A", "M"))
    ledger.rate_service("A", "M", Rating.BAD)
    assert ledger.nodes["M"].reputation < 50


# miners --------------------------------------------------------------------


def test_register_sets_ready_and_neutral_reputation(ledger):
    node = miner(ledger, "M", collateral=100)
    assert node.status is MinerStatus.READY
    assert node.reputation == 50.0
    assert ledger.token.locked_collateral == 100 * TOKEN


def test_register_below_minimum(ledger):
    fund(ledger, "M", 50)
    with pytest.raises(errors.CollateralTooLow):
        ledger.register_miner("M", 50 * TOKEN, {"text"})


def test_register_twice(ledger):
    miner(ledger, "M")
    fund(ledger, "M", 100)
    with pytest.raises(errors.AlreadyRegistered):
        ledger.register_miner("M", 100 * TOKEN, {"text"})


def test_unregister_returns_collateral(ledger):
    miner(ledger, "M", collateral=150)
    assert ledger.unregister_miner("M") == 150 * TOKEN
    assert ledger.balance("M") == 150 * TOKEN
    assert ledger.nodes["M"].status is MinerStatus.UNREGISTERED
    ledger.check_invariants()


def test_unregister_with_work_in_flight(ledger):
    staked_client(ledger, "A")
    miner(ledger, "M")
    allocate(ledger, "A", "M")
    with pytest.raises(errors.InFlightWork):
        ledger.unregister_miner("M")


def test_reregistration_keeps_rating_history(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    complete(ledger, keyring, allocate(ledger, "A", "M"))
    ledger.rate_service("A", "M", Rating.BAD)
    rep = ledger.nodes["M"].reputation
    ledger.unregister_miner("M")
    ledger.register_miner("M", 100 * TOKEN, {"text"})
    assert ledger.nodes["M"].reputation == rep


def test_eligible_miners_filters_status_and_service(ledger):
    miner(ledger, "M1", services=("text",))
    miner(ledger, "M2", services=("image",))
    miner(ledger, "M3", services=("text",)).status = MinerStatus.BUSY
    assert ledger.eligible_miners("text") == [("M1", 50.0)]


# epochs and hashing --------------------------------------------------------


def test_close_epoch_distributes_pool_and_replenishes(ledger, keyring):
    fund(ledger, "treasury", 1_000_000 - 200)
    staked_client(ledger, "A")
    miner(ledger, "M")
    complete(ledger, keyring, allocate(ledger, "A", "M"))
    minted, epoch = ledger.close_epoch(InflationParams(Fraction(5, 100), 100))
    assert minted == 500 * TOKEN
    assert epoch.allocations == {"M": 500 * TOKEN}
    assert ledger.passes["A"].remaining == 100
    assert ledger.contributions.total() == 0
    ledger.check_invariants()


def test_close_epoch_without_contribution_rolls_over(ledger):
    fund(ledger, "treasury", 1_000_000)
    ledger.close_epoch(InflationParams())
    _, epoch = ledger.close_epoch(InflationParams())
    assert epoch.allocations == {}
    assert ledger.token.reward_pool == epoch.carried > 500 * TOKEN


def _replay(keyring):
    led = GlobalLedger(keyring, min_collateral=100 * TOKEN)
    staked_client(led, "A")
    miner(led, "M")
    complete(led, keyring, allocate(led, "A", "M"))
    led.rate_service("A", "M", Rating.GOOD)
    led.close_epoch(InflationParams())
    return led


def test_identical_op_logs_hash_identically():
    a, b = _replay(Keyring(b"k")), _replay(Keyring(b"k"))
    assert a.state_hash() == b.state_hash()
    b.advance_to(5)
    assert a.state_hash() != b.state_hash()


def test_snapshot_is_independent(ledger):
    staked_client(ledger, "A")
    snap = ledger.snapshot()
    ledger.put_order("A", "text")
    assert snap.state_hash() != ledger.state_hash()
    assert snap.passes["A"].remaining == 100
