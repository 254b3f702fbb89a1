from fractions import Fraction

import pytest

from aimarket import errors
from aimarket.assets import TOKEN
from aimarket.economics import (
    EpochFlows,
    FeePolicy,
    InflationParams,
    ListingEntry,
    TokenState,
    advance_epoch,
    charged_payment,
    display_rating,
    fee_split,
    listing_scores,
    rank_providers,
)

from conftest import miner, staked_client

MILLION = 1_000_000 * TOKEN


def genesis():
    return TokenState(total_minted=MILLION, circulating=MILLION)


def test_no_flows_mints_into_pool():
    t, rep = advance_epoch(genesis(), InflationParams())
    assert t.circulating == MILLION
    assert t.reward_pool == 500 * TOKEN
    assert t.total_minted == MILLION + 500 * TOKEN
    assert rep.minted == 500 * TOKEN and rep.circulating_delta == 0


def test_lockups_exceeding_mint_deflate():
    t, rep = advance_epoch(genesis(), InflationParams(), EpochFlows(locks=1000 * TOKEN, distributed=500 * TOKEN))
    assert rep.circulating_delta == -500 * TOKEN
    assert rep.deflationary


def test_unlock_flood():
    start = TokenState(total_minted=MILLION, circulating=MILLION - 5000 * TOKEN, locked_stakes=5000 * TOKEN)
    t, rep = advance_epoch(start, InflationParams(), EpochFlows(unlocks=2000 * TOKEN, distributed=500 * TOKEN))
    assert rep.circulating_delta == 2500 * TOKEN


def test_advance_epoch_is_pure():
    g = genesis()
    advance_epoch(g, InflationParams())
    assert g == genesis()


def test_cannot_unlock_more_than_locked():
    with pytest.raises(errors.InsufficientBalance):
        advance_epoch(genesis(), InflationParams(), EpochFlows(unlocks=1))


def test_conservation_check_detects_drift():
    t = genesis()
    t.circulating -= 1
    with pytest.raises(errors.ConservationViolation):
        t.check()


def test_fee_split():
    assert fee_split(1000, FeePolicy(Fraction(2, 100))) == (980, 20)
    assert fee_split(1000, FeePolicy(Fraction(0))) == (1000, 0)
    assert fee_split(49, FeePolicy.of(0.02)) == (49, 0)


def test_charged_payment_on_uncharged(ledger, keyring):
    staked_client(ledger, "A")
    miner(ledger, "M")
    oid = ledger.put_order("A", "text")
    with pytest.raises(errors.NotCharged):
        charged_payment(ledger, oid, FeePolicy())


def entry(m, rating, subs, staked, services=("text",)):
    return ListingEntry(m, rating, subs, staked, frozenset(services))


def test_rank_single():
    assert rank_providers([entry("a", 3, 1, 1)]) == ["a"]


def test_rank_by_rating_dominance():
    assert rank_providers([entry("lo", 1, 5, 5), entry("hi", 5, 5, 5)], {"rating": 1, "subscribers": 0, "staked": 0})[0] == "hi"


def test_rank_min_max_example():
    a, b = entry("A", 4, 100, 1000), entry("B", 5, 10, 100)
    w = {"rating": 1 / 3, "subscribers": 1 / 3, "staked": 1 / 3}
    scores = listing_scores([a, b], w)
    assert scores["A"] == pytest.approx(2 / 3)
    assert scores["B"] == pytest.approx(1 / 3)
    assert rank_providers([b, a], w) == ["A", "B"]


def test_rank_filters_by_service():
    es = [entry("t", 5, 1, 1, ("text",)), entry("i", 1, 1, 1, ("image",))]
    assert rank_providers(es, service="image") == ["i"]
    with pytest.raises(errors.EmptyListing):
        rank_providers(es, service="video")


def test_rank_rejects_bad_weights():
    with pytest.raises(ValueError):
        rank_providers([entry("a", 1, 1, 1)], {"rating": 0, "subscribers": 0, "staked": 0})
    with pytest.raises(ValueError):
        rank_providers([entry("a", 1, 1, 1)], {"charisma": 1})


def test_display_rating_range():
    assert display_rating(0) == 1 and display_rating(100) == 5
