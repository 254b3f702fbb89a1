import pytest
from hypothesis import given
from hypothesis import strategies as st

from aimarket import errors
from aimarket.ledger import NodeInfo
from aimarket.scheduler import BatchEntry, MinerStatus, RequestBatch, build_schedule, compute_weights, set_status


@pytest.mark.parametrize(
    "stakes, weights",
    [((100, 100), [1, 1]), ((300, 100, 250), [3, 1, 2]), ((1,), [1])],
)
def test_compute_weights(stakes, weights):
    assert compute_weights(stakes) == weights


def test_compute_weights_rejects_zero():
    with pytest.raises(errors.ZeroStake):
        compute_weights([100, 0])
    with pytest.raises(errors.EmptyBatch):
        compute_weights([])


def _batch(*entries):
    return RequestBatch("m", tuple(BatchEntry(c, tuple(ids), s) for c, ids, s in entries))


def test_three_client_schedule():
    sched = build_schedule(
        _batch(("A", ["a1", "a2", "a3"], 300), ("B", ["b1", "b2"], 100), ("C", ["c1", "c2"], 200))
    )
    assert sched.serve_order == ("a1", "b1", "c1", "a2", "c2", "a3")
    assert sched.deferred == ("b2",)
    assert sched.rounds_used == 3


def test_single_client_weight_one_defers_rest():
    sched = build_schedule(_batch(("A", [1, 2, 3, 4, 5], 50)))
    assert sched.serve_order == (1,)
    assert sched.deferred == (2, 3, 4, 5)


def test_equal_stakes_reduce_to_round_robin():
    sched = build_schedule(_batch(("C", [3], 10), ("A", [1], 10), ("B", [2], 10)))
    assert sched.serve_order == (1, 2, 3)
    assert sched.deferred == ()


def test_batch_validation():
    with pytest.raises(errors.EmptyBatch):
        RequestBatch("m", ())
    with pytest.raises(errors.ZeroStake):
        _batch(("A", [1], 0))


@given(
    st.lists(
        st.tuples(st.integers(1, 6), st.integers(1, 8)), min_size=1, max_size=6
    )
)
def test_schedule_partitions_requests(spec):
    entries, next_id = [], 0
    for i, (mult, n) in enumerate(spec):
        entries.append((f"c{i}", list(range(next_id, next_id + n)), mult * 7))
        next_id += n
    sched = build_schedule(_batch(*entries))
    assert sorted(sched.serve_order + sched.deferred) == list(range(next_id))
    weights = compute_weights([s for _, _, s in entries])
    assert sched.rounds_used == max(min(len(ids), w) for (_, ids, _), w in zip(entries, weights))


def test_status_transitions():
    node = NodeInfo("m", 1, MinerStatus.READY, frozenset({"text"}))
    set_status(node, MinerStatus.BUSY)
    assert node.status is MinerStatus.BUSY
    with pytest.raises(errors.IllegalTransition):
        set_status(node, MinerStatus.READY, schedule_done=False)
    set_status(node, MinerStatus.READY)
    set_status(node, MinerStatus.UNREGISTERED)
    with pytest.raises(errors.IllegalTransition):
        set_status(node, MinerStatus.BUSY)
