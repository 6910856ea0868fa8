import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizon.cache import KvCache, absolute_coordinates
from horizon.errors import ConfigError, HorizonRangeError, ProtocolError

TOKENS = 4  # per frame; small so the cache tests stay cheap


def kv(layers=2):
    k = [np.zeros((3 * TOKENS, 1, 4), np.float32) for _ in range(layers)]
    return k, [x.copy() for x in k]


def fill(cache, n_blocks, start=1):
    for b in range(start, start + n_blocks):
        cache.append_block(kv(), range(3 * b - 2, 3 * b + 1))
    return cache


def test_first_frame_is_sink():
    c = fill(KvCache(), 1)
    assert [e.is_sink for e in c.entries] == [True, False, False]
    assert c.resident_frames() == [1, 2, 3]


def test_fifo_eviction_by_block():
    c = fill(KvCache(capacity=6), 3)
    assert c.resident_frames() == [1, 4, 5, 6, 7, 8, 9]
    evicted = c.append_block(kv(), [10, 11, 12])
    assert evicted == [4, 5, 6]
    assert c.resident_frames() == [1, 7, 8, 9, 10, 11, 12]


def test_append_rejects_gaps_and_repeats():
    c = fill(KvCache(), 1)
    with pytest.raises(ProtocolError):
        c.append_block(kv(), [5, 7, 8])
    with pytest.raises(ProtocolError):
        c.append_block(kv(), [1, 2, 3])


def test_coordinates_within_horizon_equal_logical():
    c = fill(KvCache(), 2)
    assert c.assign_coordinates(6) == {i: i for i in range(1, 7)}


def test_coordinates_past_horizon():
    c = fill(KvCache(capacity=6), 8)  # frames up to 24 committed
    c.begin_block([25, 26, 27])
    coords = c.assign_coordinates()
    assert [coords[i] for i in (25, 26, 27)] == [19, 20, 21]
    assert coords[1] == 1
    assert [coords[i] for i in range(19, 25)] == list(range(13, 19))


def test_window_slide_with_sink_example():
    # resident {1(sink), 25..30} while generating the block ending at 30
    c = fill(KvCache(capacity=6), 10)
    assert c.resident_frames() == [1, 25, 26, 27, 28, 29, 30]
    coords = c.assign_coordinates(30)
    assert [coords[i] for i in (28, 29, 30)] == [19, 20, 21]
    assert coords[25] == 16
    assert coords[1] == max(1, 21 - 29)


def test_unbounded_semanticization():
    c = fill(KvCache(mode="unbounded"), 7)
    c.begin_block([22, 23, 24])
    coords = c.assign_coordinates()
    assert [coords[i] for i in (1, 2, 3)] == [1, 1, 1]
    assert c.semanticize() == (1, 2, 3)


def test_semanticize_boundaries():
    c = fill(KvCache(mode="unbounded"), 6)
    c.begin_block([19, 20, 21])
    assert c.semanticize() == ()
    c = fill(KvCache(mode="unbounded"), 8)
    c.begin_block([25, 26, 27])
    assert c.semanticize() == (1, 2, 3, 4, 5, 6)
    coords = c.assign_coordinates()
    assert all(coords[i] == 1 for i in range(1, 7))
    with pytest.raises(ProtocolError):
        KvCache().semanticize(9)


def test_coordinate_for_future_frame_is_error():
    c = fill(KvCache(), 2)
    with pytest.raises(ProtocolError):
        c.assign_coordinates(3)


def test_flush_keeps_sink_and_last():
    c = fill(KvCache(capacity=6), 7)
    assert c.resident_frames() == [1, 16, 17, 18, 19, 20, 21]
    c.kv_flush()
    assert c.resident_frames() == [1, 21]
    assert c.entries[0].is_sink
    state = c.resident_frames()
    c.kv_flush()
    assert c.resident_frames() == state


def test_flush_minimal_and_errors():
    c = KvCache()
    with pytest.raises(ProtocolError):
        c.kv_flush()
    c = fill(KvCache(), 1)
    c.kv_flush()
    assert c.resident_frames() == [1, 3]


def test_flush_then_continue_from_last():
    c = fill(KvCache(capacity=6), 9)
    c.kv_flush()
    c.begin_block([28, 29, 30])
    coords = c.assign_coordinates()
    assert coords[27] == coords[28] - 1
    assert coords[1] == 1


def test_flush_cost_independent_of_occupancy():
    costs = []
    for n in (1, 3, 10, 40):
        c = fill(KvCache(mode="unbounded"), n)
        before = c.counters["token_ops"]
        c.kv_flush()
        costs.append(c.counters["token_ops"] - before)
    assert costs == [0, 0, 0, 0]


def test_cut_examples():
    c = fill(KvCache(), 1)
    c.begin_block([4, 5, 6])
    c.apply_cut(15)
    coords = c.assign_coordinates()
    assert [coords[i] for i in (4, 5, 6)] == [4, 20, 21]

    c = fill(KvCache(), 1)
    c.begin_block([4, 5, 6])
    c.apply_cut(6)
    assert [c.assign_coordinates()[i] for i in (4, 5, 6)] == [4, 11, 12]


def test_cut_out_of_horizon():
    c = fill(KvCache(), 1)
    c.begin_block([4, 5, 6])
    with pytest.raises(HorizonRangeError):
        c.apply_cut(90)
    c.apply_cut(90, force=True)
    assert [c.assign_coordinates()[i] for i in (4, 5, 6)] == [4, 95, 96]
    assert c.active_forced


def test_cut_resumption_and_segments():
    c = fill(KvCache(), 1)
    c.begin_block([4, 5, 6])
    c.apply_cut(15)
    c.append_block(kv(), [4, 5, 6])
    c.begin_block([7, 8, 9])
    coords = c.assign_coordinates()
    assert [coords[i] for i in (7, 8, 9)] == [4, 5, 6]
    assert [coords[i] for i in (1, 2, 3, 4, 5, 6)] == [1, 2, 3, 4, 20, 21]
    assert [e.segment_id for e in c.entries] == [0, 0, 0, 1, 1, 1]


def test_cut_needs_active_block():
    c = fill(KvCache(), 1)
    with pytest.raises(ProtocolError):
        c.apply_cut(3)
    c.begin_block([4, 5, 6])
    c.apply_cut(3)
    with pytest.raises(ProtocolError):
        c.apply_cut(3)


def test_bad_configuration():
    with pytest.raises(ConfigError):
        KvCache(f0=22, f_limit=21)
    with pytest.raises(ConfigError):
        KvCache(mode="paged")


def test_snapshot_rows():
    c = fill(KvCache(), 2)
    rows = c.snapshot(c.assign_coordinates(6))
    assert rows[0] == {"logical_index": 1, "coordinate": 1, "is_sink": True, "segment_id": 0}
    assert [r["logical_index"] for r in rows] == c.resident_frames()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.sampled_from([3, 6, 9, 12]), st.integers(3, 21))
def test_fixed_mode_invariants(n_blocks, capacity, f0):
    c = KvCache(capacity=capacity, f0=f0)
    for b in range(1, n_blocks + 1):
        idx = (3 * b - 2, 3 * b - 1, 3 * b)
        c.begin_block(idx)
        coords = c.assign_coordinates()
        assert all(1 <= v <= 21 for v in coords.values())
        assert coords[idx[-1]] == min(idx[-1], f0)
        # unclamped residents keep their logical spacing
        free = sorted(li for li, v in coords.items() if v > 1)
        for a, bb in zip(free, free[1:]):
            assert coords[bb] - coords[a] == bb - a
        if idx[-1] <= f0:
            assert coords == absolute_coordinates(c, idx[-1])
        c.append_block(kv(), idx)
        assert c.non_sink_count() <= capacity
        assert sum(e.is_sink for e in c.entries) == 1
