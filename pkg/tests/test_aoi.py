import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavrelay.aoi import AoiTable, OutOfOrderError, average_aoi_from_log


def test_initial_ages_zero():
    t = AoiTable(4)
    assert t.slot == 0 and list(t.ages) == [0, 0, 0, 0]


def test_hand_computed_average():
    # two sources, 4 slots; source 0 refreshed at slot 2 (generated at slot 1), source 1 never
    t = AoiTable(2)
    t.tick(1)
    t.tick(2).record_delivery(0, 2, generated=1)
    t.tick(3)
    t.tick(4)
    # ages source 0: 1,1,2,3 ; source 1: 1,2,3,4
    assert t.average_aoi() == pytest.approx((1 + 1 + 2 + 3 + 1 + 2 + 3 + 4) / 8, rel=1e-12)
    assert t.average_aoi(waypoints=[1]) == pytest.approx(10 / 4)


def test_just_in_time_delivery_resets_to_zero():
    t = AoiTable(1)
    t.tick(1)
    t.tick(2)
    t.record_delivery(0, 2)
    assert t.age(0) == 0
    t.tick(3)
    assert t.age(0) == 1


def test_stale_delivery_ignored_and_order_enforced():
    t = AoiTable(1)
    for s in range(1, 6):
        t.tick(s)
    t.record_delivery(0, 5, generated=4)
    t.record_delivery(0, 5, generated=2)
    assert t.age(0) == 1
    with pytest.raises(OutOfOrderError):
        t.record_delivery(0, 4)
    with pytest.raises(OutOfOrderError):
        t.tick(7)
    with pytest.raises(ValueError):
        t.record_delivery(0, 5, generated=6)


def test_average_guards():
    t = AoiTable(2)
    with pytest.raises(ValueError):
        t.average_aoi()
    t.tick(1)
    with pytest.raises(ValueError):
        t.average_aoi(waypoints=[])
    with pytest.raises(ValueError):
        t.average_aoi(horizon=3)


def test_copy_is_independent():
    t = AoiTable(2)
    t.tick(1)
    c = t.copy()
    c.tick(2)
    assert t.slot == 1 and c.slot == 2


deliveries = st.lists(st.tuples(st.integers(1, 30), st.integers(0, 3), st.integers(0, 30)), max_size=25)


@given(deliveries, st.integers(1, 30))
def test_running_average_matches_log_oracle(log, horizon):
    log = sorted((t, p, min(g, t)) for t, p, g in log if t <= horizon)
    table = AoiTable(4)
    i = 0
    for s in range(1, horizon + 1):
        table.tick(s)
        while i < len(log) and log[i][0] == s:
            table.record_delivery(log[i][1], s, log[i][2])
            i += 1
    assert table.average_aoi() == pytest.approx(average_aoi_from_log(log, 4, horizon), rel=1e-12)


@given(st.lists(st.booleans(), min_size=1, max_size=40))
def test_age_grows_by_one_or_resets(events):
    table = AoiTable(1)
    prev = 0
    for s, deliver in enumerate(events, 1):
        table.tick(s)
        if deliver:
            table.record_delivery(0, s)
        age = table.age(0)
        assert age == prev + 1 or (deliver and age == 0)
        prev = age
    assert np.all(table.age_sums >= 0)
