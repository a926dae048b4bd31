import pytest
from hypothesis import given, strategies as st

from equidta.demand import (ArrivalCostParams, Demand, DemandError, aggregate, arrival_penalty,
                            dump_demands, load_demands)
from equidta.instances import COMMUTE, toy_instance

P = ArrivalCostParams(2.0, 0.5)
HEADER = "origin,destination,desired_arrival,volume\n"


def test_single_row():
    table = load_demands(HEADER + "i,j,540,1800\n", P)
    assert len(table) == 1
    assert table.records[0] == Demand("i", "j", 540.0, 1800.0)


def test_duplicate_keys_summed():
    table = load_demands(HEADER + "i,j,540,100\ni,j,540,50\n", P)
    assert [d.volume for d in table.records] == [150.0]


@pytest.mark.parametrize("row,match", [
    ("i,j,540,0\n", "nonpositive volume"),
    ("i,j,540,-4\n", "nonpositive volume"),
    ("i,j,540\n", "malformed row"),
    ("i,j,soon,5\n", "malformed row"),
])
def test_bad_rows(row, match):
    with pytest.raises(DemandError, match=match):
        load_demands(HEADER + row, P)


def test_unknown_node_against_network():
    net, _, _ = toy_instance()
    with pytest.raises(DemandError, match="unknown node id"):
        load_demands(HEADER + "nowhere,j,540,5\n", P, net)


def test_per_record_override_and_roundtrip():
    text = "origin,destination,desired_arrival,volume,alpha,beta\ni,j,540,10,3,0.25\ni,j,550,5,,\n"
    table = load_demands(text, P)
    assert table.params_for(table.records[0]) == ArrivalCostParams(3.0, 0.25)
    assert table.params_for(table.records[1]) == P
    again = load_demands(dump_demands(table), P)
    assert [(d.key, d.volume, again.params_for(d)) for d in again.records] == \
        [(d.key, d.volume, table.params_for(d)) for d in table.records]


def test_params_must_be_positive():
    with pytest.raises(DemandError):
        ArrivalCostParams(0.0, 0.5)
    with pytest.raises(DemandError):
        ArrivalCostParams(2.0, -1.0)


@pytest.mark.parametrize("actual,desired,expected", [(540, 540, 0.0), (545, 540, 10.0), (536, 540, 2.0)])
def test_penalty_examples(actual, desired, expected):
    assert arrival_penalty(actual, desired, P) == pytest.approx(expected, abs=1e-12)


params = st.builds(ArrivalCostParams, st.floats(0.01, 10), st.floats(0.01, 10))
times = st.floats(-1e4, 1e4)


@given(times, params)
def test_penalty_zero_on_time(t, p):
    assert arrival_penalty(t, t, p) == 0.0


@given(times, st.floats(0.1, 100), params)
def test_penalty_slopes(desired, h, p):
    late = (arrival_penalty(desired + 2 * h, desired, p) - arrival_penalty(desired + h, desired, p)) / h
    early = (arrival_penalty(desired - h, desired, p) - arrival_penalty(desired - 2 * h, desired, p)) / h
    assert late == pytest.approx(p.alpha, rel=1e-6)
    assert early == pytest.approx(-p.beta, rel=1e-6)


@given(times, times, times, st.floats(0, 1), params)
def test_penalty_convex(desired, a, b, lam, p):
    mid = lam * a + (1 - lam) * b
    lhs = arrival_penalty(mid, desired, p)
    rhs = lam * arrival_penalty(a, desired, p) + (1 - lam) * arrival_penalty(b, desired, p)
    assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


rows = st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from("xy"),
                          st.sampled_from([500.0, 540.0]), st.floats(0.5, 1e3)), min_size=1, max_size=12)


@given(rows)
def test_aggregation_preserves_total_and_keys(recs):
    table = aggregate([Demand(*r) for r in recs], P)
    assert table.total == pytest.approx(sum(r[3] for r in recs))
    keys = [d.key for d in table.records]
    assert len(keys) == len(set(keys))


def test_toy_instance_demand():
    _, table, _ = toy_instance()
    assert table.total == COMMUTE.n_cars
