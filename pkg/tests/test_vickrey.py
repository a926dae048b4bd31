import pytest
from hypothesis import given, strategies as st

from equidta.demand import ArrivalCostParams
from equidta.instances import COMMUTE
from equidta.vickrey import (BottleneckScenario, departure_profile, departure_rate, equilibrium_identities,
                             solve_analytic, system_optimum)


def test_toy_equilibrium():
    eq = solve_analytic(COMMUTE)
    got = (eq.t1, eq.t2, eq.t3, eq.n1, eq.n2, eq.cost_per_driver)
    assert got == pytest.approx((472, 496, 532, 60, 10, 44), abs=1e-9)
    assert eq.n1 * (eq.t2 - eq.t1) + eq.n2 * (eq.t3 - eq.t2) == pytest.approx(1800)


def test_empty_demand():
    s = BottleneckScenario(0, 30, 20, 540)
    eq = solve_analytic(s)
    assert eq.t1 == eq.t2 == eq.t3 == 520 and eq.cost_per_driver == 20
    so = system_optimum(s)
    assert so.arrival_window == (540, 540) and so.total_cost == 0


def test_symmetric_costs():
    s = BottleneckScenario(30, 30, 20, 540, ArrivalCostParams(0.5, 0.5))
    eq = solve_analytic(s)
    assert (eq.t1, eq.t3) == pytest.approx((519.5, 520.5))
    s = BottleneckScenario(60, 30, 20, 540, ArrivalCostParams(0.7, 0.7))
    lo, hi = system_optimum(s).arrival_window
    assert (540 - lo, hi - 540) == pytest.approx((1.0, 1.0))


@pytest.mark.parametrize("t,rate", [(480, 60), (471.9, 0), (500, 10), (532, 0)])
def test_departure_rate(t, rate):
    assert departure_rate(COMMUTE, t) == rate


def test_system_optimum_toy():
    so = system_optimum(COMMUTE)
    assert so.arrival_window == pytest.approx((492, 552))
    assert (so.early, so.late) == pytest.approx((48, 12))
    assert so.total_cost == pytest.approx(57600)


def test_beta_at_least_one_rejected():
    with pytest.raises(ValueError, match="singular"):
        BottleneckScenario(1800, 30, 20, 540, ArrivalCostParams(2.0, 1.0))


def test_profile_mass():
    prof = departure_profile(COMMUTE, 460, 540, 0.5)
    assert sum(r for _, r in prof) * 0.5 == pytest.approx(1800)


scenarios = st.builds(
    BottleneckScenario,
    st.floats(1, 1e4), st.floats(0.5, 100), st.floats(0.5, 60), st.floats(0, 1e3),
    st.builds(ArrivalCostParams, st.floats(0.05, 5), st.floats(0.05, 0.95)),
)


@given(scenarios)
def test_identities(s):
    eq = solve_analytic(s)
    ids = equilibrium_identities(s, eq)
    for v in ids.values():
        assert v == pytest.approx(eq.cost_per_driver, rel=1e-9)
    assert eq.t1 <= eq.t2 <= eq.t3
    assert eq.t3 - eq.t1 == pytest.approx(s.n_cars / s.cap, rel=1e-9)
    assert eq.n1 * (eq.t2 - eq.t1) + eq.n2 * (eq.t3 - eq.t2) == pytest.approx(s.n_cars, rel=1e-9)
    assert eq.n1 * (eq.t2 - eq.t1) == pytest.approx(s.cap * (s.t_desired - s.t_free - eq.t1), rel=1e-9)
    assert system_optimum(s).total_cost <= s.n_cars * eq.cost_per_driver * (1 + 1e-12)
