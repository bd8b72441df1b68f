import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bidpacer as bp

from oracles import enumerate_expected_clicks, random_pmf


@pytest.fixture
def uniform12():
    return bp.make_family("uniform", low=1, high=2)


class TestSolve:
    def test_single_auction(self, uniform12):
        vt = bp.solve(uniform12, 2, 1)
        assert vt.value(2, 1) == pytest.approx(1.0)
        assert vt.best_bid(2, 1) == 2

    def test_two_auctions_tie_breaks_low(self, uniform12):
        vt = bp.solve(uniform12, 2, 2)
        assert vt.value(2, 2) == pytest.approx(1.25)
        assert vt.best_bid(2, 2) == 1

    def test_zero_horizon(self, uniform12):
        vt = bp.solve(uniform12, 5, 0)
        assert np.all(vt.values == 0.0)

    def test_point_mass_budget_bound(self):
        vt = bp.solve(bp.point_mass(1), 3, 5)
        assert vt.value(3, 5) == pytest.approx(3.0)

    def test_base_cases(self, uniform12):
        vt = bp.solve(uniform12, 4, 3)
        assert np.all(vt.values[:, 0] == 0.0)
        assert np.all(vt.values[0, :] == 0.0)
        assert np.all(vt.policy[0, :] == 0)

    def test_invalid_args(self, uniform12):
        with pytest.raises(ValueError):
            bp.solve(uniform12, -1, 3)
        with pytest.raises(ValueError):
            bp.solve(uniform12, 3, -1)
        with pytest.raises(ValueError):
            bp.solve(uniform12, 3, 3, ctr=0.0)
        with pytest.raises(ValueError):
            bp.solve(uniform12, 3, 3, ctr=1.5)

    def test_oracle_equivalence_small(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pmf = random_pmf(rng, int(rng.integers(1, 6)), allow_above=True)
            budget = int(rng.integers(0, 6))
            horizon = int(rng.integers(1, 4))
            vt = bp.solve(pmf, budget, horizon)
            expected = enumerate_expected_clicks(pmf, vt.best_bid, budget, horizon)
            assert expected == pytest.approx(vt.value(budget, horizon), abs=1e-9)

    @settings(max_examples=40, deadline=None, derandomize=True)
    @given(
        st.integers(0, 10),
        st.integers(0, 6),
        st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8),
        st.floats(0.1, 1.0),
    )
    def test_monotone_and_bounded(self, budget, horizon, weights, ctr):
        weights = np.asarray(weights)
        pmf = bp.PricePmf(weights / weights.sum())
        vt = bp.solve(pmf, budget, horizon, ctr)
        values = vt.values
        assert np.all(values[:-1, :] <= values[1:, :] + 1e-12)
        assert np.all(values[:, :-1] <= values[:, 1:] + 1e-12)
        assert np.all(values >= -1e-12)
        assert np.all(values <= horizon + 1e-12)
        bids = vt.policy
        assert np.all(bids <= np.arange(budget + 1)[:, None])
        assert np.all(bids >= 0)

    def test_ctr_scaling_never_helps_less(self, uniform12):
        hi = bp.solve(uniform12, 4, 6, ctr=0.9)
        lo = bp.solve(uniform12, 4, 6, ctr=0.45)
        assert np.all(lo.values <= hi.values + 1e-12)

    def test_ctr_recursion_hand_check(self):
        # single auction, bid 1 against a point mass at 1 with ctr r wins r clicks
        vt = bp.solve(bp.point_mass(1), 1, 1, ctr=0.3)
        assert vt.value(1, 1) == pytest.approx(0.3)

    def test_above_mass_only_dampens(self):
        spiky = bp.PricePmf([0.5, 0.25], above_mass=0.25)
        flat = bp.PricePmf([0.5, 0.25, 0.25])
        v_spiky = bp.solve(spiky, 3, 4)
        v_flat = bp.solve(flat, 3, 4)
        assert np.all(v_spiky.values <= v_flat.values + 1e-12)


class TestBestBid:
    def test_zero_budget(self, uniform12):
        vt = bp.solve(uniform12, 3, 5)
        assert vt.best_bid(0, 5) == 0

    def test_worked_examples(self, uniform12):
        vt = bp.solve(uniform12, 2, 2)
        assert vt.best_bid(2, 2) == 1
        assert vt.best_bid(2, 1) == 2

    def test_out_of_range_rejected(self, uniform12):
        vt = bp.solve(uniform12, 2, 2)
        with pytest.raises(ValueError):
            vt.best_bid(3, 1)
        with pytest.raises(ValueError):
            vt.best_bid(1, 3)
        with pytest.raises(ValueError):
            vt.best_bid(-1, 1)


class TestCalibrateBudget:
    def test_point_mass_one(self):
        res = bp.calibrate_budget(bp.point_mass(1), 100, 0.1)
        assert res == bp.CalibrationResult(10, 10.0, True)

    def test_point_mass_two(self):
        res = bp.calibrate_budget(bp.point_mass(2), 100, 0.1)
        assert res.budget == 20
        assert res.reached

    def test_full_coverage(self):
        res = bp.calibrate_budget(bp.point_mass(1), 100, 0.999)
        assert res.budget == 100
        assert res.reached

    def test_smallest_budget(self):
        pmf = bp.make_family("uniform", low=1, high=6)
        res = bp.calibrate_budget(pmf, 50, 0.2)
        assert res.reached
        below = bp.solve(pmf, res.budget - 1, 50).value(res.budget - 1, 50)
        assert below < 0.2 * 50

    def test_unreachable_reports_flag(self):
        res = bp.calibrate_budget(bp.point_mass(2), 10, 0.5, ctr=0.2)
        assert not res.reached
        assert res.budget == 20  # horizon * support_max
        assert res.value == pytest.approx(2.0)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            bp.calibrate_budget(bp.point_mass(1), 10, 0.0)
        with pytest.raises(ValueError):
            bp.calibrate_budget(bp.point_mass(1), 10, 1.0)


class TestLuekerThreshold:
    def test_uniform_pace_one(self):
        pmf = bp.make_family("uniform", low=1, high=4)
        assert bp.lueker_threshold(pmf, 10, 10) == 2

    def test_zero_budget(self):
        pmf = bp.make_family("uniform", low=1, high=4)
        assert bp.lueker_threshold(pmf, 0, 5) == 0

    def test_point_mass_exact_fit(self):
        assert bp.lueker_threshold(bp.point_mass(3), 30, 10) == 3

    def test_cheapest_price_too_dear(self):
        pmf = bp.make_family("bimodal_gap", low=1, high=10, low_mass=0.5)
        assert bp.lueker_threshold(pmf, 1, 10) == 0

    def test_capped_at_budget(self):
        pmf = bp.make_family("uniform", low=1, high=4)
        # pace 2 admits a threshold of 3, but only 2 units remain
        assert bp.lueker_threshold(pmf, 2, 1) == 2
