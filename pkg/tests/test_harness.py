import numpy as np
import pytest

import bidpacer as bp

from oracles import offline_optimal_bruteforce


class _OverBidder(bp.BidPolicy):
    name = "overbidder"

    def next_bid(self, budget_left, auctions_left):
        return budget_left + 1


class TestRunSimulation:
    def test_fixed_price_point_mass_budget_arithmetic(self):
        # budget k*p buys exactly k clicks per period at a point-mass price p
        p, k = 3, 4
        market = bp.StochasticMarket(bp.point_mass(p), rng=np.random.default_rng(0))
        logs = bp.run_simulation(bp.FixedPrice(p), market, budget=k * p, horizon=10, periods=3)
        assert [log.clicks for log in logs] == [k, k, k]
        assert [log.spend for log in logs] == [k * p, k * p, k * p]

    def test_zero_budget(self):
        market = bp.StochasticMarket(bp.point_mass(1), rng=np.random.default_rng(0))
        logs = bp.run_simulation(bp.FixedPrice(5), market, budget=0, horizon=10, periods=2)
        assert all(log.clicks == 0 and log.spend == 0 for log in logs)

    def test_budget_conservation_fuzz(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            budget = int(rng.integers(0, 30))
            horizon = int(rng.integers(1, 20))
            pmf = bp.make_family("uniform", low=1, high=int(rng.integers(2, 9)))
            market = bp.StochasticMarket(pmf, ctr=0.7, rng=np.random.default_rng(rng.integers(2**31)))
            policy = bp.QLearning(budget, horizon, rng=np.random.default_rng(rng.integers(2**31)), epsilon=0.5)
            (log,) = bp.run_simulation(policy, market, budget, horizon, periods=1)
            assert log.spend == sum(r.feedback.price_paid for r in log.records)
            assert log.spend <= budget
            assert log.records[-1].feedback.budget_after == budget - log.spend
            assert log.clicks == sum(1 for r in log.records if r.feedback.price_paid > 0)

    def test_contract_breach_is_hard_failure(self):
        market = bp.StochasticMarket(bp.point_mass(1), rng=np.random.default_rng(0))
        with pytest.raises(bp.PolicyContractError):
            bp.run_simulation(_OverBidder(), market, budget=5, horizon=3, periods=1)

    def test_period_count_and_indices(self):
        market = bp.StochasticMarket(bp.point_mass(1), rng=np.random.default_rng(0))
        logs = bp.run_simulation(bp.FixedPrice(1), market, budget=2, horizon=4, periods=5)
        assert [log.period_index for log in logs] == list(range(5))
        assert all(len(log.records) == 4 for log in logs)


class TestOfflineOptimal:
    def test_cheapest_first(self):
        outcomes = [bp.AuctionOutcome(p) for p in (3, 1, 2, 5)]
        assert bp.offline_optimal(outcomes, 3) == 2

    def test_zero_budget(self):
        assert bp.offline_optimal([bp.AuctionOutcome(1)], 0) == 0

    def test_clickless_auctions_excluded(self):
        outcomes = [bp.AuctionOutcome(2, True), bp.AuctionOutcome(2, False)]
        assert bp.offline_optimal(outcomes, 4) == 1

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            n = int(rng.integers(0, 9))
            prices = rng.integers(1, 8, size=n)
            clickable = rng.random(n) < 0.8
            budget = int(rng.integers(0, 20))
            outcomes = [
                bp.AuctionOutcome(int(p), bool(c)) for p, c in zip(prices, clickable)
            ]
            assert bp.offline_optimal(outcomes, budget) == offline_optimal_bruteforce(
                prices, clickable, budget
            )


class TestCompetitiveRatio:
    def test_exact_match(self):
        log = bp.PeriodLog(0, 20, 10)
        log.records = [
            bp.AuctionRecord(10 - i, 2, bp.AuctionFeedback(2, True, True, 1, 19 - i))
            for i in range(10)
        ]
        assert bp.competitive_ratio([log], 10.0) == pytest.approx(1.0)

    def test_zero_clicks(self):
        log = bp.PeriodLog(0, 20, 10)
        assert bp.competitive_ratio([log], 10.0) == 0.0

    def test_reference_must_be_positive(self):
        with pytest.raises(ValueError):
            bp.competitive_ratio([bp.PeriodLog(0, 5, 5)], 0.0)

    def test_cumulative_series(self):
        logs = []
        for u, clicks in enumerate((4, 6)):
            log = bp.PeriodLog(u, 50, 10)
            log.records = [
                bp.AuctionRecord(10 - i, 1, bp.AuctionFeedback(1, True, True, 1, 49 - i))
                for i in range(clicks)
            ]
            logs.append(log)
        assert bp.cumulative_ratio_series(logs, 20.0) == pytest.approx([0.2, 0.5])


class TestConvergenceCurve:
    def test_always_wins_is_flat_one(self):
        market = bp.StochasticMarket(bp.point_mass(1), rng=np.random.default_rng(0))
        logs = bp.run_simulation(bp.FixedPrice(1), market, budget=10, horizon=10, periods=1)
        points = bp.convergence_curve(logs)
        assert all(pt.policy_normalized == pytest.approx(1.0) for pt in points)

    def test_never_bids_is_flat_zero(self):
        market = bp.StochasticMarket(bp.point_mass(1), rng=np.random.default_rng(0))
        logs = bp.run_simulation(bp.FixedPrice(0), market, budget=10, horizon=10, periods=1)
        points = bp.convergence_curve(logs)
        assert all(pt.policy_normalized == 0.0 for pt in points)

    def test_point_mass_steps_down_to_budget_share(self):
        p, k, horizon = 2, 3, 12
        market = bp.StochasticMarket(bp.point_mass(p), rng=np.random.default_rng(0))
        logs = bp.run_simulation(
            bp.FixedPrice(p), market, budget=k * p, horizon=horizon, periods=1
        )
        points = bp.convergence_curve(logs)
        assert points[k - 1].policy_normalized == pytest.approx(1.0)
        assert points[-1].policy_normalized == pytest.approx(k / horizon)

    def test_offline_prefix_prorated_budget(self):
        outcomes = [bp.AuctionOutcome(p) for p in (1, 1, 1, 1)]
        log = bp.PeriodLog(0, 4, 4)
        log.outcomes = outcomes
        log.records = [
            bp.AuctionRecord(4 - i, 0, bp.AuctionFeedback(0, False, False, 0, 4))
            for i in range(4)
        ]
        points = bp.convergence_curve([log])
        # prorated budgets 1, 2, 3, 4 admit exactly that many unit prices
        assert [pt.offline_clicks for pt in points] == [1, 2, 3, 4]


class TestPolicyVersusOffline:
    def test_no_policy_beats_offline_on_replay(self):
        rng = np.random.default_rng(3)
        prices = rng.integers(1, 12, size=400)
        clicks = rng.random(400) < 0.8
        seq = bp.ReplaySequence(
            tuple(bp.AuctionOutcome(int(p), bool(c)) for p, c in zip(prices, clicks))
        )
        budget, horizon = 15, 50
        for make in (
            lambda: bp.GreedyProductLimit(budget, horizon),
            lambda: bp.LuekerLearn(budget, horizon),
            lambda: bp.FixedPrice(6),
        ):
            logs = bp.run_simulation(make(), bp.ReplayMarket(seq), budget, horizon, periods=8)
            for log in logs:
                assert log.clicks <= bp.offline_optimal(log.outcomes, budget)


class TestStochasticSanity:
    def test_frozen_planner_tracks_value(self):
        pmf = bp.make_family("geometric", ratio=0.8, support_max=8)
        budget, horizon, periods = 12, 25, 250
        value = bp.solve(pmf, budget, horizon).value(budget, horizon)
        market = bp.StochasticMarket(pmf, rng=np.random.default_rng(44))
        policy = bp.GreedyProductLimit(budget, horizon, frozen_pmf=pmf)
        logs = bp.run_simulation(policy, market, budget, horizon, periods=periods)
        clicks = np.array([log.clicks for log in logs], dtype=float)
        stderr = clicks.std(ddof=1) / np.sqrt(periods)
        assert abs(clicks.mean() - value) <= 3.0 * stderr


class TestLuekerGap:
    def test_threshold_policy_bounded_away_from_planner(self):
        pmf = bp.make_family("bimodal_gap", low=1, high=8, low_mass=0.6)
        budget, horizon, periods = 10, 20, 200
        value = bp.solve(pmf, budget, horizon).value(budget, horizon)

        planner = bp.GreedyProductLimit(budget, horizon, frozen_pmf=pmf)
        market = bp.StochasticMarket(pmf, rng=np.random.default_rng([0, 1]))
        planner_clicks = np.mean(
            [log.clicks for log in bp.run_simulation(planner, market, budget, horizon, periods)]
        )

        threshold = bp.LuekerLearn(budget, horizon, frozen_pmf=pmf)
        market = bp.StochasticMarket(pmf, rng=np.random.default_rng([0, 1]))
        threshold_clicks = np.mean(
            [log.clicks for log in bp.run_simulation(threshold, market, budget, horizon, periods)]
        )

        assert planner_clicks >= 0.99 * value
        assert threshold_clicks < 0.95 * value


class TestPairedTTest:
    def test_direction_and_significance(self):
        rng = np.random.default_rng(0)
        base = rng.normal(0.8, 0.05, size=30)
        stat, p = bp.paired_ttest(base + 0.1, base)
        assert stat > 0
        assert p < 1e-6
