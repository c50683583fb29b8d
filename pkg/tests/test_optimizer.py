import json
import math

import numpy as np
import pytest

import oracles
from statpriv.errors import ConfigError, DomainError, InfeasibleError, UnsupportedError
from statpriv.model import (
    Binomial,
    Exponential,
    Geometric,
    Poisson,
    Secret,
    secret_value,
    wasserstein1,
)
from statpriv.optimizer import (
    BinRow,
    BinTable,
    GridProblem,
    bin_distortion,
    bin_privacy,
    binary_search_mechanism,
    dp_optimize,
    fits_budget,
    greedy_optimize,
)

MEAN = Secret.parse("mean")
STD = Secret.parse("std")


def poisson_problem(epsilon=0.25, grid_count=100, prior=None):
    return GridProblem(
        family="poisson", secret=MEAN, epsilon=epsilon,
        theta_lo=2.0, theta_hi=3.0, grid_count=grid_count, prior_density=prior,
    )


def geometric_problem(epsilon=0.05, grid_count=40):
    return GridProblem(
        family="geometric", secret=MEAN, epsilon=epsilon,
        theta_lo=0.2, theta_hi=0.6, grid_count=grid_count,
    )


def pair_dist(problem):
    """Distance between grid indices straight from the model closed form,
    bypassing the module's cached prefix trick."""
    return lambda a, b: wasserstein1(problem.params_at(a), problem.params_at(b))


class TestGridProblem:
    def test_grid_hits_endpoints_exactly(self):
        p = geometric_problem(grid_count=7)
        assert p.grid[0] == 0.2
        assert p.grid[-1] == 0.6
        assert len(p.grid) == 8

    def test_cell_mass_uniform(self):
        p = poisson_problem(grid_count=25)
        assert p.cell_mass == pytest.approx([1 / 25] * 25, abs=1e-15)
        assert p.mass_prefix[-1] == pytest.approx(1.0, abs=1e-12)

    def test_cell_mass_quadrature_linear_density_is_exact(self):
        # midpoint quadrature integrates a linear density without error
        p = poisson_problem(grid_count=10, prior=lambda t: t)
        total = (3.0**2 - 2.0**2) / 2
        grid = p.grid
        exact = (grid[1:] ** 2 - grid[:-1] ** 2) / 2 / total
        assert p.cell_mass == pytest.approx(exact, rel=1e-12)

    def test_index_of_round_trip(self):
        p = poisson_problem(grid_count=50)
        for k in (0, 1, 17, 50):
            assert p.index_of(float(p.grid[k])) == k

    def test_index_of_rejects_off_grid(self):
        p = poisson_problem(grid_count=50)
        with pytest.raises(ConfigError):
            p.index_of(2.013)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"family": "gaussian"},
            {"epsilon": 0.0},
            {"epsilon": -1.0},
            {"theta_lo": 3.0, "theta_hi": 2.0},
            {"grid_count": 1},
            {"grid_count": 20_001},
            {"grid_count": 12.5},
            {"prior_density": 3.0},
            {"n_trials": 7},
        ],
    )
    def test_rejects_bad_configuration(self, kwargs):
        base = dict(
            family="poisson", secret=MEAN, epsilon=0.25,
            theta_lo=2.0, theta_hi=3.0, grid_count=10,
        )
        base.update(kwargs)
        with pytest.raises(ConfigError):
            GridProblem(**base)

    def test_binomial_needs_n_trials(self):
        with pytest.raises(ConfigError):
            GridProblem(
                family="binomial", secret=MEAN, epsilon=0.1,
                theta_lo=0.2, theta_hi=0.4, grid_count=10,
            )
        p = GridProblem(
            family="binomial", secret=MEAN, epsilon=0.1,
            theta_lo=0.2, theta_hi=0.4, grid_count=10, n_trials=12,
        )
        assert p.params_at(0) == Binomial(n_trials=12, theta=0.2)

    def test_negative_density_rejected(self):
        p = poisson_problem(grid_count=10, prior=lambda t: t - 2.5)
        with pytest.raises(ConfigError):
            p.cell_mass

    def test_zero_mass_density_rejected(self):
        p = poisson_problem(grid_count=10, prior=lambda t: 0.0)
        with pytest.raises(ConfigError):
            p.cell_mass


class TestBinDistortion:
    def test_degenerate_bin_is_free(self):
        p = poisson_problem(grid_count=10)
        out = bin_distortion(p, 2.3, 2.3)
        assert out.dist == 0.0
        assert out.theta == 2.3

    def test_exponential_interval_releases_midpoint(self):
        p = GridProblem(
            family="exponential", secret=MEAN, epsilon=0.05,
            theta_lo=0.5, theta_hi=2.0, grid_count=150,
        )
        out = bin_distortion(p, 1.0, 1.2)
        assert out.dist == pytest.approx(0.1, abs=1e-12)
        assert out.theta == pytest.approx(1.1, abs=1e-12)

    def test_geometric_matches_brute_scan(self):
        p = geometric_problem(grid_count=40)
        i, j = p.index_of(0.3), p.index_of(0.5)
        want_d, want_k = oracles.brute_bin_distortion(pair_dist(p), i, j)
        out = bin_distortion(p, 0.3, 0.5)
        assert out.dist == pytest.approx(want_d, rel=1e-12)
        assert out.theta == pytest.approx(p.grid[want_k], abs=1e-12)

    @pytest.mark.parametrize(
        "problem",
        [
            poisson_problem(grid_count=30),
            geometric_problem(grid_count=30),
            GridProblem(
                family="exponential", secret=MEAN, epsilon=0.05,
                theta_lo=0.5, theta_hi=2.0, grid_count=30,
            ),
            GridProblem(
                family="binomial", secret=MEAN, epsilon=0.1,
                theta_lo=0.2, theta_hi=0.8, grid_count=30, n_trials=15,
            ),
        ],
        ids=["poisson", "geometric", "exponential", "binomial"],
    )
    def test_random_bins_match_full_grid_scan(self, problem):
        rng = np.random.default_rng(7)
        dist_fn = pair_dist(problem)
        for _ in range(12):
            i, j = sorted(rng.integers(0, problem.grid_count + 1, size=2))
            want_d, want_k = oracles.brute_bin_distortion(dist_fn, i, j)
            out = bin_distortion(problem, float(problem.grid[i]), float(problem.grid[j]))
            assert out.dist == pytest.approx(want_d, rel=1e-9, abs=1e-12)
            assert out.theta == pytest.approx(problem.grid[want_k], abs=1e-12)

    def test_tie_resolves_to_lower_grid_point(self):
        # 3-cell Poisson bin: both interior points give the same worst case
        p = poisson_problem(grid_count=10)
        out = bin_distortion(p, 2.0, 2.3)
        assert out.theta == pytest.approx(2.1, abs=1e-12)
        assert out.dist == pytest.approx(0.2, abs=1e-12)

    def test_off_grid_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            bin_distortion(p, 2.05, 2.3)

    def test_reversed_endpoints_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            bin_distortion(p, 2.3, 2.0)


class TestBinPrivacy:
    def test_whole_bin_within_window_gives_one(self):
        p = poisson_problem(epsilon=0.6, grid_count=50)
        assert bin_privacy(p, 2.0, 3.0) == 1.0

    def test_poisson_half_window(self):
        p = poisson_problem(epsilon=0.25, grid_count=100)
        assert bin_privacy(p, 2.0, 3.0) == pytest.approx(0.5, abs=1e-12)

    def test_geometric_matches_window_scan(self):
        p = geometric_problem(epsilon=0.15, grid_count=40)
        secrets = np.array(
            [secret_value(p.params_at(k), MEAN) for k in range(41)]
        )
        for lo, hi in [(0.3, 0.5), (0.2, 0.35), (0.25, 0.6)]:
            i, j = p.index_of(lo), p.index_of(hi)
            want = oracles.sliding_window_mass(
                p.cell_mass, secrets, i, j, p.epsilon
            )
            assert bin_privacy(p, lo, hi) == pytest.approx(want, rel=1e-12)

    def test_quadrature_prior_matches_window_scan(self):
        p = poisson_problem(epsilon=0.1, grid_count=40, prior=lambda t: (t - 1.9) ** 2)
        secrets = p.grid
        for lo, hi in [(2.0, 3.0), (2.25, 2.75)]:
            i, j = p.index_of(lo), p.index_of(hi)
            want = oracles.sliding_window_mass(
                p.cell_mass, secrets, i, j, p.epsilon
            )
            assert bin_privacy(p, lo, hi) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("epsilon", [0.05, 0.2, 0.5])
    def test_single_peak_secret_matches_window_scan(self, epsilon):
        # binomial std peaks at theta = 0.5, so these bins straddle an extremum
        p = GridProblem(
            family="binomial", secret=STD, epsilon=epsilon,
            theta_lo=0.2, theta_hi=0.8, grid_count=60, n_trials=10,
        )
        secrets = np.array(
            [secret_value(p.params_at(k), STD) for k in range(61)]
        )
        for lo, hi in [(0.3, 0.7), (0.45, 0.55), (0.2, 0.8), (0.2, 0.5)]:
            i, j = p.index_of(lo), p.index_of(hi)
            want = oracles.sliding_window_mass(
                p.cell_mass, secrets, i, j, p.epsilon
            )
            assert bin_privacy(p, lo, hi) == pytest.approx(want, rel=1e-12)

    def test_wiggly_secret_rejected(self):
        p = poisson_problem(grid_count=10)
        p._cache["secrets"] = np.array([0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0.0])
        with pytest.raises(UnsupportedError):
            bin_privacy(p, 2.0, 3.0)

    def test_zero_width_bin_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            bin_privacy(p, 2.3, 2.3)


def distinct_budgets(problem):
    """Midpoints between the distinct feasible bin distortions, plus a value
    above the largest: a budget grid that exercises every DP regime."""
    dists = set()
    for i in range(problem.grid_count + 1):
        for j in range(i + 1, problem.grid_count + 1):
            dists.add(round(bin_distortion(problem, problem.grid[i], problem.grid[j]).dist, 12))
    levels = sorted(dists)
    mids = [0.5 * (a + b) for a, b in zip(levels, levels[1:])]
    return levels, mids + [levels[-1] * 1.1]


class TestDpOptimize:
    def test_generous_budget_gives_single_bin(self):
        p = poisson_problem(grid_count=40)
        whole = bin_distortion(p, 2.0, 3.0)
        table = dp_optimize(p, whole.dist * 1.01)
        assert len(table.rows) == 1
        assert table.rows[0] == BinRow(2.0, 3.0, whole.theta)
        assert table.privacy == pytest.approx(bin_privacy(p, 2.0, 3.0), abs=1e-12)

    @pytest.mark.parametrize(
        "problem",
        [
            geometric_problem(epsilon=0.3, grid_count=8),
            poisson_problem(epsilon=0.12, grid_count=8),
            poisson_problem(epsilon=0.2, grid_count=8, prior=lambda t: 4.0 - t),
        ],
        ids=["geometric", "poisson-uniform", "poisson-skewed"],
    )
    def test_nine_point_grid_equals_exhaustive_enumeration(self, problem):
        secrets = np.array(
            [secret_value(problem.params_at(k), MEAN) for k in range(9)]
        )
        dist_fn = pair_dist(problem)

        def oracle_dist(a, b):
            return oracles.brute_bin_distortion(dist_fn, a, b)[0]

        _, budgets = distinct_budgets(problem)
        for budget in budgets:
            want, _ = oracles.exhaustive_best_partition(
                problem.cell_mass, secrets, oracle_dist, problem.epsilon, budget
            )
            if want is None:
                with pytest.raises(InfeasibleError):
                    dp_optimize(problem, budget)
                continue
            table = dp_optimize(problem, budget)
            assert table.privacy == pytest.approx(want, abs=1e-12), f"budget {budget}"

    def test_budget_below_finest_partition_is_infeasible(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(InfeasibleError):
            dp_optimize(p, 0.04)
        with pytest.raises(InfeasibleError):
            dp_optimize(p, 0.0)

    def test_negative_budget_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            dp_optimize(p, -0.1)

    def test_privacy_nonincreasing_in_budget(self):
        p = geometric_problem(epsilon=0.2, grid_count=30)
        cell_worst = max(
            bin_distortion(p, p.grid[k], p.grid[k + 1]).dist for k in range(30)
        )
        whole = bin_distortion(p, 0.2, 0.6).dist
        budgets = np.linspace(cell_worst, whole * 1.05, 20)
        last = math.inf
        for budget in budgets:
            priv = dp_optimize(p, float(budget)).privacy
            assert priv <= last + 1e-12
            last = priv

    def test_rows_tile_range_and_respect_budget(self):
        rng = np.random.default_rng(11)
        problems = [
            poisson_problem(epsilon=0.25, grid_count=36),
            geometric_problem(epsilon=0.1, grid_count=36),
            GridProblem(
                family="binomial", secret=MEAN, epsilon=0.3,
                theta_lo=0.2, theta_hi=0.8, grid_count=36, n_trials=8,
            ),
        ]
        for p in problems:
            cell_worst = max(
                bin_distortion(p, p.grid[k], p.grid[k + 1]).dist
                for k in range(p.grid_count)
            )
            whole = bin_distortion(p, p.theta_lo, p.theta_hi).dist
            for _ in range(4):
                budget = float(rng.uniform(cell_worst, whole))
                table = dp_optimize(p, budget)
                assert table.rows[0].lo == p.theta_lo
                assert table.rows[-1].hi == p.theta_hi
                for row in table.rows:
                    again = bin_distortion(p, row.lo, row.hi)
                    assert fits_budget(again.dist, budget)
                    assert again.theta == pytest.approx(row.released, abs=1e-12)
                assert table.distortion <= budget * (1 + 1e-12) + 1e-12

    def test_weighted_privacy_matches_row_recomputation(self):
        p = poisson_problem(epsilon=0.15, grid_count=50, prior=lambda t: t * t)
        table = dp_optimize(p, 0.2)
        prefix = p.mass_prefix
        acc = 0.0
        for row in table.rows:
            i, j = p.index_of(row.lo), p.index_of(row.hi)
            acc += (prefix[j] - prefix[i]) * bin_privacy(p, row.lo, row.hi)
        assert table.privacy == pytest.approx(acc, rel=1e-12)

    def test_deterministic_across_runs(self):
        a = dp_optimize(poisson_problem(grid_count=60), 0.22)
        b = dp_optimize(poisson_problem(grid_count=60), 0.22)
        assert a == b


class TestGreedyOptimize:
    def test_single_bin_budget_matches_dp(self):
        p = poisson_problem(grid_count=40)
        budget = bin_distortion(p, 2.0, 3.0).dist * 1.01
        assert greedy_optimize(p, budget) == dp_optimize(p, budget)

    def test_never_beats_dp(self):
        rng = np.random.default_rng(23)
        families = ["poisson", "geometric", "exponential", "binomial"]
        checked = 0
        while checked < 50:
            family = families[checked % 4]
            if family == "poisson":
                lo = float(rng.uniform(0.5, 4.0))
                hi = lo + float(rng.uniform(0.5, 2.0))
                extra = {}
            elif family == "geometric":
                lo = float(rng.uniform(0.2, 0.5))
                hi = lo + float(rng.uniform(0.1, 0.4))
                extra = {}
            elif family == "exponential":
                lo = float(rng.uniform(0.5, 2.0))
                hi = lo + float(rng.uniform(0.3, 1.5))
                extra = {}
            else:
                lo = float(rng.uniform(0.1, 0.5))
                hi = lo + float(rng.uniform(0.1, 0.4))
                extra = {"n_trials": int(rng.integers(5, 20))}
            prior = None if checked % 3 else (lambda t: t + 0.5)
            p = GridProblem(
                family=family, secret=MEAN,
                epsilon=float(rng.uniform(0.02, 0.4)),
                theta_lo=lo, theta_hi=hi,
                grid_count=int(rng.integers(12, 40)),
                prior_density=prior, **extra,
            )
            cell_worst = max(
                bin_distortion(p, p.grid[k], p.grid[k + 1]).dist
                for k in range(p.grid_count)
            )
            whole = bin_distortion(p, p.theta_lo, p.theta_hi).dist
            budget = float(rng.uniform(cell_worst, max(whole, cell_worst * 1.5)))
            greedy = greedy_optimize(p, budget)
            dp = dp_optimize(p, budget)
            assert greedy.privacy >= dp.privacy - 1e-12
            checked += 1

    def test_infeasible_budget_raises(self):
        p = GridProblem(
            family="geometric", secret=MEAN, epsilon=0.05,
            theta_lo=0.1, theta_hi=0.9, grid_count=80,
        )
        with pytest.raises(InfeasibleError):
            greedy_optimize(p, 0.5)

    def test_geometric_curve_point_golden(self):
        # frozen from the first run of this implementation
        p = GridProblem(
            family="geometric", secret=MEAN, epsilon=0.05,
            theta_lo=0.1, theta_hi=0.9, grid_count=80,
        )
        greedy = greedy_optimize(p, 1.0)
        dp = dp_optimize(p, 1.0)
        assert greedy.privacy == pytest.approx(0.14999999999999974, rel=1e-12)
        assert len(greedy.rows) == 8
        assert dp.privacy == pytest.approx(0.09999999999999985, rel=1e-12)


class TestBinarySearch:
    def test_finds_smallest_feasible_budget(self):
        p = poisson_problem(epsilon=0.25, grid_count=50)
        target = 0.6
        eta = 1e-3
        found = binary_search_mechanism(p, target, 0.0, 1.5, eta)
        assert found.privacy <= target + 1e-12
        # direct scan over a fine budget grid, same feasibility comparator
        scan = None
        for budget in np.arange(0.01, 1.5, 0.01):
            try:
                table = dp_optimize(p, float(budget))
            except InfeasibleError:
                continue
            if table.privacy <= target + 1e-12:
                scan = float(budget)
                break
        assert scan is not None
        assert found.privacy == dp_optimize(p, scan).privacy
        assert found.distortion <= scan + eta + 1e-9

    def test_trivial_target_returns_finest_feasible_table(self):
        p = poisson_problem(epsilon=0.25, grid_count=50)
        found = binary_search_mechanism(p, 1.0, 0.0, 1.0, 1e-5)
        # cell span is 0.02; no partition does better than that worst bin
        assert found.distortion == pytest.approx(0.02, abs=1e-4)
        assert found.privacy <= 1.0

    def test_unreachable_target_raises(self):
        p = poisson_problem(epsilon=0.25, grid_count=50)
        with pytest.raises(InfeasibleError):
            binary_search_mechanism(p, 0.001, 0.0, 0.3, 1e-3)

    def test_bad_precision_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            binary_search_mechanism(p, 0.5, 0.0, 1.0, 0.0)

    def test_bad_range_rejected(self):
        p = poisson_problem(grid_count=10)
        with pytest.raises(ConfigError):
            binary_search_mechanism(p, 0.5, 1.0, 0.5, 1e-3)
        with pytest.raises(ConfigError):
            binary_search_mechanism(p, 0.5, -1.0, 0.5, 1e-3)


class TestBinTable:
    def test_json_round_trip(self):
        p = poisson_problem(grid_count=40)
        table = dp_optimize(p, 0.3)
        doc = json.loads(json.dumps(table.to_json_dict()))
        assert BinTable.from_json_dict(doc) == table

    def test_rows_must_tile(self):
        with pytest.raises(ConfigError):
            BinTable(
                rows=(BinRow(0.0, 1.0, 0.5), BinRow(1.5, 2.0, 1.75)),
                privacy=0.5, distortion=0.5,
            )

    def test_empty_table_rejected(self):
        with pytest.raises(ConfigError):
            BinTable(rows=(), privacy=0.5, distortion=0.5)

    def test_metric_ranges_validated(self):
        row = (BinRow(0.0, 1.0, 0.5),)
        with pytest.raises(ConfigError):
            BinTable(rows=row, privacy=1.5, distortion=0.5)
        with pytest.raises(ConfigError):
            BinTable(rows=row, privacy=0.5, distortion=-0.1)

    def test_to_mechanism_releases_bin_values(self):
        p = poisson_problem(grid_count=50)
        table = dp_optimize(p, 0.3)
        mech = table.to_mechanism(p)
        for row in table.rows:
            inside = 0.5 * (row.lo + row.hi)
            released = mech.release(Poisson(theta=inside))
            assert released == Poisson(theta=row.released)
            # released values are fixed points of the mechanism
            assert mech.release(released) == released
        with pytest.raises(DomainError):
            mech.release(Poisson(theta=1.5))

    def test_to_mechanism_exponential_family(self):
        p = GridProblem(
            family="exponential", secret=MEAN, epsilon=0.05,
            theta_lo=0.5, theta_hi=2.0, grid_count=30,
        )
        table = dp_optimize(p, 0.3)
        mech = table.to_mechanism(p)
        out = mech.release(Exponential(lam=1.23))
        row = next(r for r in table.rows if r.lo <= 1.23 < r.hi)
        assert out == Exponential(lam=row.released)

    def test_to_mechanism_json_round_trip(self):
        from statpriv.mechanisms import QuantizationMechanism

        p = geometric_problem(grid_count=20)
        mech = dp_optimize(p, 0.5).to_mechanism(p)
        doc = json.loads(json.dumps(mech.to_json_dict()))
        again = QuantizationMechanism.from_json_dict(doc)
        assert again.release(Geometric(theta=0.37)) == mech.release(
            Geometric(theta=0.37)
        )
