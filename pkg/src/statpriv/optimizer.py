"""Mechanism synthesis for single-scalar-parameter families.

Works on an integer grid over [theta_lo, theta_hi]. dp_optimize finds the
contiguous partition minimizing prior-weighted privacy subject to a
per-bin distortion budget (Bellman recursion over right endpoints);
greedy_optimize is the left-to-right baseline; binary_search_mechanism
looks for the smallest budget whose optimal privacy meets a target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from statpriv.errors import ConfigError, InfeasibleError, UnsupportedError
from statpriv.mechanisms import QuantizationMechanism, TableBin
from statpriv.model import (
    Binomial,
    Exponential,
    Secret,
    UniformBox,
    family_class,
    secret_value,
    wasserstein1,
)

MAX_GRID = 20_000

_SCALAR_FAMILIES = ("exponential", "geometric", "binomial", "poisson")


def _make_params(family, value, n_trials):
    cls = family_class(family)
    if cls is Binomial:
        return Binomial(n_trials=n_trials, theta=value)
    if cls is Exponential:
        return Exponential(lam=value)
    return cls(theta=value)


@dataclass(frozen=True)
class GridProblem:
    """A synthesis problem: family, secret, tolerance, range, and grid.

    grid_count is the number of cells; grid points are
    theta_lo + k * (theta_hi - theta_lo) / grid_count for k = 0..grid_count.
    prior_density is a callable density over [theta_lo, theta_hi] (None
    means uniform); cell masses come from midpoint quadrature and are
    normalized to sum to one.
    """

    family: str
    secret: Secret
    epsilon: float
    theta_lo: float
    theta_hi: float
    grid_count: int
    prior_density: object = None
    n_trials: int = None
    _cache: dict = field(
        default_factory=dict, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        cls = family_class(self.family)
        object.__setattr__(self, "family", cls.family)
        if self.family not in _SCALAR_FAMILIES:
            raise ConfigError(
                "grid synthesis covers the single-scalar-parameter families "
                f"{list(_SCALAR_FAMILIES)}, not {self.family}"
            )
        if self.family == "binomial":
            if not isinstance(self.n_trials, (int, np.integer)) or self.n_trials < 1:
                raise ConfigError("binomial problems need a positive n_trials")
        elif self.n_trials is not None:
            raise ConfigError(f"n_trials does not apply to {self.family}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not self.theta_lo < self.theta_hi:
            raise ConfigError(
                f"need theta_lo < theta_hi, got [{self.theta_lo}, {self.theta_hi}]"
            )
        if not isinstance(self.grid_count, (int, np.integer)) or self.grid_count < 2:
            raise ConfigError("grid_count must be an integer >= 2")
        if self.grid_count > MAX_GRID:
            raise ConfigError(
                f"grid_count {self.grid_count} exceeds the {MAX_GRID} guard "
                "(the synthesis loops are quadratic in the grid)"
            )
        if self.prior_density is not None and not callable(self.prior_density):
            raise ConfigError("prior_density must be callable (or None for uniform)")
        # constructing the endpoints validates the range for the family
        _make_params(self.family, self.theta_lo, self.n_trials)
        _make_params(self.family, self.theta_hi, self.n_trials)

    @property
    def grid(self):
        """Grid point values, exact at both endpoints."""
        cached = self._cache.get("grid")
        if cached is None:
            cached = np.linspace(self.theta_lo, self.theta_hi, self.grid_count + 1)
            self._cache["grid"] = cached
        return cached

    def params_at(self, k):
        cached = self._cache.get("params")
        if cached is None:
            cached = [
                _make_params(self.family, float(v), self.n_trials) for v in self.grid
            ]
            self._cache["params"] = cached
        return cached[k]

    @property
    def _w1_from_left(self):
        """W1 distance of every grid point from the left endpoint.

        The families here are stochastically ordered in their parameter, so
        W1 is additive along the grid and pairwise distances reduce to
        differences of this array.
        """
        cached = self._cache.get("w1")
        if cached is None:
            base = self.params_at(0)
            cached = np.array(
                [wasserstein1(base, self.params_at(k)) for k in range(len(self.grid))]
            )
            self._cache["w1"] = cached
        return cached

    @property
    def secrets(self):
        cached = self._cache.get("secrets")
        if cached is None:
            cached = np.array(
                [
                    secret_value(self.params_at(k), self.secret)
                    for k in range(len(self.grid))
                ]
            )
            self._cache["secrets"] = cached
        return cached

    @property
    def cell_mass(self):
        cached = self._cache.get("mass")
        if cached is None:
            grid = self.grid
            if self.prior_density is None:
                cached = np.full(self.grid_count, 1.0 / self.grid_count)
            else:
                mids = 0.5 * (grid[:-1] + grid[1:])
                dens = np.array([float(self.prior_density(m)) for m in mids])
                if np.any(dens < 0) or not np.all(np.isfinite(dens)):
                    raise ConfigError("prior density must be finite and nonnegative")
                raw = dens * np.diff(grid)
                total = raw.sum()
                if total <= 0:
                    raise ConfigError("prior density integrates to zero on the range")
                cached = raw / total
            self._cache["mass"] = cached
        return cached

    @property
    def mass_prefix(self):
        cached = self._cache.get("prefix")
        if cached is None:
            cached = np.concatenate([[0.0], np.cumsum(self.cell_mass)])
            self._cache["prefix"] = cached
        return cached

    def index_of(self, value):
        """Map a grid value back to its index; off-grid values are refused."""
        step = (self.theta_hi - self.theta_lo) / self.grid_count
        k = int(round((value - self.theta_lo) / step))
        if k < 0 or k > self.grid_count or abs(self.grid[k] - value) > 1e-9 * max(
            1.0, abs(value)
        ):
            raise ConfigError(f"{value} is not a point of the {self.grid_count}-cell grid")
        return k


class BinDistortion(NamedTuple):
    dist: float
    theta: float


class BinRow(NamedTuple):
    lo: float
    hi: float
    released: float


def _bin_release_index(problem, i, j):
    """Grid index minimizing the worst W1 to the bin [grid[i], grid[j]].

    The worst case over the bin is attained at an endpoint, so this picks
    the on-grid point closest to the midpoint of the W1 coordinate; between
    two equally good candidates the lower index wins.
    """
    w1 = problem._w1_from_left
    if i == j:
        return i, 0.0
    target = 0.5 * (w1[i] + w1[j])
    c = int(np.searchsorted(w1, target, side="left"))
    best_k, best_d = None, math.inf
    for k in (c - 1, c, c + 1):
        if not i <= k <= j:
            continue
        d = max(w1[k] - w1[i], w1[j] - w1[k])
        if d < best_d - 1e-15:
            best_k, best_d = k, d
    return best_k, best_d


def bin_distortion(problem, theta1, theta2):
    """Least worst-case W1 any on-grid release achieves for one bin."""
    i = problem.index_of(theta1)
    j = problem.index_of(theta2)
    if i > j:
        raise ConfigError(f"need theta1 <= theta2, got {theta1} > {theta2}")
    k, dist = _bin_release_index(problem, i, j)
    return BinDistortion(dist=float(dist), theta=float(problem.grid[k]))


def _monotone_window_mass(g_slice, prefix_slice, width):
    """Best window mass when the secret slice is monotone.

    A window is a run of whole cells, indexed by its grid endpoints a <= b;
    its mass is prefix[b] - prefix[a] and its secret image spans
    |g[b] - g[a]|.
    """
    gs = g_slice if g_slice[-1] >= g_slice[0] else -g_slice
    b = np.searchsorted(gs, gs + width + 1e-12, side="right") - 1
    return float(np.max(prefix_slice[b] - prefix_slice))


def _window_max_mass(problem, i, j):
    """Largest whole-cell window mass in bin [i, j] with secret span <= 2 eps.

    Needs the secret monotone over the bin. A single interior extremum
    still works: windows on either side of it are monotone cases, and a
    window straddling it is feasible exactly when both of its endpoints
    are within the span budget of the extreme value, so those decouple.
    Anything wilder is refused.
    """
    g = problem.secrets
    prefix = problem.mass_prefix
    width = 2.0 * problem.epsilon
    gs = g[i : j + 1]
    ps = prefix[i : j + 1]
    diffs = np.diff(gs)
    signs = [1 if d > 0 else -1 for d in diffs if d != 0]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if changes == 0:
        return _monotone_window_mass(gs, ps, width)
    if changes > 1:
        raise UnsupportedError(
            "secret is neither monotone nor single-peaked over the bin; "
            "privacy windows are not defined for it"
        )
    m = int(np.argmax(gs)) if signs[0] > 0 else int(np.argmin(gs))
    best = max(
        _monotone_window_mass(gs[: m + 1], ps[: m + 1], width),
        _monotone_window_mass(gs[m:], ps[m:], width),
    )
    # straddling windows: span is g[m] minus the lower endpoint value (peak)
    # or the higher endpoint value minus g[m] (valley), per endpoint
    gap = np.abs(gs - gs[m])
    left_ok = np.nonzero(gap[: m + 1] <= width + 1e-12)[0]
    right_ok = np.nonzero(gap[m:] <= width + 1e-12)[0]
    if left_ok.size and right_ok.size:
        best = max(best, float(ps[m + right_ok[-1]] - ps[left_ok[0]]))
    return best


def bin_privacy(problem, theta1, theta2):
    """Best attacker success inside one bin under the conditional prior."""
    i = problem.index_of(theta1)
    j = problem.index_of(theta2)
    if i >= j:
        raise ConfigError(f"need theta1 < theta2, got {theta1} >= {theta2}")
    prefix = problem.mass_prefix
    total = prefix[j] - prefix[i]
    if total <= 0.0:
        return 0.0
    return float(min(1.0, _window_max_mass(problem, i, j) / total))


@dataclass(frozen=True)
class BinTable:
    """A synthesized mechanism: bins, released values, achieved metrics."""

    rows: tuple
    privacy: float
    distortion: float

    def __post_init__(self):
        rows = tuple(
            r if isinstance(r, BinRow) else BinRow(*r) for r in self.rows
        )
        if not rows:
            raise ConfigError("bin table needs at least one row")
        for left, right in zip(rows, rows[1:]):
            if not math.isclose(left.hi, right.lo, rel_tol=0, abs_tol=1e-9):
                raise ConfigError("bin table rows must tile the range contiguously")
        object.__setattr__(self, "rows", rows)
        if not 0.0 <= self.privacy <= 1.0 + 1e-12:
            raise ConfigError(f"privacy {self.privacy} outside [0, 1]")
        if self.distortion < 0.0:
            raise ConfigError(f"distortion {self.distortion} negative")

    def to_json_dict(self):
        return {
            "rows": [
                {"lo": r.lo, "hi": r.hi, "released": r.released} for r in self.rows
            ],
            "privacy": self.privacy,
            "distortion": self.distortion,
        }

    @classmethod
    def from_json_dict(cls, doc):
        return cls(
            rows=tuple(
                BinRow(float(r["lo"]), float(r["hi"]), float(r["released"]))
                for r in doc["rows"]
            ),
            privacy=float(doc["privacy"]),
            distortion=float(doc["distortion"]),
        )

    def to_mechanism(self, problem):
        """Wrap the table as a releasable QuantizationMechanism."""
        coord = "lam" if problem.family == "exponential" else "theta"
        table = tuple(
            TableBin(
                lo=r.lo,
                hi=r.hi,
                released=_make_params(problem.family, r.released, problem.n_trials),
            )
            for r in self.rows
        )
        return QuantizationMechanism(
            family=problem.family,
            secret=problem.secret,
            prior=UniformBox({coord: (problem.theta_lo, problem.theta_hi)}),
            table=table,
            n_trials=problem.n_trials,
        )


def _check_budget(budget):
    if budget < 0:
        raise ConfigError(f"distortion budget must be >= 0, got {budget}")


def fits_budget(dist, budget):
    """Budget check with slack for float rounding in the W1 grid sums."""
    return dist <= budget + 1e-12 * max(1.0, budget)


def _assemble(problem, boundaries):
    """Build a BinTable from bin boundary indices [0, ..., grid_count]."""
    grid = problem.grid
    prefix = problem.mass_prefix
    rows = []
    worst_d = 0.0
    weighted_p = 0.0
    for i, j in zip(boundaries, boundaries[1:]):
        k, dist = _bin_release_index(problem, i, j)
        rows.append(BinRow(float(grid[i]), float(grid[j]), float(grid[k])))
        worst_d = max(worst_d, dist)
        mass = prefix[j] - prefix[i]
        if mass > 0:
            weighted_p += mass * bin_privacy(problem, grid[i], grid[j])
    total = prefix[-1]
    return BinTable(
        rows=tuple(rows),
        privacy=float(min(1.0, weighted_p / total)),
        distortion=float(worst_d),
    )


def dp_optimize(problem, distortion_budget):
    """Minimize prior-weighted privacy over budget-feasible partitions.

    Bellman recursion over right endpoints t*: the value at t* is the best
    over left endpoints theta of the mass-weighted mix of the value at
    theta and the new bin's privacy, scanning theta downward and stopping
    once the bin overruns the budget (bin distortion grows as the bin
    widens). Ties keep the largest theta. Raises InfeasibleError when no
    partition fits the budget ("no answer").
    """
    _check_budget(distortion_budget)
    n = problem.grid_count
    grid = problem.grid
    prefix = problem.mass_prefix

    best = np.full(n + 1, math.inf)
    choice = np.full(n + 1, -1, dtype=np.int64)
    best[0] = 0.0
    for k in range(1, n + 1):
        for j in range(k - 1, -1, -1):
            _, dist = _bin_release_index(problem, j, k)
            if not fits_budget(dist, distortion_budget):
                break
            if not math.isfinite(best[j]):
                continue
            w_j = prefix[j]
            w_k = prefix[k]
            if w_k <= 0.0:
                p = 0.0
            else:
                p_bin = bin_privacy(problem, grid[j], grid[k])
                p = (w_j / w_k) * best[j] + ((w_k - w_j) / w_k) * p_bin
            if p < best[k]:
                best[k] = p
                choice[k] = j
    if not math.isfinite(best[n]):
        raise InfeasibleError(
            f"no partition of [{problem.theta_lo}, {problem.theta_hi}] meets "
            f"the distortion budget {distortion_budget}"
        )
    boundaries = [n]
    while boundaries[-1] > 0:
        boundaries.append(int(choice[boundaries[-1]]))
    boundaries.reverse()
    return _assemble(problem, boundaries)


def greedy_optimize(problem, distortion_budget):
    """Left-to-right baseline: per bin, the feasible right endpoint with the
    least privacy, ties toward the larger endpoint."""
    _check_budget(distortion_budget)
    n = problem.grid_count
    grid = problem.grid
    boundaries = [0]
    left = 0
    while left < n:
        best_r = -1
        best_p = math.inf
        for r in range(left + 1, n + 1):
            _, dist = _bin_release_index(problem, left, r)
            if not fits_budget(dist, distortion_budget):
                break
            p = bin_privacy(problem, grid[left], grid[r])
            if p <= best_p:
                best_p = p
                best_r = r
        if best_r < 0:
            raise InfeasibleError(
                f"greedy scan stuck at theta={grid[left]}: no bin fits the "
                f"distortion budget {distortion_budget}"
            )
        boundaries.append(best_r)
        left = best_r
    return _assemble(problem, boundaries)


def binary_search_mechanism(problem, privacy_budget, budget_lo, budget_hi, eta):
    """Smallest distortion budget (within eta) whose DP privacy meets the
    target; returns that budget's table."""
    if not eta > 0:
        raise ConfigError(f"precision eta must be positive, got {eta}")
    if not 0 <= budget_lo <= budget_hi:
        raise ConfigError(
            f"need 0 <= budget_lo <= budget_hi, got [{budget_lo}, {budget_hi}]"
        )

    def attempt(budget):
        try:
            table = dp_optimize(problem, budget)
        except InfeasibleError:
            return None
        # slack absorbs 1-ulp noise in the mass-weighted privacy sum, which
        # otherwise shifts the found budget a whole grid notch at exact ties
        if table.privacy <= privacy_budget + 1e-12:
            return table
        return None

    best = attempt(budget_hi)
    if best is None:
        raise InfeasibleError(
            f"privacy {privacy_budget} is unreachable even at distortion "
            f"budget {budget_hi}"
        )
    lo, hi = budget_lo, budget_hi
    while hi - lo >= eta:
        mid = 0.5 * (lo + hi)
        table = attempt(mid)
        if table is None:
            lo = mid
        else:
            best = table
            hi = mid
    return best
