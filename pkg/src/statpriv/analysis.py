"""Privacy and distortion evaluation for release mechanisms.

Closed-form values and Monte-Carlo estimates of the attacker guessing
probability, worst-case release distance, the distance-to-range ratio
gamma with its two lower-bound calculators, dataset surrogate metrics,
and the Lipschitz-prior relaxations of the closed-form bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError, UnsupportedError
from .model import (
    Binomial,
    Categorical,
    Exponential,
    Gaussian,
    Geometric,
    LipschitzDescriptor,
    Poisson,
    Secret,
    ShiftedExponential,
    Uniform,
    UniformBox,
    UniformSimplex,
    aux_distance,
    family_class,
    secret_value,
    tv_distance,
    wasserstein1,
)
from .mechanisms import (
    QuantizationMechanism,
    params_to_dict,
    slope_gaussian_quantile,
    slope_shifted_exponential_quantile,
)
from .specialfn import std_normal_cdf, std_normal_pdf, std_normal_quantile

__all__ = [
    "AnalysisConfig",
    "AnalyticValue",
    "BoundReport",
    "McPrivacy",
    "analytic_distortion",
    "analytic_privacy",
    "distortion_lower_bound",
    "empirical_distortion",
    "gamma",
    "max_density_bound",
    "max_window_fraction",
    "mc_privacy",
    "privacy_lower_bound",
    "relaxed_bounds",
    "surrogate_distortion",
    "surrogate_privacy",
]

_CONTINUOUS = ("gaussian", "uniform", "exponential", "shifted_exponential")
_SCALAR_DISCRETE = ("geometric", "binomial", "poisson")

_SEED_MASK = (1 << 64) - 1
_SHARD_SIZE = 65536

# Relative slack used when a ratio that should be an exact integer lands one
# ulp high; without it a whole ceiling step flips on float noise.
_CEIL_TOL = 1e-12
# Budget-to-step ceilings treat ratios within float fuzz of an integer as
# exact; the guard is coarser than the geometric tolerance above so that a
# privacy budget like 1 - 1e-9 degenerates to the unconstrained bound 0.
_CEIL_GUARD = 1e-8


@dataclass(frozen=True)
class AnalysisConfig:
    """Shared knobs for the evaluation routines.

    epsilon is the attacker tolerance in secret units, mc_samples the
    Monte-Carlo draw count, rng_seed the base seed (each 65536-draw shard
    derives its own stream from (seed, shard) so results do not depend on
    how shards are scheduled), gamma_grid the coarse resolution used by
    numeric infima.
    """

    epsilon: float
    mc_samples: int = 100_000
    rng_seed: int = 0
    gamma_grid: int = 64

    def __post_init__(self):
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be a finite number, got {self.epsilon!r}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not isinstance(self.mc_samples, (int, np.integer)) or self.mc_samples < 1:
            raise ConfigError(f"mc_samples must be an integer >= 1, got {self.mc_samples!r}")
        if not isinstance(self.rng_seed, (int, np.integer)):
            raise ConfigError(f"rng_seed must be an integer, got {self.rng_seed!r}")
        if not isinstance(self.gamma_grid, (int, np.integer)) or self.gamma_grid < 16:
            raise ConfigError(f"gamma_grid must be an integer >= 16, got {self.gamma_grid!r}")


class AnalyticValue(NamedTuple):
    """A closed-form metric value with its strength tag.

    tag is "exact" when the value is attained under the mechanism's stated
    uniform prior and "upper_bound" when it only dominates.
    """

    value: float
    tag: str


class McPrivacy(NamedTuple):
    """Monte-Carlo guessing-probability estimate.

    estimate is the larger of the two attacker success rates (plug-in and
    per-release window sweep), stderr its binomial standard error; the two
    individual rates are kept for diagnostics.
    """

    estimate: float
    stderr: float
    plugin_rate: float
    window_rate: float


def _ceil_with_tol(x):
    return int(math.ceil(x - _CEIL_GUARD * max(1.0, abs(x))))


def _check_gamma_eps(gamma_value, epsilon):
    if not (isinstance(gamma_value, (int, float)) and math.isfinite(gamma_value)):
        raise ConfigError(f"gamma must be a finite number, got {gamma_value!r}")
    if gamma_value < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma_value}")
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon)) or epsilon <= 0:
        raise ConfigError(f"epsilon must be a finite number > 0, got {epsilon!r}")


def distortion_lower_bound(gamma_value, epsilon, privacy_budget):
    """Minimum worst-case distortion forced by a privacy target.

    Any mechanism whose guessing probability stays at or below the budget
    T in (0, 1) must distort by more than (ceil(1/T) - 1) * 2 * gamma *
    epsilon.
    """
    _check_gamma_eps(gamma_value, epsilon)
    if not (isinstance(privacy_budget, (int, float)) and 0.0 < privacy_budget < 1.0):
        raise DomainError(f"privacy budget must lie in (0, 1), got {privacy_budget!r}")
    steps = _ceil_with_tol(1.0 / privacy_budget)
    return (steps - 1) * 2.0 * gamma_value * epsilon


def privacy_lower_bound(gamma_value, epsilon, distortion_budget):
    """Minimum guessing probability forced by a distortion cap.

    Any mechanism whose worst-case distortion stays at or below T > 0
    leaves the attacker at least 1 / ceil(T / (2 * gamma * epsilon)).
    A zero gamma yields the vacuous bound 0.
    """
    _check_gamma_eps(gamma_value, epsilon)
    if not (isinstance(distortion_budget, (int, float)) and distortion_budget > 0.0):
        raise DomainError(f"distortion budget must be > 0, got {distortion_budget!r}")
    scale = 2.0 * gamma_value * epsilon
    if scale == 0.0:
        return 0.0
    steps = max(1, _ceil_with_tol(distortion_budget / scale))
    return 1.0 / steps


_DISTORTION_DESCRIPTOR = "(ceil(1/T) - 1) * 2 * gamma * epsilon"
_PRIVACY_DESCRIPTOR = "1 / ceil(T / (2 * gamma * epsilon))"


@dataclass(frozen=True)
class BoundReport:
    """The ratio gamma for one (family, secret) pair plus how it was obtained.

    method is "closed_form" or "numeric_inf". The two bound methods
    evaluate the tradeoff bounds at a chosen tolerance and budget.
    """

    gamma: float
    method: str

    def __post_init__(self):
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be finite, got {self.gamma!r}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.method not in ("closed_form", "numeric_inf"):
            raise ConfigError(f"unknown method tag {self.method!r}")

    def distortion_lower_bound(self, epsilon, privacy_budget):
        return distortion_lower_bound(self.gamma, epsilon, privacy_budget)

    def privacy_lower_bound(self, epsilon, distortion_budget):
        return privacy_lower_bound(self.gamma, epsilon, distortion_budget)

    def to_json_dict(self):
        return {
            "gamma": self.gamma,
            "method": self.method,
            "distortion_lower_bound": _DISTORTION_DESCRIPTOR,
            "privacy_lower_bound": _PRIVACY_DESCRIPTOR,
        }


def _gaussian_band_rate(t):
    """Half the transport distance per unit sigma step along a slope-t band.

    Moving a normal by (mu + t*d, sigma + d) costs W1 = 2*d*rate(t); the
    same function is the distance-to-range objective for sigma secrets.
    """
    return std_normal_pdf(t) + t * (std_normal_cdf(t) - 0.5)


def _check_secret(secret):
    if not isinstance(secret, Secret):
        raise ConfigError(f"secret must be a Secret, got {type(secret).__name__}")


def _check_config(config):
    if not isinstance(config, AnalysisConfig):
        raise ConfigError(f"config must be an AnalysisConfig, got {type(config).__name__}")


def _scalar_discrete_params(family, value, n_trials):
    if family == "geometric":
        return Geometric(theta=value)
    if family == "poisson":
        return Poisson(theta=value)
    return Binomial(n_trials=n_trials, theta=value)


def _pair_grid_inf(make_params, lo, hi, secret, coarse):
    """Two-level grid infimum of aux_distance / secret_range over pairs.

    Scans all ordered pairs on a coarse grid, then rescans a 4x-denser
    local grid around the coarse argmin. Pairs whose secret range is
    (numerically) zero do not define the ratio and are skipped.
    """

    def ratio(p1, p2, g1, g2):
        span = abs(g1 - g2)
        if span <= 1e-9 * max(1.0, abs(g1), abs(g2)):
            return None
        return aux_distance(p1, p2) / span

    def scan(values1, values2):
        best = math.inf
        best_pair = None
        params1 = [make_params(v) for v in values1]
        params2 = params1 if values2 is values1 else [make_params(v) for v in values2]
        secrets1 = [secret_value(p, secret) for p in params1]
        secrets2 = secrets1 if values2 is values1 else [secret_value(p, secret) for p in params2]
        for i, v1 in enumerate(values1):
            for j, v2 in enumerate(values2):
                if v2 <= v1 + 1e-15:
                    continue
                r = ratio(params1[i], params2[j], secrets1[i], secrets2[j])
                if r is not None and r < best:
                    best = r
                    best_pair = (i, j)
        return best, best_pair

    pts = np.linspace(lo, hi, coarse)
    best, pair = scan(pts, pts)
    if pair is None:
        raise DomainError("the secret is constant across the grid; the ratio is undefined")
    i, j = pair
    fine = 4 * coarse
    lo1, hi1 = pts[max(i - 1, 0)], pts[min(i + 1, coarse - 1)]
    lo2, hi2 = pts[max(j - 1, 0)], pts[min(j + 1, coarse - 1)]
    local1 = np.linspace(lo1, hi1, fine)
    local2 = np.linspace(lo2, hi2, fine)
    refined, refined_pair = scan(local1, local2)
    if refined_pair is not None and refined < best:
        best = refined
    return best


def _gaussian_quantile_gamma(alpha, coarse):
    """Numeric infimum of rate(t) / |t + Q_alpha| on a refined t grid."""
    q = std_normal_quantile(alpha)
    npts = coarse * coarse

    def scan(lo, hi):
        best = math.inf
        best_t = None
        for t in np.linspace(lo, hi, npts):
            denom = abs(t + q)
            if denom < 1e-9:
                continue
            r = _gaussian_band_rate(t) / denom
            if r < best:
                best = r
                best_t = t
        return best, best_t

    span = 8.0
    best, t_star = scan(-span, span)
    step = 2.0 * span / (npts - 1)
    refined, _ = scan(t_star - step, t_star + step)
    return min(best, refined)


def _sexp_quantile_gamma(alpha):
    # ratio form of the Lambert-W expression; the slope is 0 exactly at
    # alpha = 1 - 1/e, where this evaluates to 1/2 with no special casing
    t0 = slope_shifted_exponential_quantile(alpha)
    return (t0 + 2.0 * math.exp(-t0) - 1.0) / (2.0 * abs(math.log1p(-alpha) + t0))


def _uniform_quantile_gamma(alpha):
    return math.sqrt(alpha * alpha - alpha + 0.5) - abs(alpha - 0.5)


def gamma(family, secret, prior_box, grid, n_trials=None):
    """Infimum of aux distance over secret range for one (family, secret).

    Returns a BoundReport carrying the value and whether it came from a
    closed form or a grid infimum. Continuous families use closed forms
    except the Gaussian quantile, which minimizes over the band slope
    numerically; the single-parameter discrete families scan (theta1,
    theta2) pairs drawn from the prior box interval "theta" on a two-level
    grid (binomial additionally needs n_trials). grid sets the coarse
    resolution; the local rescan is 4x denser.
    """
    _check_secret(secret)
    family_class(family)
    if not isinstance(grid, (int, np.integer)) or grid < 16:
        raise ConfigError(f"grid must be an integer >= 16, got {grid!r}")
    kind = secret.kind

    if family in _CONTINUOUS and kind == "mean":
        # transport distance never falls below the mean shift, with equality
        # for pure location moves, so the ratio bottoms out at 1/2
        return BoundReport(gamma=0.5, method="closed_form")
    if family == "exponential" and kind == "quantile":
        return BoundReport(gamma=-1.0 / (2.0 * math.log1p(-secret.alpha)), method="closed_form")
    if family == "shifted_exponential" and kind == "quantile":
        return BoundReport(gamma=_sexp_quantile_gamma(secret.alpha), method="closed_form")
    if family == "uniform" and kind == "quantile":
        return BoundReport(gamma=_uniform_quantile_gamma(secret.alpha), method="closed_form")
    if family == "gaussian" and kind == "quantile":
        if secret.alpha == 0.5:
            raise ConfigError("the 0.5 quantile of a gaussian is its mean; use the mean secret")
        return BoundReport(gamma=_gaussian_quantile_gamma(secret.alpha, grid), method="numeric_inf")
    if kind == "std":
        closed = {
            # the band-rate objective is stationary exactly at slope 0
            "gaussian": 1.0 / math.sqrt(2.0 * math.pi),
            "uniform": math.sqrt(3.0) / 4.0,
            "exponential": 0.5,
            "shifted_exponential": 0.5 * math.log(2.0),
        }
        if family in closed:
            return BoundReport(gamma=closed[family], method="closed_form")
    if family == "categorical" and kind == "fraction":
        if isinstance(prior_box, UniformSimplex) and secret.j >= prior_box.c:
            raise ConfigError(
                f"fraction index {secret.j} outside the {prior_box.c}-category simplex"
            )
        # moving mass off coordinate j costs at least half the coordinate
        # change in total-variation terms, attained by a single-target move
        return BoundReport(gamma=0.5, method="closed_form")
    if family in _SCALAR_DISCRETE and kind in ("mean", "std", "fraction"):
        if not isinstance(prior_box, UniformBox):
            raise ConfigError(
                f"discrete gamma needs a UniformBox prior with a 'theta' interval, "
                f"got {type(prior_box).__name__}"
            )
        lo, hi = prior_box.interval("theta")
        if family == "binomial":
            if not isinstance(n_trials, (int, np.integer)) or n_trials < 1:
                raise ConfigError("binomial gamma needs n_trials >= 1")
            n_trials = int(n_trials)
        value = _pair_grid_inf(
            lambda v: _scalar_discrete_params(family, float(v), n_trials),
            lo,
            hi,
            secret,
            int(grid),
        )
        return BoundReport(gamma=value, method="numeric_inf")
    raise UnsupportedError(f"no ratio route for family {family!r} with secret {kind!r}")


def _require_closed_form(mechanism):
    if not isinstance(mechanism, QuantizationMechanism):
        raise UnsupportedError(
            f"closed forms need a QuantizationMechanism, got {type(mechanism).__name__}"
        )
    if mechanism.table is not None:
        raise UnsupportedError(
            "grid-synthesized tables have no closed form; evaluate them by Monte Carlo"
        )


def analytic_privacy(mechanism, config):
    """Closed-form guessing probability of a quantization mechanism.

    Evaluated under the mechanism's stated uniform prior and the config
    tolerance, clamped to [0, 1]. The tag is "exact" where the value is
    attained (location means, both exponential-scale secrets, and the
    Gaussian std, whose band slope 0 removes the boundary term) and
    "upper_bound" for the diagonal two-parameter mechanisms and the
    categorical fraction, whose printed forms dominate but include
    boundary leakage.
    """
    _check_config(config)
    _require_closed_form(mechanism)
    eps = config.epsilon
    s = mechanism.bin_size
    family = mechanism.family
    kind = mechanism.secret.kind
    prior = mechanism.prior

    if kind == "mean":
        value, tag = 2.0 * eps / s, "exact"
    elif family == "exponential":
        if kind == "quantile":
            value = 2.0 * eps / (-math.log1p(-mechanism.secret.alpha) * s)
        else:
            value = 2.0 * eps / s
        tag = "exact"
    elif family == "shifted_exponential":
        t0 = mechanism.t0
        if kind == "quantile":
            window = 2.0 * eps / (abs(math.log1p(-mechanism.secret.alpha) + t0) * s)
        else:
            window = 2.0 * eps / s
        value, tag = window + abs(t0) * s / prior.width("h"), "upper_bound"
    elif family == "gaussian":
        t0 = mechanism.t0
        if kind == "quantile":
            q = std_normal_quantile(mechanism.secret.alpha)
            value = 2.0 * eps / (abs(t0 + q) * s) + abs(t0) * s / prior.width("mu")
            tag = "upper_bound"
        else:
            value, tag = 2.0 * eps / s, "exact"
    elif family == "uniform":
        t0 = mechanism.t0
        span = prior.width("m")
        tail = 2.0 * s * t0 / ((t0 + 1.0) * span) + s * s / (2.0 * span * span)
        if kind == "quantile":
            alpha = mechanism.secret.alpha
            value = 2.0 * eps * (t0 + 1.0) / (abs((1.0 - alpha) * t0 - alpha) * s) + tail
        else:
            value = 4.0 * math.sqrt(3.0) * eps / s + tail
        tag = "upper_bound"
    elif family == "categorical":
        c = prior.c
        value = 2.0 * eps / s + 1.0 - (1.0 - s / (c - 1.0)) ** (c - 1)
        tag = "upper_bound"
    else:
        raise UnsupportedError(f"no closed privacy form for {family!r}/{kind!r}")
    return AnalyticValue(value=min(1.0, value), tag=tag)


def analytic_distortion(mechanism):
    """Closed-form worst-case release distance of a quantization mechanism.

    Every closed-form mechanism moves parameters along a band of slope t0
    through each bin; the worst case sits at a bin edge and depends only
    on the bin size and that slope.
    """
    _require_closed_form(mechanism)
    s = mechanism.bin_size
    family = mechanism.family
    kind = mechanism.secret.kind
    if kind == "mean" or family in ("exponential", "categorical"):
        return s / 2.0
    t0 = mechanism.t0
    if family == "shifted_exponential":
        return 0.5 * s * (t0 - 1.0) + s * math.exp(-t0)
    if family == "gaussian":
        return s * _gaussian_band_rate(t0)
    if family == "uniform":
        return (t0 * t0 + 1.0) * s / (4.0 * (t0 + 1.0) ** 2)
    raise UnsupportedError(f"no closed distortion form for {family!r}/{kind!r}")


def _sample_box_params(prior, family, count, rng, n_trials):
    def draw(name):
        lo, hi = prior.interval(name)
        return rng.uniform(lo, hi, size=count)

    if family == "gaussian":
        return [Gaussian(mu=float(a), sigma=float(b)) for a, b in zip(draw("mu"), draw("sigma"))]
    if family == "uniform":
        widths = draw("width")
        if "m" in prior.intervals:
            left = draw("m")
            return [Uniform(m=float(a), n=float(a + w)) for a, w in zip(left, widths)]
        mids = draw("mid")
        return [
            Uniform(m=float(c - 0.5 * w), n=float(c + 0.5 * w)) for c, w in zip(mids, widths)
        ]
    if family == "exponential":
        return [Exponential(lam=float(a)) for a in draw("lam")]
    if family == "shifted_exponential":
        return [
            ShiftedExponential(lam=float(a), h=float(b)) for a, b in zip(draw("lam"), draw("h"))
        ]
    if family in _SCALAR_DISCRETE:
        if family == "binomial" and not isinstance(n_trials, (int, np.integer)):
            raise ConfigError("sampling a binomial prior needs the mechanism's n_trials")
        return [_scalar_discrete_params(family, float(v), n_trials) for v in draw("theta")]
    raise ConfigError(f"a UniformBox prior cannot describe the {family!r} family")


def _sample_params(prior, family, count, rng, n_trials):
    """Draw parameter vectors from a prior.

    UniformBox and UniformSimplex are handled natively; any other object
    may implement sample(rng, count) -> sequence of parameter vectors,
    which is the hook for non-uniform priors.
    """
    if isinstance(prior, UniformBox):
        return _sample_box_params(prior, family, count, rng, n_trials)
    if isinstance(prior, UniformSimplex):
        if family != "categorical":
            raise ConfigError(f"a simplex prior cannot describe the {family!r} family")
        rows = rng.dirichlet(np.ones(prior.c), size=count)
        return [Categorical(p=tuple(float(v) for v in row)) for row in rows]
    if hasattr(prior, "sample"):
        out = list(prior.sample(rng, count))
        if len(out) != count:
            raise ConfigError(
                f"custom prior returned {len(out)} draws where {count} were requested"
            )
        return out
    raise ConfigError(f"prior {type(prior).__name__} is not sampleable")


def _release_key(released):
    doc = params_to_dict(released)
    return tuple(
        (k, tuple(v) if isinstance(v, (list, tuple)) else v) for k, v in sorted(doc.items())
    )


_DIAGONAL_FAMILIES = ("gaussian", "uniform", "shifted_exponential")


def _make_geometric_attacker(mechanism, prior, eps):
    """Per-release optimal window attacker under the uniform box priors.

    Every closed-form mechanism moves parameters along a band through the
    released bin; under a uniform prior the posterior over the band offset
    is uniform on a clipped interval, and the secret is affine in the
    offset with a fixed slope. The best 2-epsilon secret window is then a
    clamped offset window: centered on the release in the interior and
    slid inward where the box edges truncate the band. Returns a
    predicate (theta, released) -> hit.
    """
    family = mechanism.family
    kind = mechanism.secret.kind
    s = mechanism.bin_size
    t0 = mechanism.t0
    tol = _CEIL_TOL * max(1.0, s)

    if family == "gaussian" and kind in ("quantile", "std"):
        slope = t0 + std_normal_quantile(mechanism.secret.alpha) if kind == "quantile" else 1.0
        coord_lo, coord_hi = prior.interval("sigma")
        band_lo, band_hi = prior.interval("mu")

        def offsets(theta, released):
            t = theta.sigma - released.sigma
            lo = max(-0.5 * s, coord_lo - released.sigma)
            hi = min(0.5 * s, coord_hi - released.sigma)
            if t0 != 0.0:
                edge1 = (band_lo - released.mu) / t0
                edge2 = (band_hi - released.mu) / t0
                lo = max(lo, min(edge1, edge2))
                hi = min(hi, max(edge1, edge2))
            return t, lo, hi

    elif family == "shifted_exponential" and kind in ("quantile", "std"):
        if kind == "quantile":
            slope = -math.log1p(-mechanism.secret.alpha) - t0
        else:
            slope = 1.0
        coord_lo, coord_hi = prior.interval("lam")
        band_lo, band_hi = prior.interval("h")

        def offsets(theta, released):
            t = theta.lam - released.lam
            lo = max(-0.5 * s, coord_lo - released.lam)
            hi = min(0.5 * s, coord_hi - released.lam)
            if t0 != 0.0:
                edge1 = (released.h - band_hi) / t0
                edge2 = (released.h - band_lo) / t0
                lo = max(lo, min(edge1, edge2))
                hi = min(hi, max(edge1, edge2))
            return t, lo, hi

    elif family == "uniform" and kind in ("quantile", "std"):
        stretch = 1.0 + t0
        if kind == "quantile":
            slope = mechanism.secret.alpha * stretch - t0
        else:
            slope = stretch / (2.0 * math.sqrt(3.0))
        coord_lo, coord_hi = prior.interval("width")
        band_lo, band_hi = prior.interval("m")

        def offsets(theta, released):
            t = (theta.width - released.width) / stretch
            lo = max(-0.5 * s, coord_lo - released.width) / stretch
            hi = min(0.5 * s, coord_hi - released.width) / stretch
            if t0 != 0.0:
                edge1 = (released.m - band_hi) / t0
                edge2 = (released.m - band_lo) / t0
                lo = max(lo, min(edge1, edge2))
                hi = min(hi, max(edge1, edge2))
            return t, lo, hi

    elif family == "categorical":
        slope = 1.0
        j = mechanism.secret.j

        def offsets(theta, released):
            # bins tile [0, 1] exactly; the rare simplex floor correction
            # shifts the released coordinate, which only widens |t|
            return theta.p[j] - released.p[j], -0.5 * s, 0.5 * s

    else:
        # location means and the exponential-scale mechanisms: the bin is
        # the band and nothing else moves
        if family == "exponential" and kind == "quantile":
            slope = -math.log1p(-mechanism.secret.alpha)
        else:
            slope = 1.0
        coord = mechanism.quantized_param
        coord_lo, coord_hi = prior.interval(coord)

        def offsets(theta, released):
            mid = getattr(released, coord)
            return (
                getattr(theta, coord) - mid,
                max(-0.5 * s, coord_lo - mid),
                min(0.5 * s, coord_hi - mid),
            )

    if slope == 0.0:
        # the secret is constant along the band, so any window wins
        return lambda theta, released: True
    half = eps / abs(slope)

    def hit(theta, released):
        t, lo, hi = offsets(theta, released)
        if hi - lo <= 2.0 * half + tol:
            return True
        center = min(max(0.0, lo + half), hi - half)
        return abs(t - center) <= half + tol

    return hit


def _fit_window_attacker(mechanism, prior, secret, config, key_fn):
    """Choose per-release 2-epsilon windows from an independent draw.

    Samples a separate stream of the same size, groups true secrets by
    the released key, and keeps the window start capturing the most
    fitting points. Fitting on independent draws keeps the evaluation
    counts unbiased for the fitted attacker.
    """
    family = mechanism.family
    n_trials = getattr(mechanism, "n_trials", None)
    span = 2.0 * config.epsilon
    groups = {}
    produced = 0
    shard = 0
    while produced < config.mc_samples:
        count = min(_SHARD_SIZE, config.mc_samples - produced)
        seed = np.random.SeedSequence((config.rng_seed & _SEED_MASK, shard, 1))
        rng = np.random.default_rng(seed)
        for theta in _sample_params(prior, family, count, rng, n_trials):
            released = mechanism.release(theta)
            groups.setdefault(key_fn(released), []).append(secret_value(theta, secret))
        produced += count
        shard += 1
    windows = {}
    for key, values in groups.items():
        values.sort()
        best = -1
        start = values[0]
        left = 0
        for right, high in enumerate(values):
            while high - values[left] > span:
                left += 1
            if right - left > best:
                best = right - left
                start = values[left]
        windows[key] = start
    return windows


def mc_privacy(mechanism, prior, secret, config):
    """Monte-Carlo guessing probability under a sampleable prior.

    Runs two attackers over the same draws and reports the larger rate.
    The plug-in attacker guesses the released secret and wins when it
    lands within epsilon of the truth. The window attacker picks, per
    released value, the 2-epsilon secret window of maximal posterior
    mass: under the uniform box and simplex priors that window is
    computed exactly from the release geometry (it ties with the plug-in
    guess away from the range edges), while grid tables, plain release
    callables, and single-parameter mechanisms under other sampleable
    priors fit their windows on an independent stream. Two-parameter
    closed forms under non-uniform priors are not supported.

    A mechanism only needs a family attribute and release(theta); the
    identity map and constant releases are fine.
    """
    _check_secret(secret)
    _check_config(config)
    family = getattr(mechanism, "family", None)
    if family is None:
        raise ConfigError("mechanism must expose the family it releases")
    n_trials = getattr(mechanism, "n_trials", None)
    eps = config.epsilon

    closed_form = isinstance(mechanism, QuantizationMechanism) and mechanism.table is None
    uniform_prior = isinstance(prior, (UniformBox, UniformSimplex))
    geometric = None
    windows = None
    if closed_form and uniform_prior:
        geometric = _make_geometric_attacker(mechanism, prior, eps)
    elif closed_form and family in _DIAGONAL_FAMILIES:
        raise UnsupportedError(
            "two-parameter closed-form mechanisms support only their uniform box prior"
        )
    else:
        if closed_form and family == "categorical":
            j = mechanism.secret.j
            key_fn = lambda released: released.p[j]  # noqa: E731
        elif closed_form:
            coord = mechanism.quantized_param
            key_fn = lambda released: getattr(released, coord)  # noqa: E731
        else:
            key_fn = _release_key
        windows = _fit_window_attacker(mechanism, prior, secret, config, key_fn)

    span = 2.0 * eps
    tol = _CEIL_TOL * max(1.0, span)
    total = config.mc_samples
    plugin_hits = 0
    window_hits = 0
    produced = 0
    shard = 0
    while produced < total:
        count = min(_SHARD_SIZE, total - produced)
        seed = np.random.SeedSequence((config.rng_seed & _SEED_MASK, shard))
        rng = np.random.default_rng(seed)
        for theta in _sample_params(prior, family, count, rng, n_trials):
            released = mechanism.release(theta)
            truth = secret_value(theta, secret)
            guess = secret_value(released, secret)
            plugin = abs(guess - truth) <= eps
            if plugin:
                plugin_hits += 1
            if geometric is not None:
                if geometric(theta, released):
                    window_hits += 1
            else:
                start = windows.get(key_fn(released))
                if start is None:
                    window_hits += plugin
                elif start - tol <= truth <= start + span + tol:
                    window_hits += 1
        produced += count
        shard += 1

    plugin_rate = plugin_hits / total
    window_rate = window_hits / total
    estimate = max(plugin_rate, window_rate)
    stderr = math.sqrt(estimate * (1.0 - estimate) / total)
    return McPrivacy(
        estimate=estimate, stderr=stderr, plugin_rate=plugin_rate, window_rate=window_rate
    )


def _release_distance(theta, released):
    # categorical supports live on unordered labels, where transport under
    # the unit ground metric reduces to total variation
    if isinstance(theta, Categorical):
        return 2.0 * tv_distance(theta, released)
    return wasserstein1(theta, released)


def empirical_distortion(mechanism, prior, n_probe, rng_seed=0):
    """Largest sampled release distance over n_probe prior draws."""
    if not isinstance(n_probe, (int, np.integer)) or n_probe < 1:
        raise ConfigError(f"n_probe must be an integer >= 1, got {n_probe!r}")
    family = getattr(mechanism, "family", None)
    if family is None:
        raise ConfigError("mechanism must expose the family it releases")
    rng = np.random.default_rng(np.random.SeedSequence((rng_seed & _SEED_MASK, 0)))
    worst = 0.0
    remaining = int(n_probe)
    while remaining > 0:
        count = min(_SHARD_SIZE, remaining)
        for theta in _sample_params(prior, family, count, rng, getattr(mechanism, "n_trials", None)):
            worst = max(worst, _release_distance(theta, mechanism.release(theta)))
        remaining -= count
    return worst


def _empirical_secret(values, secret):
    kind = secret.kind
    if kind == "mean":
        return float(np.mean(values))
    if kind == "std":
        return float(np.std(values))
    if kind == "quantile":
        ordered = np.sort(values)
        rank = max(1, math.ceil(secret.alpha * ordered.size))
        return float(ordered[rank - 1])
    return float(np.mean(values == secret.j))


def _as_dataset(name, data):
    arr = np.asarray(data, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ConfigError(f"{name} must be a non-empty dataset")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


def surrogate_privacy(released, reference, secret):
    """Negated attacker error between two datasets' empirical secrets.

    The attacker reads the secret off the released dataset; the score is
    minus the absolute error against the reference dataset's secret, so
    0 is total leakage and more negative is safer.
    """
    _check_secret(secret)
    x = _as_dataset("released", released)
    y = _as_dataset("reference", reference)
    return -abs(_empirical_secret(x, secret) - _empirical_secret(y, secret))


def surrogate_distortion(released, reference):
    """Empirical transport distance between two datasets.

    Integrates the gap between the two sorted-sample quantile functions
    exactly; positions are tracked on the integer grid of 1/(n*m) steps,
    so equal sizes reduce to the mean absolute sorted difference and
    unequal sizes need no subsampling.
    """
    x = np.sort(_as_dataset("released", released))
    y = np.sort(_as_dataset("reference", reference))
    nx, ny = x.size, y.size
    total = 0.0
    i = j = 0
    prev = 0
    while i < nx and j < ny:
        cut = min((i + 1) * ny, (j + 1) * nx)
        total += (cut - prev) * abs(x[i] - y[j])
        if cut == (i + 1) * ny:
            i += 1
        if cut == (j + 1) * nx:
            j += 1
        prev = cut
    return total / (nx * ny)


def max_density_bound(length, floor, lipschitz_const, mass):
    """Largest value a Lipschitz density with a floor can reach.

    Over an interval of the given length carrying the given total mass,
    a density that stays >= floor and has |slope| <= lipschitz_const
    peaks no higher than this. Flat densities (zero constant) peak at
    mass / length.
    """
    if length <= 0 or mass <= 0:
        raise ConfigError(f"length and mass must be > 0, got {length!r}, {mass!r}")
    if floor < 0 or lipschitz_const < 0:
        raise ConfigError("floor and lipschitz_const must be >= 0")
    if floor * length > mass * (1.0 + 1e-9):
        raise DomainError(
            f"floor {floor} over length {length} already exceeds the total mass {mass}"
        )
    flat = mass / length
    if floor <= flat - 0.5 * lipschitz_const * length:
        return flat + 0.5 * lipschitz_const * length
    return floor + math.sqrt(max(0.0, 2.0 * lipschitz_const * (mass - floor * length)))


def max_window_fraction(length, window, floor, lipschitz_const):
    """Largest mass fraction any window can capture from a Lipschitz density.

    Over an interval of the given length, a density with |slope| <=
    lipschitz_const that never falls below floor concentrates at most
    this fraction of its mass in any subinterval of the window length.
    The extremal shape is flat at the floor with one ramp rising into a
    window parked at the edge.
    """
    if length <= 0 or window <= 0:
        raise ConfigError(f"length and window must be > 0, got {length!r}, {window!r}")
    if floor < 0 or lipschitz_const < 0:
        raise ConfigError("floor and lipschitz_const must be >= 0")
    if window >= length:
        return 1.0
    if lipschitz_const == 0.0:
        return window / length
    half = 0.5 * window
    knee = half - floor / lipschitz_const
    rise = knee + math.sqrt(knee * knee + 2.0 * floor * length / lipschitz_const)
    numer = window * (floor + lipschitz_const * (rise - half))
    denom = floor * length + 0.5 * lipschitz_const * rise * rise
    return min(1.0, numer / denom)


_RELAXED_SINGLE = {
    ("gaussian", "mean"): "mu",
    ("uniform", "mean"): "mid",
    ("shifted_exponential", "mean"): "h",
    ("exponential", "mean"): "lam",
    ("exponential", "quantile"): "lam",
    ("exponential", "std"): "lam",
}

# quantized coordinate, band coordinate, and the band slope source
_RELAXED_DIAGONAL = {
    ("shifted_exponential", "quantile"): ("lam", "h"),
    ("shifted_exponential", "std"): ("lam", "h"),
    ("gaussian", "quantile"): ("sigma", "mu"),
    ("gaussian", "std"): ("sigma", "mu"),
}


def _check_relaxed_param(name, param, s):
    if param.lower_bound * param.length > 1.0 + 1e-9:
        raise ConfigError(
            f"density floor {param.lower_bound} over the {name!r} range "
            f"{param.length} carries more than unit mass"
        )
    if s > param.length * (1.0 + 1e-9):
        raise ConfigError(f"bin size {s} exceeds the {name!r} range {param.length}")


def relaxed_bounds(family, secret, descriptor, s, epsilon):
    """Guessing-probability upper bound under a Lipschitz prior density.

    Replaces the uniform-prior assumption of the closed forms with a
    per-coordinate density floor and Lipschitz constant. Location means
    and the exponential-scale secrets bound the mass fraction a
    2-epsilon-wide secret window can capture inside one bin. The diagonal
    two-parameter mechanisms additionally compose the two coordinates'
    constants along the band (scaling the band coordinate by the slope
    leaves the peak-density bound unchanged, which also covers the
    zero-slope Gaussian std case) and add the band-truncation mass at the
    edges of the non-quantized coordinate's range.
    """
    _check_secret(secret)
    family_class(family)
    if not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0):
        raise ConfigError(f"bin size must be a finite number > 0, got {s!r}")
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ConfigError(f"epsilon must be a finite number > 0, got {epsilon!r}")
    if not isinstance(descriptor, LipschitzDescriptor):
        raise ConfigError(
            f"descriptor must be a LipschitzDescriptor, got {type(descriptor).__name__}"
        )
    kind = secret.kind
    key = (family, kind)

    if key in _RELAXED_SINGLE:
        param = descriptor.param(_RELAXED_SINGLE[key])
        _check_relaxed_param(_RELAXED_SINGLE[key], param, s)
        eps_eff = epsilon
        if kind == "quantile":
            eps_eff = epsilon / -math.log1p(-secret.alpha)
        bound = max_window_fraction(
            s, 2.0 * eps_eff, param.lower_bound, param.lipschitz_const
        )
        return min(1.0, bound)

    if key in _RELAXED_DIAGONAL:
        quant_name, band_name = _RELAXED_DIAGONAL[key]
        quant = descriptor.param(quant_name)
        band = descriptor.param(band_name)
        _check_relaxed_param(quant_name, quant, s)
        _check_relaxed_param(band_name, band, band.length)
        if family == "shifted_exponential":
            if kind == "quantile":
                slope = abs(slope_shifted_exponential_quantile(secret.alpha))
                eps_eff = epsilon / abs(math.log1p(-secret.alpha) + slope)
            else:
                slope = math.log(2.0)
                eps_eff = epsilon
        else:
            if kind == "quantile":
                t0 = slope_gaussian_quantile(secret.alpha)
                slope = abs(t0)
                eps_eff = epsilon / abs(t0 + std_normal_quantile(secret.alpha))
            else:
                slope = 0.0
                eps_eff = epsilon
        peak_quant = max_density_bound(quant.length, quant.lower_bound, quant.lipschitz_const, 1.0)
        peak_band = max_density_bound(band.length, band.lower_bound, band.lipschitz_const, 1.0)
        joint_floor = quant.lower_bound * band.lower_bound
        joint_slope = quant.lipschitz_const * peak_band + slope * band.lipschitz_const * peak_quant
        window_term = max_window_fraction(s, 2.0 * eps_eff, joint_floor, joint_slope)
        truncation = peak_band * peak_quant * quant.length * slope * s
        return min(1.0, window_term + truncation)

    raise UnsupportedError(f"no relaxed bound for family {family!r} with secret {kind!r}")
