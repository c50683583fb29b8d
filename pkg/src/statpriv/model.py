"""Distribution families, secret functions, priors, and closed-form distances.

Every family is an immutable dataclass holding the parameters that fully
specify one distribution. Secrets are scalar functionals of those parameters
(mean, quantile, standard deviation, or the probability mass of one bin).
The distance helpers at the bottom are the exact closed forms the rest of
the package builds on: Wasserstein-1 for families on an ordered support,
and a halved total-variation crossing form for discrete families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from statpriv.errors import ConfigError, FitError
from statpriv.specialfn import (
    _normal_quantile_ndarray,
    reg_gamma_q,
    reg_inc_beta,
    std_normal_cdf,
    std_normal_quantile,
)

__all__ = [
    "Gaussian",
    "Uniform",
    "Exponential",
    "ShiftedExponential",
    "Geometric",
    "Binomial",
    "Poisson",
    "Categorical",
    "Secret",
    "UniformBox",
    "UniformSimplex",
    "LipschitzParam",
    "LipschitzDescriptor",
    "FAMILY_TAGS",
    "family_class",
    "is_continuous",
    "is_ordinal",
    "secret_value",
    "wasserstein1",
    "tv_distance",
    "aux_distance",
    "secret_range",
    "fit_params",
    "sample",
]

_SQRT_12 = math.sqrt(12.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _require_finite(label, value):
    if not math.isfinite(value):
        raise ConfigError(f"{label} must be finite, got {value!r}")


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float

    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _require_finite("gaussian mu", self.mu)
        _require_finite("gaussian sigma", self.sigma)
        if self.sigma <= 0:
            raise ConfigError(f"gaussian sigma must be positive, got {self.sigma}")

    def mean(self):
        return self.mu

    def std(self):
        return self.sigma

    def quantile(self, alpha):
        return self.mu + self.sigma * std_normal_quantile(alpha)


@dataclass(frozen=True)
class Uniform:
    m: float
    n: float

    family: ClassVar[str] = "uniform"

    def __post_init__(self):
        _require_finite("uniform m", self.m)
        _require_finite("uniform n", self.n)
        if not self.m < self.n:
            raise ConfigError(f"uniform needs m < n, got m={self.m}, n={self.n}")

    @property
    def width(self):
        return self.n - self.m

    @property
    def mid(self):
        return 0.5 * (self.m + self.n)

    def mean(self):
        return self.mid

    def std(self):
        return self.width / _SQRT_12

    def quantile(self, alpha):
        return self.m + alpha * self.width


@dataclass(frozen=True)
class Exponential:
    """Scale parameterization: density (1/lam) * exp(-x/lam) on x >= 0."""

    lam: float

    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        _require_finite("exponential lam", self.lam)
        if self.lam <= 0:
            raise ConfigError(f"exponential lam must be positive, got {self.lam}")

    def mean(self):
        return self.lam

    def std(self):
        return self.lam

    def quantile(self, alpha):
        return -self.lam * math.log1p(-alpha)


@dataclass(frozen=True)
class ShiftedExponential:
    """Exponential with scale lam shifted to start at h."""

    lam: float
    h: float

    family: ClassVar[str] = "shifted_exponential"

    def __post_init__(self):
        _require_finite("shifted_exponential lam", self.lam)
        _require_finite("shifted_exponential h", self.h)
        if self.lam <= 0:
            raise ConfigError(
                f"shifted_exponential lam must be positive, got {self.lam}"
            )

    def mean(self):
        return self.h + self.lam

    def std(self):
        return self.lam

    def quantile(self, alpha):
        return self.h - self.lam * math.log1p(-alpha)


@dataclass(frozen=True)
class Geometric:
    """pmf (1-theta)^k * theta on k = 0, 1, 2, ... (failures before success)."""

    theta: float

    family: ClassVar[str] = "geometric"

    def __post_init__(self):
        _require_finite("geometric theta", self.theta)
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"geometric theta must be in (0, 1), got {self.theta}")

    def pmf(self, k):
        if k < 0:
            return 0.0
        return (1.0 - self.theta) ** k * self.theta


@dataclass(frozen=True)
class Binomial:
    """n_trials is a fixed family hyperparameter; theta is the parameter."""

    n_trials: int
    theta: float

    family: ClassVar[str] = "binomial"

    def __post_init__(self):
        if not isinstance(self.n_trials, (int, np.integer)) or self.n_trials < 1:
            raise ConfigError(
                f"binomial n_trials must be a positive integer, got {self.n_trials!r}"
            )
        _require_finite("binomial theta", self.theta)
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"binomial theta must be in (0, 1), got {self.theta}")

    def pmf(self, k):
        n = self.n_trials
        if k < 0 or k > n:
            return 0.0
        log_p = (
            math.lgamma(n + 1)
            - math.lgamma(k + 1)
            - math.lgamma(n - k + 1)
            + k * math.log(self.theta)
            + (n - k) * math.log1p(-self.theta)
        )
        return math.exp(log_p)


@dataclass(frozen=True)
class Poisson:
    theta: float

    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        _require_finite("poisson theta", self.theta)
        if self.theta <= 0:
            raise ConfigError(f"poisson theta must be positive, got {self.theta}")

    def pmf(self, k):
        if k < 0:
            return 0.0
        return math.exp(k * math.log(self.theta) - self.theta - math.lgamma(k + 1))


@dataclass(frozen=True)
class Categorical:
    """Probability vector over C >= 2 unordered categories."""

    p: tuple

    family: ClassVar[str] = "categorical"

    def __post_init__(self):
        probs = tuple(float(v) for v in self.p)
        object.__setattr__(self, "p", probs)
        if len(probs) < 2:
            raise ConfigError("categorical needs at least 2 categories")
        for v in probs:
            _require_finite("categorical probability", v)
            if v < 0:
                raise ConfigError(f"categorical probabilities must be >= 0, got {v}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ConfigError(
                f"categorical probabilities must sum to 1, got {sum(probs)!r}"
            )

    @property
    def n_categories(self):
        return len(self.p)


_CONTINUOUS = (Gaussian, Uniform, Exponential, ShiftedExponential)
_ORDINAL = (Geometric, Binomial, Poisson)

FAMILY_TAGS = {
    "gaussian": Gaussian,
    "uniform": Uniform,
    "exponential": Exponential,
    "shifted_exponential": ShiftedExponential,
    "geometric": Geometric,
    "binomial": Binomial,
    "poisson": Poisson,
    "categorical": Categorical,
}


def family_class(tag):
    """Resolve a family tag string to its class. Hyphens are tolerated."""
    key = str(tag).strip().lower().replace("-", "_")
    try:
        return FAMILY_TAGS[key]
    except KeyError:
        raise ConfigError(
            f"unknown family {tag!r}; expected one of {sorted(FAMILY_TAGS)}"
        ) from None


def is_continuous(theta) -> bool:
    return isinstance(theta, _CONTINUOUS)


def is_ordinal(theta) -> bool:
    """True for integer-support families with a single scalar parameter."""
    return isinstance(theta, _ORDINAL)


@dataclass(frozen=True)
class Secret:
    """Scalar functional of the distribution parameters to keep private.

    kind is one of "mean", "quantile", "std", "fraction". Quantiles carry
    alpha in (0, 1); fraction carries the bin index j >= 0.
    """

    kind: str
    alpha: float = None
    j: int = None

    def __post_init__(self):
        if self.kind not in ("mean", "quantile", "std", "fraction"):
            raise ConfigError(
                f"unknown secret kind {self.kind!r}; "
                "expected mean, quantile, std, or fraction"
            )
        if self.kind == "quantile":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ConfigError(
                    f"quantile secret needs alpha in (0, 1), got {self.alpha!r}"
                )
        elif self.alpha is not None:
            raise ConfigError(f"secret {self.kind!r} takes no alpha")
        if self.kind == "fraction":
            if (
                self.j is None
                or not isinstance(self.j, (int, np.integer))
                or self.j < 0
            ):
                raise ConfigError(
                    f"fraction secret needs a bin index j >= 0, got {self.j!r}"
                )
        elif self.j is not None:
            raise ConfigError(f"secret {self.kind!r} takes no bin index")

    @classmethod
    def parse(cls, text):
        """Parse "mean", "std", "quantile:0.95", or "fraction:2"."""
        name, sep, arg = str(text).strip().partition(":")
        name = name.lower()
        if name == "quantile":
            if not sep:
                raise ConfigError("quantile secret needs an argument, e.g. quantile:0.9")
            try:
                return cls("quantile", alpha=float(arg))
            except ValueError:
                raise ConfigError(f"bad quantile level {arg!r}") from None
        if name == "fraction":
            if not sep:
                raise ConfigError("fraction secret needs a bin index, e.g. fraction:0")
            try:
                return cls("fraction", j=int(arg))
            except ValueError:
                raise ConfigError(f"bad fraction bin index {arg!r}") from None
        if sep:
            raise ConfigError(f"secret {name!r} takes no argument")
        return cls(name)


@dataclass(frozen=True)
class UniformBox:
    """Independent uniform intervals, keyed by parameter name.

    Keys follow the mechanism conventions: "mu"/"sigma" for gaussian,
    "mid"/"m"/"width" for uniform, "lam" for the exponentials, "h" for the
    shift, "theta" for the single-parameter discrete families.
    """

    intervals: dict

    def __post_init__(self):
        cleaned = {}
        for name, bounds in dict(self.intervals).items():
            lo, hi = (float(bounds[0]), float(bounds[1]))
            _require_finite(f"box {name} lower endpoint", lo)
            _require_finite(f"box {name} upper endpoint", hi)
            if not lo < hi:
                raise ConfigError(
                    f"box interval for {name!r} needs lo < hi, got [{lo}, {hi}]"
                )
            cleaned[str(name)] = (lo, hi)
        if not cleaned:
            raise ConfigError("uniform box needs at least one interval")
        object.__setattr__(self, "intervals", cleaned)

    def interval(self, name):
        try:
            return self.intervals[name]
        except KeyError:
            raise ConfigError(
                f"prior box has no interval for {name!r} "
                f"(has {sorted(self.intervals)})"
            ) from None

    def width(self, name):
        lo, hi = self.interval(name)
        return hi - lo

    def contains(self, name, value, slack=1e-9):
        lo, hi = self.interval(name)
        return lo - slack <= value <= hi + slack


@dataclass(frozen=True)
class UniformSimplex:
    """Uniform prior over probability vectors with c categories."""

    c: int

    def __post_init__(self):
        if not isinstance(self.c, (int, np.integer)) or self.c < 2:
            raise ConfigError(f"simplex prior needs c >= 2 categories, got {self.c!r}")


@dataclass(frozen=True)
class LipschitzParam:
    """One parameter's interval with a density Lipschitz constant and floor."""

    lo: float
    hi: float
    lipschitz_const: float
    lower_bound: float

    def __post_init__(self):
        _require_finite("lipschitz interval lo", self.lo)
        _require_finite("lipschitz interval hi", self.hi)
        if not self.lo < self.hi:
            raise ConfigError("lipschitz interval needs lo < hi")
        if self.lipschitz_const < 0:
            raise ConfigError("lipschitz constant must be >= 0")
        if self.lower_bound < 0:
            raise ConfigError("density lower bound must be >= 0")

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class LipschitzDescriptor:
    """Per-parameter Lipschitz density descriptions, for bound calculators only."""

    params: dict

    def __post_init__(self):
        cleaned = {}
        for name, lp in dict(self.params).items():
            if not isinstance(lp, LipschitzParam):
                raise ConfigError(
                    f"lipschitz descriptor entries must be LipschitzParam, "
                    f"got {type(lp).__name__} for {name!r}"
                )
            cleaned[str(name)] = lp
        if not cleaned:
            raise ConfigError("lipschitz descriptor needs at least one parameter")
        object.__setattr__(self, "params", cleaned)

    def param(self, name):
        try:
            return self.params[name]
        except KeyError:
            raise ConfigError(
                f"lipschitz descriptor has no entry for {name!r} "
                f"(has {sorted(self.params)})"
            ) from None


def secret_value(theta, secret):
    """Evaluate the secret functional at one parameter vector, in closed form."""
    kind = secret.kind
    if is_continuous(theta):
        if kind == "mean":
            return theta.mean()
        if kind == "std":
            return theta.std()
        if kind == "quantile":
            return theta.quantile(secret.alpha)
        raise ConfigError(
            f"secret {kind!r} is not defined for the {theta.family} family"
        )
    if isinstance(theta, Categorical):
        if kind != "fraction":
            raise ConfigError(
                "categorical carries no scalar location; only fraction secrets apply"
            )
        if secret.j >= theta.n_categories:
            raise ConfigError(
                f"fraction bin {secret.j} out of range for C={theta.n_categories}"
            )
        return theta.p[secret.j]
    # ordinal discrete families
    if kind == "quantile":
        raise ConfigError(
            f"quantile secrets are defined for continuous families only, "
            f"not {theta.family}"
        )
    if kind == "fraction":
        if isinstance(theta, Binomial) and secret.j > theta.n_trials:
            raise ConfigError(
                f"fraction bin {secret.j} exceeds n_trials={theta.n_trials}"
            )
        return theta.pmf(secret.j)
    if isinstance(theta, Geometric):
        # The mean secret uses the trials-until-first-success convention
        # 1/theta; the pmf counts failures, whose mean is 1/theta - 1. The
        # 1/theta form is what the distance-to-range ratios divide by, and
        # the two differ only by a constant shift.
        if kind == "mean":
            return 1.0 / theta.theta
        return math.sqrt(1.0 - theta.theta) / theta.theta
    if isinstance(theta, Binomial):
        if kind == "mean":
            return theta.n_trials * theta.theta
        return math.sqrt(theta.n_trials * theta.theta * (1.0 - theta.theta))
    if isinstance(theta, Poisson):
        if kind == "mean":
            return theta.theta
        return math.sqrt(theta.theta)
    raise ConfigError(f"unsupported parameter type {type(theta).__name__}")


def _check_same_family(theta1, theta2):
    if type(theta1) is not type(theta2):
        raise ConfigError(
            f"distance needs parameters from one family, got "
            f"{type(theta1).__name__} and {type(theta2).__name__}"
        )
    if isinstance(theta1, Binomial) and theta1.n_trials != theta2.n_trials:
        raise ConfigError(
            f"binomial parameters must share n_trials, got "
            f"{theta1.n_trials} and {theta2.n_trials}"
        )
    if isinstance(theta1, Categorical) and theta1.n_categories != theta2.n_categories:
        raise ConfigError(
            f"categorical parameters must share C, got "
            f"{theta1.n_categories} and {theta2.n_categories}"
        )


def wasserstein1(theta1, theta2):
    """Exact Wasserstein-1 distance between two members of one family.

    Continuous families use the quantile-difference integrals evaluated in
    closed form. The integer families are stochastically ordered in their
    parameter, which collapses W1 to the difference of means. Categorical
    has no ordered support, so W1 is undefined for it.
    """
    _check_same_family(theta1, theta2)
    if isinstance(theta1, Gaussian):
        dmu = theta2.mu - theta1.mu
        dsig = theta2.sigma - theta1.sigma
        if dsig == 0.0:
            return abs(dmu)
        a = dmu / dsig
        return abs(dsig) * _SQRT_2_OVER_PI * math.exp(-0.5 * a * a) + abs(dmu) * (
            1.0 - 2.0 * std_normal_cdf(-abs(a))
        )
    if isinstance(theta1, Uniform):
        dm = theta2.m - theta1.m
        dn = theta2.n - theta1.n
        if dm * dn >= 0.0:
            return 0.5 * abs(dm + dn)
        # endpoints move in opposite directions: the quantile difference
        # m-shift*(1-u) + n-shift*u changes sign inside (0, 1)
        return (dm * dm + dn * dn) / (2.0 * abs(dn - dm))
    if isinstance(theta1, Exponential):
        return abs(theta2.lam - theta1.lam)
    if isinstance(theta1, ShiftedExponential):
        dh = theta2.h - theta1.h
        dl = theta2.lam - theta1.lam
        if dl == 0.0:
            return abs(dh)
        if dh * dl >= 0.0:
            return abs(dh + dl)
        t0 = -dh / dl
        return abs(dl) * (t0 - 1.0 + 2.0 * math.exp(-t0))
    if isinstance(theta1, Geometric):
        return abs(1.0 / theta1.theta - 1.0 / theta2.theta)
    if isinstance(theta1, Binomial):
        return theta1.n_trials * abs(theta1.theta - theta2.theta)
    if isinstance(theta1, Poisson):
        return abs(theta1.theta - theta2.theta)
    raise ConfigError(
        "wasserstein1 needs an ordered support; categorical labels have none"
    )


def tv_distance(theta1, theta2):
    """Halved total-variation distance between two discrete distributions.

    Returns half of sup_A |P1(A) - P2(A)|, i.e. a quarter of the L1
    distance between the pmfs. The halving mirrors the half-W1 used for
    continuous families, so the two distances are interchangeable inside
    the distance-to-secret-range ratios. Evaluated via the single pmf
    crossing point for the ordinal families, directly for categorical.
    """
    _check_same_family(theta1, theta2)
    if isinstance(theta1, Categorical):
        p = np.asarray(theta1.p)
        q = np.asarray(theta2.p)
        return 0.25 * float(np.abs(p - q).sum())
    if not is_ordinal(theta1):
        raise ConfigError(
            f"tv_distance is defined for discrete families only, got {theta1.family}"
        )
    if isinstance(theta1, Geometric):
        a = max(theta1.theta, theta2.theta)
        b = min(theta1.theta, theta2.theta)
        if a == b:
            return 0.0
        crossing = math.log(b / a) / math.log((1.0 - a) / (1.0 - b))
        k0 = math.floor(crossing) + 1
        return 0.5 * ((1.0 - b) ** k0 - (1.0 - a) ** k0)
    if isinstance(theta1, Binomial):
        a = max(theta1.theta, theta2.theta)
        b = min(theta1.theta, theta2.theta)
        if a == b:
            return 0.0
        n = theta1.n_trials
        crossing = (
            n
            * math.log((1.0 - b) / (1.0 - a))
            / math.log(a * (1.0 - b) / (b * (1.0 - a)))
        )
        k0 = math.floor(crossing)
        return 0.5 * (
            reg_inc_beta(1.0 - b, n - k0, 1 + k0)
            - reg_inc_beta(1.0 - a, n - k0, 1 + k0)
        )
    a = max(theta1.theta, theta2.theta)
    b = min(theta1.theta, theta2.theta)
    if a == b:
        return 0.0
    crossing = (a - b) / math.log(a / b)
    k0 = math.floor(crossing) + 1
    return 0.5 * (reg_gamma_q(float(k0), b) - reg_gamma_q(float(k0), a))


def aux_distance(theta1, theta2):
    """The halved distance the tradeoff bounds are stated in.

    Half W1 for continuous families; the halved total-variation crossing
    form for discrete families (categorical included).
    """
    _check_same_family(theta1, theta2)
    if is_continuous(theta1):
        return 0.5 * wasserstein1(theta1, theta2)
    return tv_distance(theta1, theta2)


def secret_range(theta1, theta2, secret):
    """Absolute secret difference |g(theta1) - g(theta2)|."""
    _check_same_family(theta1, theta2)
    return abs(secret_value(theta1, secret) - secret_value(theta2, secret))


def _as_samples(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise FitError("dataset must be a non-empty 1-D array of samples")
    if not np.all(np.isfinite(arr)):
        raise FitError("dataset contains non-finite values")
    return arr


def _as_counts(arr, family):
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise FitError(f"{family} fit needs nonnegative integer samples")
    return arr


def fit_params(data, family, *, n_trials=None, n_categories=None):
    """Moment / plug-in parameter estimates from raw samples.

    family is a tag string (see FAMILY_TAGS). Binomial requires n_trials;
    categorical infers the category count from the data unless
    n_categories is given. Degenerate fits raise FitError.
    """
    cls = family_class(family)
    arr = _as_samples(data)
    mean = float(arr.mean())

    if cls is Gaussian:
        if arr.size < 2:
            raise FitError("gaussian fit needs at least 2 samples")
        sigma = float(arr.std(ddof=1))
        if sigma <= 0:
            raise FitError("gaussian fit degenerate: zero sample std")
        return Gaussian(mu=mean, sigma=sigma)
    if cls is Uniform:
        lo = float(arr.min())
        hi = float(arr.max())
        if lo >= hi:
            raise FitError("uniform fit degenerate: min equals max")
        return Uniform(m=lo, n=hi)
    if cls is Exponential:
        if np.any(arr < 0):
            raise FitError("exponential fit needs nonnegative samples")
        if mean <= 0:
            raise FitError("exponential fit degenerate: zero mean")
        return Exponential(lam=mean)
    if cls is ShiftedExponential:
        h = float(arr.min())
        lam = mean - h
        if lam <= 0:
            raise FitError("shifted_exponential fit degenerate: zero spread")
        return ShiftedExponential(lam=lam, h=h)
    if cls is Geometric:
        _as_counts(arr, "geometric")
        if mean <= 0:
            raise FitError("geometric fit degenerate: all-zero samples")
        return Geometric(theta=1.0 / (1.0 + mean))
    if cls is Binomial:
        if n_trials is None:
            raise ConfigError("binomial fit needs the n_trials hyperparameter")
        _as_counts(arr, "binomial")
        if np.any(arr > n_trials):
            raise FitError(f"binomial samples exceed n_trials={n_trials}")
        theta = mean / n_trials
        if not 0.0 < theta < 1.0:
            raise FitError(f"binomial fit degenerate: theta={theta}")
        return Binomial(n_trials=int(n_trials), theta=theta)
    if cls is Poisson:
        _as_counts(arr, "poisson")
        if mean <= 0:
            raise FitError("poisson fit degenerate: zero mean")
        return Poisson(theta=mean)
    # categorical
    _as_counts(arr, "categorical")
    c = int(n_categories) if n_categories is not None else int(arr.max()) + 1
    if c < 2:
        raise FitError("categorical fit needs at least 2 categories")
    if np.any(arr >= c):
        raise FitError(f"categorical samples exceed the {c} declared categories")
    counts = np.bincount(arr.astype(np.int64), minlength=c)
    return Categorical(p=tuple(counts / arr.size))


def _open_unit(rng, n):
    # uniforms strictly inside (0, 1) so inverse CDFs stay finite
    return rng.integers(1, 1 << 53, size=n) / float(1 << 53)


def sample(theta, n, rng_seed):
    """Draw n samples, deterministically for a given seed.

    The generator is PCG64 (numpy's default_rng algorithm), fixed across
    the package for reproducibility. Continuous families sample by inverse
    CDF; integer families use numpy's native samplers.
    """
    if n < 1:
        raise ConfigError(f"sample count must be at least 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    if isinstance(theta, Gaussian):
        u = _open_unit(rng, n)
        return theta.mu + theta.sigma * _normal_quantile_ndarray(u)
    if isinstance(theta, Uniform):
        return theta.m + theta.width * _open_unit(rng, n)
    if isinstance(theta, Exponential):
        return -theta.lam * np.log1p(-_open_unit(rng, n))
    if isinstance(theta, ShiftedExponential):
        return theta.h - theta.lam * np.log1p(-_open_unit(rng, n))
    if isinstance(theta, Geometric):
        # numpy's geometric counts trials (support starts at 1)
        return rng.geometric(theta.theta, size=n).astype(np.int64) - 1
    if isinstance(theta, Binomial):
        return rng.binomial(theta.n_trials, theta.theta, size=n).astype(np.int64)
    if isinstance(theta, Poisson):
        return rng.poisson(theta.theta, size=n).astype(np.int64)
    if isinstance(theta, Categorical):
        return rng.choice(theta.n_categories, size=n, p=np.asarray(theta.p)).astype(
            np.int64
        )
    raise ConfigError(f"unsupported parameter type {type(theta).__name__}")
