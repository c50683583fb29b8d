"""Release mechanisms: parameter quantizers, the dataset wrapper, baselines.

The quantization mechanisms are deterministic maps from a parameter vector
to the representative of its bin. Single-coordinate secrets quantize that
coordinate directly; two-parameter families use diagonal bins, sliding the
orthogonal coordinate by a slope constant t0 chosen to minimize the ratio
of distribution distance to secret movement. Grid-synthesized mechanisms
(integer families) carry an explicit bin table built by the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from statpriv.errors import ConfigError, DomainError, UnsupportedError
from statpriv.model import (
    Binomial,
    Categorical,
    Exponential,
    Gaussian,
    Geometric,
    Poisson,
    Secret,
    ShiftedExponential,
    Uniform,
    UniformBox,
    UniformSimplex,
    family_class,
    fit_params,
)
from statpriv.specialfn import (
    MINUS_ONE_BRANCH,
    PRINCIPAL_BRANCH,
    lambert_w,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)

SEXP_STD_SLOPE = math.log(2.0)
GAUSSIAN_STD_SLOPE = 0.0
UNIFORM_STD_SLOPE = 1.0

_DIVIDES_TOL = 1e-9


def slope_shifted_exponential_quantile(alpha):
    """Diagonal slope t0 for the shifted-exponential quantile mechanism.

    With z = -ln(1-alpha) - 1, the stationarity condition of the
    distance-to-secret ratio solves to t0 = z - W(z e^z / 2), taking the
    lower Lambert branch left of alpha = 1 - 1/e and the principal branch
    at or right of it. t0 is 0 exactly at the branch point and grows to
    -1 - W_minus1(-1/(2e)) ~ 1.678 as alpha -> 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"quantile level must be in (0, 1), got {alpha}")
    z = -math.log1p(-alpha) - 1.0
    if abs(z) < 1e-12:
        # within rounding of the branch point the slope is z/2 + O(z^2)
        return 0.0
    branch = MINUS_ONE_BRANCH if z < 0 else PRINCIPAL_BRANCH
    return z - lambert_w(0.5 * z * math.exp(z), branch)


def slope_gaussian_quantile(alpha):
    """Diagonal slope t0 for the Gaussian quantile mechanism (numeric).

    Minimizes n(t)/|t + Q_alpha| with n(t) = pdf(t) + t*(cdf(t) - 1/2).
    The objective has a pole at t = -Q_alpha and flattens to 1/2 far from
    it, so the search stays on the branch containing the stationary point,
    where the derivative numerator g(t) = Q_alpha*(cdf(t) - 1/2) - pdf(t)
    is strictly increasing; the root is found by bisection to machine
    precision. Anti-symmetric in alpha around 1/2.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"quantile level must be in (0, 1), got {alpha}")
    if alpha == 0.5:
        raise ConfigError(
            "gaussian quantile at level 0.5 equals the mean; "
            "use the mean mechanism instead"
        )
    if alpha < 0.5:
        return -slope_gaussian_quantile(1.0 - alpha)
    q = std_normal_quantile(alpha)

    def g(t):
        return q * (std_normal_cdf(t) - 0.5) - std_normal_pdf(t)

    lo, hi = 0.0, 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 64.0:
            raise DomainError(f"no stationary slope found for alpha={alpha}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def slope_uniform_quantile(alpha):
    """Diagonal slope t0 = l/(1-l) for the uniform quantile mechanism.

    l = alpha + sqrt(alpha^2 - alpha + 1/2) below alpha = 1/2 and
    alpha - sqrt(...) at or above it; both give t0 >= 0 and the slope
    vanishes exactly at alpha = 1/2.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"quantile level must be in (0, 1), got {alpha}")
    root = math.sqrt(alpha * alpha - alpha + 0.5)
    level = alpha + root if alpha < 0.5 else alpha - root
    return level / (1.0 - level)


def _quantize(value, lo, s, count):
    """Bin index, bin midpoint, and within-bin offset for one coordinate.

    Bins are [lo+i*s, lo+(i+1)*s), left-closed; when count is known the
    final bin also takes its upper endpoint. Offsets within a relative
    1e-9 of the midpoint snap to zero so that released values re-release
    bitwise unchanged even for derived coordinates (the uniform width is
    n - m, which rounds).
    """
    i = int(math.floor((value - lo) / s))
    if i < 0:
        i = 0
    if count is not None and i >= count:
        i = count - 1
    mid = lo + (i + 0.5) * s
    offset = value - mid
    if abs(offset) <= 1e-9 * s:
        offset = 0.0
    return i, mid, offset


def _count_for(box, coord, s):
    width = box.width(coord)
    count = round(width / s)
    if count < 1 or abs(count * s - width) > _DIVIDES_TOL * max(1.0, width):
        raise ConfigError(
            f"bin size {s} does not divide the {coord!r} range {width}"
        )
    return count

_COORD_GETTERS = {
    "gaussian": {"mu": lambda t: t.mu, "sigma": lambda t: t.sigma},
    "uniform": {
        "m": lambda t: t.m,
        "n": lambda t: t.n,
        "mid": lambda t: t.mid,
        "width": lambda t: t.width,
    },
    "exponential": {"lam": lambda t: t.lam},
    "shifted_exponential": {"lam": lambda t: t.lam, "h": lambda t: t.h},
    "geometric": {"theta": lambda t: t.theta},
    "binomial": {"theta": lambda t: t.theta},
    "poisson": {"theta": lambda t: t.theta},
}


def _check_quantized_range(theta, coord, box):
    """Enforce the quantized coordinate only.

    Diagonal mechanisms legitimately release orthogonal coordinates just
    outside the prior box near its edges (this leak is a term in the
    privacy bound), and released values must re-release unchanged, so the
    orthogonal coordinates pass through unchecked.
    """
    lo, hi = box.interval(coord)
    value = _COORD_GETTERS[theta.family][coord](theta)
    if not lo <= value <= hi:
        raise DomainError(
            f"{theta.family} {coord}={value} outside the prior box [{lo}, {hi}]"
        )


def _release_location(theta, lo, s, count):
    if isinstance(theta, Gaussian):
        value = theta.mu
    elif isinstance(theta, Uniform):
        value = theta.mid
    elif isinstance(theta, ShiftedExponential):
        value = theta.h
    else:
        raise ConfigError(
            f"{theta.family} has no location coordinate for the mean mechanism"
        )
    if value < lo:
        raise DomainError(f"location {value} below the bin range start {lo}")
    _, mid, _ = _quantize(value, lo, s, count)
    if isinstance(theta, Gaussian):
        return Gaussian(mu=mid, sigma=theta.sigma)
    if isinstance(theta, Uniform):
        half = 0.5 * theta.width
        return Uniform(m=mid - half, n=mid + half)
    return ShiftedExponential(lam=theta.lam, h=mid)


def _release_exp_lambda(theta, lo, s, count):
    if theta.lam < lo:
        raise DomainError(f"lam={theta.lam} below the bin range start {lo}")
    _, mid, _ = _quantize(theta.lam, lo, s, count)
    return Exponential(lam=mid)


def _release_sexp_diag(theta, lo, s, count, t0):
    if theta.lam < lo:
        raise DomainError(f"lam={theta.lam} below the bin range start {lo}")
    _, mid, t = _quantize(theta.lam, lo, s, count)
    return ShiftedExponential(lam=mid, h=theta.h + t0 * t)


def _release_gaussian_diag(theta, lo, s, count, t0):
    if theta.sigma < lo:
        raise DomainError(f"sigma={theta.sigma} below the bin range start {lo}")
    _, mid, t = _quantize(theta.sigma, lo, s, count)
    return Gaussian(mu=theta.mu - t0 * t, sigma=mid)


def _release_uniform_diag(theta, lo, s, count, t0):
    width = theta.width
    if width < lo:
        raise DomainError(f"width={width} below the bin range start {lo}")
    _, mid, offset = _quantize(width, lo, s, count)
    t = offset / (1.0 + t0)
    m_new = theta.m + t0 * t
    return Uniform(m=m_new, n=m_new + mid)


def release_mean_continuous(theta, mu_lo, s):
    """Quantize the location coordinate to its bin midpoint.

    Gaussian quantizes mu, uniform its midpoint, shifted exponential the
    shift h; every other parameter passes through unchanged.
    """
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    return _release_location(theta, mu_lo, s, None)


def release_quantile_exponential(theta, lambda_lo, s):
    """Quantize lam to its bin midpoint (the quantile scales with lam)."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Exponential):
        raise ConfigError(f"expected exponential parameters, got {theta.family}")
    return _release_exp_lambda(theta, lambda_lo, s, None)


def release_quantile_shifted_exponential(theta, lambda_lo, s, alpha):
    """Quantize lam and slide h along the diagonal by t0 * offset."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, ShiftedExponential):
        raise ConfigError(
            f"expected shifted_exponential parameters, got {theta.family}"
        )
    t0 = slope_shifted_exponential_quantile(alpha)
    return _release_sexp_diag(theta, lambda_lo, s, None, t0)


def release_quantile_gaussian(theta, box, s, alpha):
    """Quantize sigma and counter-shift mu by the quantile slope."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Gaussian):
        raise ConfigError(f"expected gaussian parameters, got {theta.family}")
    _check_quantized_range(theta, "sigma", box)
    lo, _ = box.interval("sigma")
    count = _count_for(box, "sigma", s)
    return _release_gaussian_diag(theta, lo, s, count, slope_gaussian_quantile(alpha))


def release_std_gaussian(theta, box, s):
    """Quantize sigma; mu is untouched (the std slope is exactly zero)."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Gaussian):
        raise ConfigError(f"expected gaussian parameters, got {theta.family}")
    _check_quantized_range(theta, "sigma", box)
    lo, _ = box.interval("sigma")
    count = _count_for(box, "sigma", s)
    return _release_gaussian_diag(theta, lo, s, count, GAUSSIAN_STD_SLOPE)


def release_quantile_uniform(theta, box, s, alpha):
    """Quantize the width and slide the left endpoint by the quantile slope."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Uniform):
        raise ConfigError(f"expected uniform parameters, got {theta.family}")
    _check_quantized_range(theta, "width", box)
    lo, _ = box.interval("width")
    count = _count_for(box, "width", s)
    return _release_uniform_diag(theta, lo, s, count, slope_uniform_quantile(alpha))


def release_std_uniform(theta, box, s):
    """Quantize the width along unit-slope diagonal bands."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Uniform):
        raise ConfigError(f"expected uniform parameters, got {theta.family}")
    _check_quantized_range(theta, "width", box)
    lo, _ = box.interval("width")
    count = _count_for(box, "width", s)
    return _release_uniform_diag(theta, lo, s, count, UNIFORM_STD_SLOPE)


def release_std_exponential(theta, box, s):
    """Std of the exponential is lam itself, so this is the lam quantizer."""
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, Exponential):
        raise ConfigError(f"expected exponential parameters, got {theta.family}")
    _check_quantized_range(theta, "lam", box)
    lo, _ = box.interval("lam")
    count = _count_for(box, "lam", s)
    return _release_exp_lambda(theta, lo, s, count)


def release_std_shifted_exponential(theta, box, s):
    """Quantize lam and slide h by ln2 per unit of within-bin offset.

    ln2 minimizes the W1 cost of the lam move: over slopes c the per-unit
    distance is c + 2e^{-c} - 1, stationary at c = ln2, giving the bin
    supremum s*ln2/2.
    """
    if s <= 0:
        raise ConfigError(f"bin size must be positive, got {s}")
    if not isinstance(theta, ShiftedExponential):
        raise ConfigError(
            f"expected shifted_exponential parameters, got {theta.family}"
        )
    _check_quantized_range(theta, "lam", box)
    lo, _ = box.interval("lam")
    count = _count_for(box, "lam", s)
    return _release_sexp_diag(theta, lo, s, count, SEXP_STD_SLOPE)


def release_fraction_categorical(p, j, s):
    """Quantize p_j to a bin midpoint and rebalance the other coordinates.

    The moved mass t is spread evenly over the other C-1 coordinates; if
    that drives any of them negative, the most negative value T is added
    back to each and p_j absorbs (C-1)*T, keeping the simplex exact. The
    map stays idempotent under the correction because a released vector
    reproduces the same T.
    """
    if not isinstance(p, Categorical):
        raise ConfigError(f"expected categorical parameters, got {p.family}")
    c = p.n_categories
    if not 0 <= j < c:
        raise ConfigError(f"fraction index {j} out of range for C={c}")
    if s <= 0 or s > 1:
        raise ConfigError(f"bin size must be in (0, 1], got {s}")
    count = round(1.0 / s)
    if abs(count * s - 1.0) > _DIVIDES_TOL:
        raise ConfigError(f"bin size {s} does not divide the unit interval")
    i, mid, t = _quantize(p.p[j], 0.0, s, count)
    spread = t / (c - 1)
    released = [v + spread for v in p.p]
    released[j] = mid
    floor_shift = min(min(v for k, v in enumerate(released) if k != j), 0.0)
    out = [v - floor_shift for v in released]
    out[j] = released[j] + (c - 1) * floor_shift
    return Categorical(p=tuple(out))


@dataclass(frozen=True)
class TableBin:
    """One synthesized bin: parameter interval [lo, hi) and its released value."""

    lo: float
    hi: float
    released: object

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"table bin needs lo < hi, got [{self.lo}, {self.hi}]")


_CLOSED_FORM_ROUTES = {
    ("gaussian", "mean"): "mu",
    ("uniform", "mean"): "mid",
    ("shifted_exponential", "mean"): "h",
    ("exponential", "mean"): "lam",
    ("exponential", "quantile"): "lam",
    ("shifted_exponential", "quantile"): "lam",
    ("gaussian", "quantile"): "sigma",
    ("uniform", "quantile"): "width",
    ("gaussian", "std"): "sigma",
    ("uniform", "std"): "width",
    ("exponential", "std"): "lam",
    ("shifted_exponential", "std"): "lam",
}


@dataclass(frozen=True)
class QuantizationMechanism:
    """A deterministic parameter-release mechanism.

    Closed-form mechanisms need a UniformBox prior naming the quantized
    coordinate and an integer bin_count (so the bin size divides the range
    exactly). The categorical fraction mechanism takes a UniformSimplex
    prior and bins the unit interval. Integer-family mechanisms are built
    by the optimizer and carry an explicit bin table instead.
    """

    family: str
    secret: Secret
    prior: object
    bin_count: int = None
    table: tuple = None
    n_trials: int = None

    def __post_init__(self):
        cls = family_class(self.family)
        object.__setattr__(self, "family", cls.family)
        if (self.bin_count is None) == (self.table is None):
            raise ConfigError(
                "mechanism needs exactly one of bin_count (closed form) "
                "or table (grid synthesized)"
            )
        if cls is Binomial:
            if not isinstance(self.n_trials, (int, np.integer)) or self.n_trials < 1:
                raise ConfigError("binomial mechanism needs a positive n_trials")
        elif self.n_trials is not None:
            raise ConfigError(f"n_trials does not apply to {self.family}")

        if self.table is not None:
            if self.family not in _SCALAR_PARAM_COORD:
                raise ConfigError(
                    "bin tables apply to single-scalar-parameter families; "
                    f"{self.family} is not one"
                )
            rows = tuple(self.table)
            if not rows:
                raise ConfigError("bin table must not be empty")
            for row in rows:
                if not isinstance(row, TableBin):
                    raise ConfigError("table rows must be TableBin instances")
                if not isinstance(row.released, cls):
                    raise ConfigError(
                        f"table released values must be {self.family} parameters"
                    )
            for left, right in zip(rows, rows[1:]):
                if abs(left.hi - right.lo) > 1e-9:
                    raise ConfigError("table bins must tile the range contiguously")
            object.__setattr__(self, "table", rows)
            if not isinstance(self.prior, UniformBox):
                raise ConfigError("table mechanisms need a UniformBox prior")
            self.prior.interval(_SCALAR_PARAM_COORD[self.family])
            return

        if self.bin_count < 1:
            raise ConfigError(f"bin_count must be >= 1, got {self.bin_count}")
        if cls is Categorical:
            if self.secret.kind != "fraction":
                raise ConfigError("categorical mechanisms protect fraction secrets")
            if not isinstance(self.prior, UniformSimplex):
                raise ConfigError("categorical mechanism needs a UniformSimplex prior")
            if self.secret.j >= self.prior.c:
                raise ConfigError(
                    f"fraction index {self.secret.j} out of range for C={self.prior.c}"
                )
            return
        if is_ordinal_tag(self.family):
            raise UnsupportedError(
                f"{self.family} mechanisms have no closed form; synthesize a "
                "bin table with the optimizer"
            )
        route = (self.family, self.secret.kind)
        if route not in _CLOSED_FORM_ROUTES:
            raise ConfigError(
                f"no mechanism for family {self.family} with secret "
                f"{self.secret.kind}"
            )
        if self.family == "gaussian" and self.secret.kind == "quantile":
            if self.secret.alpha == 0.5:
                raise ConfigError(
                    "gaussian quantile at level 0.5 equals the mean; "
                    "use the mean mechanism instead"
                )
        if not isinstance(self.prior, UniformBox):
            raise ConfigError("closed-form mechanisms need a UniformBox prior")
        # fail fast if the quantized coordinate interval is missing
        self.prior.interval(self.quantized_param)

    @property
    def quantized_param(self):
        if self.table is not None or is_ordinal_tag(self.family):
            return _SCALAR_PARAM_COORD[self.family]
        if self.family == "categorical":
            return "fraction"
        return _CLOSED_FORM_ROUTES[(self.family, self.secret.kind)]

    @property
    def bin_size(self):
        if self.table is not None:
            raise ConfigError("grid-synthesized mechanisms have per-bin widths")
        if self.family == "categorical":
            return 1.0 / self.bin_count
        lo, hi = self.prior.interval(self.quantized_param)
        return (hi - lo) / self.bin_count

    @property
    def t0(self):
        """Slope of the diagonal bins; 0 for single-coordinate mechanisms."""
        if self.table is not None or self.family == "categorical":
            return 0.0
        kind = self.secret.kind
        if kind == "quantile":
            if self.family == "shifted_exponential":
                return slope_shifted_exponential_quantile(self.secret.alpha)
            if self.family == "gaussian":
                return slope_gaussian_quantile(self.secret.alpha)
            if self.family == "uniform":
                return slope_uniform_quantile(self.secret.alpha)
            return 0.0
        if kind == "std":
            if self.family == "shifted_exponential":
                return SEXP_STD_SLOPE
            if self.family == "uniform":
                return UNIFORM_STD_SLOPE
        return 0.0

    def release(self, theta):
        """Map a parameter vector to its bin representative."""
        cls = family_class(self.family)
        if not isinstance(theta, cls):
            raise ConfigError(
                f"mechanism for {self.family} got {type(theta).__name__} parameters"
            )
        if self.table is not None:
            return self._release_from_table(theta)
        if self.family == "categorical":
            if theta.n_categories != self.prior.c:
                raise ConfigError(
                    f"expected C={self.prior.c} categories, got {theta.n_categories}"
                )
            return release_fraction_categorical(theta, self.secret.j, self.bin_size)
        s = self.bin_size
        coord = self.quantized_param
        _check_quantized_range(theta, coord, self.prior)
        lo, _ = self.prior.interval(coord)
        count = self.bin_count
        kind = self.secret.kind
        if kind == "mean":
            if self.family == "exponential":
                return _release_exp_lambda(theta, lo, s, count)
            return _release_location(theta, lo, s, count)
        if self.family == "exponential":
            return _release_exp_lambda(theta, lo, s, count)
        if self.family == "shifted_exponential":
            return _release_sexp_diag(theta, lo, s, count, self.t0)
        if self.family == "gaussian":
            return _release_gaussian_diag(theta, lo, s, count, self.t0)
        return _release_uniform_diag(theta, lo, s, count, self.t0)

    def _release_from_table(self, theta):
        value = theta.lam if isinstance(theta, Exponential) else theta.theta
        rows = self.table
        if value < rows[0].lo or value > rows[-1].hi:
            raise DomainError(
                f"theta={value} outside the synthesized range "
                f"[{rows[0].lo}, {rows[-1].hi}]"
            )
        lo_idx, hi_idx = 0, len(rows) - 1
        while lo_idx < hi_idx:
            mid = (lo_idx + hi_idx) // 2
            if value < rows[mid].hi:
                hi_idx = mid
            else:
                lo_idx = mid + 1
        return rows[lo_idx].released

    def to_json_dict(self):
        doc = {
            "family": self.family,
            "secret": _secret_to_dict(self.secret),
            "prior": _prior_to_dict(self.prior),
        }
        if self.bin_count is not None:
            doc["bin_count"] = int(self.bin_count)
        if self.n_trials is not None:
            doc["n_trials"] = int(self.n_trials)
        if self.table is not None:
            doc["table"] = [
                {
                    "lo": row.lo,
                    "hi": row.hi,
                    "released": params_to_dict(row.released),
                }
                for row in self.table
            ]
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        table = None
        if doc.get("table") is not None:
            table = tuple(
                TableBin(
                    lo=float(row["lo"]),
                    hi=float(row["hi"]),
                    released=params_from_dict(row["released"]),
                )
                for row in doc["table"]
            )
        return cls(
            family=doc["family"],
            secret=_secret_from_dict(doc["secret"]),
            prior=_prior_from_dict(doc["prior"]),
            bin_count=doc.get("bin_count"),
            table=table,
            n_trials=doc.get("n_trials"),
        )


def is_ordinal_tag(tag):
    return tag in ("geometric", "binomial", "poisson")


# families whose whole parameter is one scalar, and that scalar's box key;
# these are the families the optimizer can synthesize bin tables for
_SCALAR_PARAM_COORD = {
    "exponential": "lam",
    "geometric": "theta",
    "binomial": "theta",
    "poisson": "theta",
}


def _secret_to_dict(secret):
    doc = {"kind": secret.kind}
    if secret.alpha is not None:
        doc["alpha"] = secret.alpha
    if secret.j is not None:
        doc["j"] = secret.j
    return doc


def _secret_from_dict(doc):
    alpha = doc.get("alpha")
    j = doc.get("j")
    return Secret(
        doc["kind"],
        alpha=float(alpha) if alpha is not None else None,
        j=int(j) if j is not None else None,
    )


def _prior_to_dict(prior):
    if isinstance(prior, UniformBox):
        return {
            "type": "box",
            "intervals": {k: list(v) for k, v in prior.intervals.items()},
        }
    if isinstance(prior, UniformSimplex):
        return {"type": "simplex", "c": prior.c}
    raise ConfigError(f"cannot serialize prior of type {type(prior).__name__}")


def _prior_from_dict(doc):
    if doc["type"] == "box":
        return UniformBox(
            {k: (float(v[0]), float(v[1])) for k, v in doc["intervals"].items()}
        )
    if doc["type"] == "simplex":
        return UniformSimplex(int(doc["c"]))
    raise ConfigError(f"unknown prior type {doc['type']!r}")


def params_to_dict(theta):
    """FamilyParams -> plain JSON-ready dict."""
    if isinstance(theta, Gaussian):
        return {"family": "gaussian", "mu": theta.mu, "sigma": theta.sigma}
    if isinstance(theta, Uniform):
        return {"family": "uniform", "m": theta.m, "n": theta.n}
    if isinstance(theta, Exponential):
        return {"family": "exponential", "lam": theta.lam}
    if isinstance(theta, ShiftedExponential):
        return {"family": "shifted_exponential", "lam": theta.lam, "h": theta.h}
    if isinstance(theta, Geometric):
        return {"family": "geometric", "theta": theta.theta}
    if isinstance(theta, Binomial):
        return {
            "family": "binomial",
            "n_trials": theta.n_trials,
            "theta": theta.theta,
        }
    if isinstance(theta, Poisson):
        return {"family": "poisson", "theta": theta.theta}
    if isinstance(theta, Categorical):
        return {"family": "categorical", "p": list(theta.p)}
    raise ConfigError(f"cannot serialize parameters of type {type(theta).__name__}")


def params_from_dict(doc):
    """Inverse of params_to_dict."""
    cls = family_class(doc["family"])
    fields = {k: v for k, v in doc.items() if k != "family"}
    if cls is Categorical:
        return Categorical(p=tuple(fields["p"]))
    if cls is Binomial:
        return Binomial(n_trials=int(fields["n_trials"]), theta=float(fields["theta"]))
    return cls(**{k: float(v) for k, v in fields.items()})


@dataclass(frozen=True)
class BaselineMechanism:
    """Randomized baselines: noised-histogram resampling and additive noise.

    kind "dp_histogram" bins the data range into bin_count cells, adds
    Laplace(scale=beta) noise to the counts, clamps at zero, normalizes,
    and resamples n bin midpoints. "ap_gaussian" adds Gaussian(0, beta^2)
    per sample; "distp_laplace" adds Laplace(scale=beta) per sample.
    beta = 0 makes the additive variants the identity.
    """

    kind: str
    beta: float
    bin_count: int = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("dp_histogram", "ap_gaussian", "distp_laplace"):
            raise ConfigError(f"unknown baseline kind {self.kind!r}")
        if self.beta < 0:
            raise ConfigError(f"noise scale must be >= 0, got {self.beta}")
        if self.kind == "dp_histogram":
            if not isinstance(self.bin_count, (int, np.integer)) or self.bin_count < 1:
                raise ConfigError("dp_histogram needs bin_count >= 1")
        elif self.bin_count is not None:
            raise ConfigError(f"bin_count does not apply to {self.kind}")


def release_baseline(data, baseline):
    """Apply a baseline mechanism to raw samples, deterministically per seed."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError("baseline release needs a non-empty 1-D dataset")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("baseline release needs finite samples")
    rng = np.random.Generator(np.random.PCG64(baseline.rng_seed))
    n = arr.size
    if baseline.kind == "ap_gaussian":
        if baseline.beta == 0.0:
            return arr.copy()
        return arr + rng.normal(0.0, baseline.beta, size=n)
    if baseline.kind == "distp_laplace":
        if baseline.beta == 0.0:
            return arr.copy()
        return arr + rng.laplace(0.0, baseline.beta, size=n)
    # dp_histogram
    lo = float(arr.min())
    hi = float(arr.max())
    m = baseline.bin_count
    if lo == hi:
        return np.full(n, lo)
    counts, edges = np.histogram(arr, bins=m, range=(lo, hi))
    noised = counts.astype(float)
    if baseline.beta > 0.0:
        noised = noised + rng.laplace(0.0, baseline.beta, size=m)
    noised = np.maximum(noised, 0.0)
    total = noised.sum()
    if total <= 0.0:
        # every count wiped out by noise: fall back to a flat histogram
        weights = np.full(m, 1.0 / m)
    else:
        weights = noised / total
    mids = 0.5 * (edges[:-1] + edges[1:])
    return rng.choice(mids, size=n, p=weights)


def _ordinal_quantile_resample(theta, n):
    """Deterministic inverse-CDF resample at levels (k + 1/2)/n, ascending."""
    levels = (np.arange(n) + 0.5) / n
    if isinstance(theta, Geometric):
        # F(k) = 1 - (1-theta)^(k+1)
        ks = np.ceil(np.log1p(-levels) / math.log1p(-theta.theta)) - 1.0
        return np.maximum(ks, 0.0).astype(np.int64)
    if isinstance(theta, Binomial):
        top = theta.n_trials
        pmf = theta.theta / (1.0 - theta.theta)
        prob = (1.0 - theta.theta) ** top
    else:
        top = None
        pmf = theta.theta
        prob = math.exp(-theta.theta)
    out = np.empty(n, dtype=np.int64)
    k = 0
    cdf = prob
    for idx, u in enumerate(levels):
        while cdf < u and (top is None or k < top):
            k += 1
            if isinstance(theta, Binomial):
                prob *= pmf * (theta.n_trials - k + 1) / k
            else:
                prob *= pmf / k
            cdf += prob
        out[idx] = k
    return out


def _categorical_resample(arr, target, c):
    """Reassign just enough samples to hit the target category counts."""
    counts = np.bincount(arr.astype(np.int64), minlength=c)
    out = arr.astype(np.int64).copy()
    deltas = target - counts
    givers = [k for k in range(c) if deltas[k] < 0]
    takers = [k for k in range(c) if deltas[k] > 0]
    donor_positions = []
    for k in givers:
        positions = np.flatnonzero(out == k)[: -deltas[k]]
        donor_positions.extend(positions.tolist())
    donor_positions.sort()
    cursor = 0
    for k in takers:
        for _ in range(deltas[k]):
            out[donor_positions[cursor]] = k
            cursor += 1
    return out


def _largest_remainder_counts(fractions, n):
    raw = np.asarray(fractions) * n
    base = np.floor(raw).astype(np.int64)
    short = n - int(base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def release_dataset(data, mechanism):
    """Release a dataset so its fitted parameters equal the released ones.

    Continuous families transform samples affinely (pure shift for
    location secrets, rescale about the location estimate for scale
    secrets), which maps the moment estimators exactly. Categorical
    reassigns the minimal number of samples to the rounded target counts.
    Integer families resample deterministically from the released
    distribution's quantiles.
    """
    fit_kwargs = {}
    if mechanism.family == "binomial":
        fit_kwargs["n_trials"] = mechanism.n_trials
    if mechanism.family == "categorical":
        fit_kwargs["n_categories"] = mechanism.prior.c
    fitted = fit_params(data, mechanism.family, **fit_kwargs)
    released = mechanism.release(fitted)
    arr = np.asarray(data, dtype=float)

    if isinstance(released, Gaussian):
        scale = released.sigma / fitted.sigma
        return released.mu + (arr - fitted.mu) * scale
    if isinstance(released, Uniform):
        scale = released.width / fitted.width
        return released.m + (arr - fitted.m) * scale
    if isinstance(released, Exponential):
        return arr * (released.lam / fitted.lam)
    if isinstance(released, ShiftedExponential):
        scale = released.lam / fitted.lam
        return released.h + (arr - fitted.h) * scale
    if isinstance(released, Categorical):
        target = _largest_remainder_counts(released.p, arr.size)
        return _categorical_resample(arr, target, released.n_categories)
    return _ordinal_quantile_resample(released, arr.size)
