"""Command-line harness around the release mechanisms and their evaluation.

Five subcommands cover the workflow end to end: ``synth`` writes
deterministic sample datasets, ``release`` pushes one dataset through a
quantization mechanism, ``sweep`` grids mechanisms against a dataset and
writes a tradeoff CSV (plus an optional SVG scatter), ``bound`` tabulates
the two tradeoff lower bounds, and ``optimize`` runs the bin-table
synthesizers on a grid problem.

Config files are JSON objects holding the same keys as the command flags;
a flag given on the command line overrides the config value. Exit codes:
0 success, 2 usage, 3 config/domain/unsupported errors, 4 infeasible
synthesis ("no answer"). The STATPRIV_THREADS environment variable caps
the sweep worker pool.
"""

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from statpriv.analysis import (
    distortion_lower_bound,
    gamma,
    privacy_lower_bound,
    surrogate_distortion,
    surrogate_privacy,
)
from statpriv.errors import (
    ConfigError,
    DomainError,
    FitError,
    InfeasibleError,
    UnsupportedError,
)
from statpriv.mechanisms import (
    BaselineMechanism,
    QuantizationMechanism,
    params_from_dict,
    params_to_dict,
    release_baseline,
    release_dataset,
)
from statpriv.model import (
    Exponential,
    Gaussian,
    Secret,
    UniformBox,
    UniformSimplex,
    fit_params,
    sample,
)
from statpriv.optimizer import (
    GridProblem,
    binary_search_mechanism,
    dp_optimize,
    greedy_optimize,
)

_DOMAIN_ERRORS = (ConfigError, DomainError, FitError, UnsupportedError)
_SEED_MASK = (1 << 63) - 1
_PRESETS = ("pageviews", "traffic")


def _wrap_errors(fn):
    """Map library errors onto the documented exit codes (3 and 4)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InfeasibleError as exc:
            click.echo(f"error: no answer: {exc}", err=True)
            raise SystemExit(4) from exc
        except _DOMAIN_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(3) from exc

    return wrapper


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def _merged(config, **flags):
    """Config-file values overridden by any flag that was actually given."""
    merged = dict(config)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _need(cfg, key):
    if cfg.get(key) is None:
        raise ConfigError(f"missing required setting {key!r} (flag or config file)")
    return cfg[key]


def _json_value(label, text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{label} is not valid JSON: {exc}") from exc


def _parse_secret(value):
    """Accept NAME[:arg] strings and {"kind": ...} documents."""
    if isinstance(value, Secret):
        return value
    if isinstance(value, dict):
        return Secret(
            kind=value.get("kind"), alpha=value.get("alpha"), j=value.get("j")
        )
    name, _, arg = str(value).partition(":")
    name = name.strip().lower()
    try:
        if name == "quantile":
            if not arg:
                raise ConfigError("quantile secret needs a level, e.g. quantile:0.95")
            return Secret(kind="quantile", alpha=float(arg))
        if name == "fraction":
            if not arg:
                raise ConfigError("fraction secret needs a bin index, e.g. fraction:2")
            return Secret(kind="fraction", j=int(arg))
    except ValueError:
        raise ConfigError(f"secret argument {arg!r} is not a number") from None
    if arg:
        raise ConfigError(f"secret {name!r} takes no argument")
    return Secret(kind=name)


def _parse_prior(value):
    """Prior document (or JSON string) -> UniformBox or UniformSimplex."""
    if isinstance(value, (UniformBox, UniformSimplex)):
        return value
    if isinstance(value, str):
        value = _json_value("prior", value)
    if not isinstance(value, dict):
        raise ConfigError(f"prior must be a JSON object, got {value!r}")
    doc = dict(value)
    kind = doc.pop("type", "box")
    if kind == "simplex":
        if "c" not in doc:
            raise ConfigError("simplex prior needs a category count 'c'")
        return UniformSimplex(int(doc["c"]))
    if kind != "box":
        raise ConfigError(f"unknown prior type {kind!r}; expected 'box' or 'simplex'")
    intervals = doc.get("intervals", doc)
    if not intervals:
        raise ConfigError("box prior needs at least one coordinate interval")
    try:
        pairs = {k: (float(lo), float(hi)) for k, (lo, hi) in intervals.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"box intervals must map names to [lo, hi]: {exc}") from exc
    return UniformBox(pairs)


def _read_dataset(path):
    """Single numeric column, optional header, UTF-8, LF or CRLF line ends."""
    try:
        fh = open(path, encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    values = []
    with fh:
        for index, record in enumerate(csv.reader(fh)):
            if not record or not record[0].strip():
                continue
            if len(record) != 1:
                raise ConfigError(
                    f"{path}:{index + 1}: expected a single column, got {len(record)}"
                )
            text = record[0].strip()
            try:
                value = float(text)
            except ValueError:
                if index == 0:
                    continue  # header row
                raise ConfigError(
                    f"{path}:{index + 1}: {text!r} is not a number"
                ) from None
            if not math.isfinite(value):
                raise ConfigError(f"{path}:{index + 1}: values must be finite")
            values.append(value)
    if not values:
        raise ConfigError(f"{path} holds no numeric rows")
    return np.asarray(values, dtype=float)


def _fmt(value):
    return format(float(value), ".12g")


def _write_dataset(path, data):
    arr = np.asarray(data)
    integral = np.issubdtype(arr.dtype, np.integer)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value"])
        for item in arr:
            writer.writerow([str(int(item)) if integral else _fmt(item)])


def _write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _echo_json(doc, quiet):
    if not quiet:
        click.echo(json.dumps(doc, sort_keys=True))


def _mech_fit_kwargs(mechanism):
    """The same fit arguments release_dataset derives from the mechanism."""
    kwargs = {}
    if mechanism.family == "binomial":
        kwargs["n_trials"] = mechanism.n_trials
    if mechanism.family == "categorical":
        kwargs["n_categories"] = mechanism.prior.c
    return kwargs


def _synthesize(family, params, preset, count, seed):
    """Deterministic synthetic dataset from a preset or an explicit family."""
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ConfigError(f"sample count must be an integer >= 1, got {count!r}")
    if preset is not None:
        if family is not None or params:
            raise ConfigError("give either a preset or a family with params, not both")
        if preset == "pageviews":
            # exponentiated gaussian: a lognormal-like page-view proxy
            return np.exp(sample(Gaussian(mu=1.6, sigma=0.5), count, seed))
        if preset == "traffic":
            # exponentiated exponential: a one-sided heavy-tail traffic proxy
            return np.exp(sample(Exponential(lam=0.7), count, seed))
        raise ConfigError(f"unknown preset {preset!r}; expected one of {_PRESETS}")
    if family is None:
        raise ConfigError("synthesis needs a preset or a family with params")
    doc = {"family": family}
    doc.update(params or {})
    try:
        theta = params_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad params for family {family!r}: {exc}") from exc
    return sample(theta, count, seed)


@click.group()
def main():
    """Quantization release mechanisms and their privacy/distortion tooling."""


# --------------------------------------------------------------------------
# synth


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file; flags override its keys.")
@click.option("--family", default=None, help="Family tag to sample from (with --params).")
@click.option("--params", default=None, help='Family parameters as JSON, e.g. \'{"lam": 2.0}\'.')
@click.option("--preset", default=None, help="Named generator: pageviews or traffic.")
@click.option("-n", "--count", type=int, default=None, help="Sample count (default 1000).")
@click.option("--seed", type=int, default=None, help="RNG seed (default 0).")
@click.option("--out", "out_path", default=None, help="Output CSV path.")
@click.option("--secret", default=None, help="Accepted for config symmetry; synth ignores it.")
@click.option("--epsilon", type=float, default=None, help="Accepted for config symmetry; synth ignores it.")
@click.option("--quiet", is_flag=True, help="Suppress the JSON summary.")
@_wrap_errors
def synth(config_path, family, params, preset, count, seed, out_path, secret, epsilon, quiet):
    """Write a deterministic synthetic dataset CSV."""
    cfg = _merged(
        _load_config(config_path),
        family=family,
        params=params,
        preset=preset,
        n=count,
        seed=seed,
        out=out_path,
    )
    quiet = quiet or bool(cfg.get("quiet"))
    if cfg.get("family") is None and cfg.get("preset") is None:
        raise click.UsageError("synth needs --preset or --family (plus --params)")
    raw_params = cfg.get("params")
    if isinstance(raw_params, str):
        raw_params = _json_value("params", raw_params)
    data = _synthesize(
        cfg.get("family"),
        raw_params,
        cfg.get("preset"),
        int(cfg.get("n", 1000)),
        int(cfg.get("seed", 0)),
    )
    _write_dataset(_need(cfg, "out"), data)
    _echo_json({"n": int(np.asarray(data).size), "out": cfg["out"]}, quiet)


# --------------------------------------------------------------------------
# release


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file; flags override its keys.")
@click.option("--data", "data_path", default=None, help="Input CSV (single numeric column, optional header).")
@click.option("--out", "out_path", default=None, help="Path for the released CSV.")
@click.option("--family", default=None, help="Distribution family tag.")
@click.option("--secret", default=None, help="Secret NAME[:arg], e.g. mean or quantile:0.95.")
@click.option("--prior", default=None, help='Prior JSON: box intervals or {"type": "simplex", "c": N}.')
@click.option("--bins", type=int, default=None, help="Bin count of the quantization mechanism.")
@click.option("--n-trials", "n_trials", type=int, default=None, help="Trial count (binomial family only).")
@click.option("--seed", type=int, default=None, help="Accepted for config symmetry; the release is deterministic.")
@click.option("--epsilon", type=float, default=None, help="Accepted for config symmetry; release ignores it.")
@click.option("--quiet", is_flag=True, help="Suppress the JSON summary.")
@_wrap_errors
def release(config_path, data_path, out_path, family, secret, prior, bins, n_trials, seed, epsilon, quiet):
    """Release one dataset through a quantization mechanism."""
    cfg = _merged(
        _load_config(config_path),
        data=data_path,
        out=out_path,
        family=family,
        secret=secret,
        prior=prior,
        bins=bins,
        n_trials=n_trials,
    )
    quiet = quiet or bool(cfg.get("quiet"))
    data = _read_dataset(_need(cfg, "data"))
    if cfg.get("mechanism") is not None:
        mechanism = QuantizationMechanism.from_json_dict(cfg["mechanism"])
    else:
        mechanism = QuantizationMechanism(
            family=_need(cfg, "family"),
            secret=_parse_secret(_need(cfg, "secret")),
            prior=_parse_prior(_need(cfg, "prior")),
            bin_count=int(_need(cfg, "bins")),
            n_trials=None if cfg.get("n_trials") is None else int(cfg["n_trials"]),
        )
    fitted = fit_params(data, mechanism.family, **_mech_fit_kwargs(mechanism))
    released_params = mechanism.release(fitted)
    released = release_dataset(data, mechanism)
    if np.max(np.abs(released - data)) <= 1e-9 * max(1.0, float(np.max(np.abs(data)))):
        # the transform is a numerical no-op (the fit already sits on the
        # released parameters up to CSV precision); keep the input verbatim
        # so releasing a released file reproduces it byte for byte
        released = data
    _write_dataset(_need(cfg, "out"), released)
    summary = {
        "fitted": params_to_dict(fitted),
        "released": params_to_dict(released_params),
        "surrogate_privacy": float(surrogate_privacy(released, data, mechanism.secret)),
        "surrogate_distortion": float(surrogate_distortion(released, data)),
    }
    _echo_json(summary, quiet)


# --------------------------------------------------------------------------
# bound


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file; flags override its keys.")
@click.option("--family", default=None, help="Distribution family tag.")
@click.option("--secret", default=None, help="Secret NAME[:arg].")
@click.option("--epsilon", type=float, default=None, help="Attacker tolerance in secret units.")
@click.option("--prior", default=None, help="Prior JSON; discrete families need a box with a 'theta' interval.")
@click.option("--budgets", default=None, help="Comma-separated budget grid, e.g. 0.1,0.25,0.5.")
@click.option("--grid", type=int, default=None, help="Numeric-infimum grid resolution (default 64).")
@click.option("--n-trials", "n_trials", type=int, default=None, help="Trial count (binomial family only).")
@click.option("--out", "out_path", default=None, help="Bound table CSV (stdout when omitted).")
@click.option("--seed", type=int, default=None, help="Accepted for config symmetry; bounds are deterministic.")
@click.option("--quiet", is_flag=True, help="Suppress the JSON summary.")
@_wrap_errors
def bound(config_path, family, secret, epsilon, prior, budgets, grid, n_trials, out_path, seed, quiet):
    """Tabulate the distortion and guessing-probability lower bounds.

    Each budget T yields a "privacy" row (distortion forced by capping the
    guessing probability at T, needs T in (0, 1)) and a "distortion" row
    (guessing probability forced by capping distortion at T, needs T > 0).
    """
    cfg = _merged(
        _load_config(config_path),
        family=family,
        secret=secret,
        epsilon=epsilon,
        prior=prior,
        budgets=budgets,
        grid=grid,
        n_trials=n_trials,
        out=out_path,
    )
    quiet = quiet or bool(cfg.get("quiet"))
    eps = float(_need(cfg, "epsilon"))
    secret_fn = _parse_secret(_need(cfg, "secret"))
    grid_values = cfg.get("budgets")
    if isinstance(grid_values, str):
        try:
            grid_values = [float(tok) for tok in grid_values.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"budgets {cfg['budgets']!r} must be numbers") from None
    if not grid_values:
        raise ConfigError("bound needs a non-empty 'budgets' grid")
    prior_box = None if cfg.get("prior") is None else _parse_prior(cfg["prior"])
    trials = None if cfg.get("n_trials") is None else int(cfg["n_trials"])
    report = gamma(
        _need(cfg, "family"), secret_fn, prior_box, int(cfg.get("grid", 64)), n_trials=trials
    )
    rows = []
    for budget in grid_values:
        budget = float(budget)
        if not budget > 0.0:
            raise ConfigError(f"budgets must be positive, got {budget}")
        if budget < 1.0:
            floor = distortion_lower_bound(report.gamma, eps, budget)
            rows.append(["privacy", _fmt(budget), _fmt(report.gamma), _fmt(floor)])
        rows.append(
            [
                "distortion",
                _fmt(budget),
                _fmt(report.gamma),
                _fmt(privacy_lower_bound(report.gamma, eps, budget)),
            ]
        )
    header = ["budget_kind", "budget", "gamma", "bound"]
    if cfg.get("out") is not None:
        _write_table(cfg["out"], header, rows)
        _echo_json({"gamma": report.gamma, "method": report.method, "out": cfg["out"]}, quiet)
    else:
        click.echo(",".join(header))
        for row in rows:
            click.echo(",".join(row))


# --------------------------------------------------------------------------
# optimize


def _problem_from_doc(doc, overrides):
    for key in ("family", "secret", "epsilon"):
        if overrides.get(key) is not None:
            doc[key] = overrides[key]
    secret_fn = _parse_secret(_need(doc, "secret"))
    trials = doc.get("n_trials")
    return GridProblem(
        family=_need(doc, "family"),
        secret=secret_fn,
        epsilon=float(_need(doc, "epsilon")),
        theta_lo=float(_need(doc, "theta_lo")),
        theta_hi=float(_need(doc, "theta_hi")),
        grid_count=int(_need(doc, "grid_count")),
        n_trials=None if trials is None else int(trials),
    )


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file; flags override its keys.")
@click.option("--problem", "problem_path", default=None, help="GridProblem JSON file.")
@click.option("--mode", type=click.Choice(["dp", "greedy", "binary-search"]), default=None, help="Synthesis mode (default dp).")
@click.option("--budget", type=float, default=None, help="Distortion budget (dp and greedy modes).")
@click.option("--privacy-target", "privacy_target", type=float, default=None, help="Guessing-probability target (binary-search mode).")
@click.option("--budget-lo", "budget_lo", type=float, default=None, help="Budget search floor (default 0).")
@click.option("--budget-hi", "budget_hi", type=float, default=None, help="Budget search ceiling (binary-search mode).")
@click.option("--eta", type=float, default=None, help="Budget search precision (default 1e-3).")
@click.option("--out", "out_path", default=None, help="BinTable JSON path (stdout when omitted).")
@click.option("--family", default=None, help="Override the problem's family.")
@click.option("--secret", default=None, help="Override the problem's secret.")
@click.option("--epsilon", type=float, default=None, help="Override the problem's epsilon.")
@click.option("--seed", type=int, default=None, help="Accepted for config symmetry; synthesis is deterministic.")
@click.option("--quiet", is_flag=True, help="Suppress the JSON summary.")
@_wrap_errors
def optimize(config_path, problem_path, mode, budget, privacy_target, budget_lo, budget_hi, eta, out_path, family, secret, epsilon, seed, quiet):
    """Synthesize a bin table for a grid problem and report (privacy, distortion)."""
    cfg = _merged(
        _load_config(config_path),
        problem=problem_path,
        mode=mode,
        budget=budget,
        privacy_target=privacy_target,
        budget_lo=budget_lo,
        budget_hi=budget_hi,
        eta=eta,
        out=out_path,
    )
    quiet = quiet or bool(cfg.get("quiet"))
    problem_doc = _need(cfg, "problem")
    if isinstance(problem_doc, str):
        try:
            with open(problem_doc, encoding="utf-8") as fh:
                problem_doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read problem {cfg['problem']}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"problem {cfg['problem']} is not valid JSON: {exc}") from exc
    if not isinstance(problem_doc, dict):
        raise ConfigError("problem must be a JSON object")
    problem = _problem_from_doc(
        dict(problem_doc), {"family": family, "secret": secret, "epsilon": epsilon}
    )
    mode_name = cfg.get("mode", "dp")
    if mode_name in ("dp", "greedy"):
        if cfg.get("budget") is None:
            raise ConfigError(f"mode {mode_name} needs a distortion --budget")
        run = dp_optimize if mode_name == "dp" else greedy_optimize
        table = run(problem, float(cfg["budget"]))
    elif mode_name == "binary-search":
        if cfg.get("privacy_target") is None or cfg.get("budget_hi") is None:
            raise ConfigError("binary-search needs --privacy-target and --budget-hi")
        table = binary_search_mechanism(
            problem,
            float(cfg["privacy_target"]),
            float(cfg.get("budget_lo", 0.0)),
            float(cfg["budget_hi"]),
            float(cfg.get("eta", 1e-3)),
        )
    else:
        raise ConfigError(f"unknown mode {mode_name!r}; expected dp, greedy, or binary-search")
    doc = table.to_json_dict()
    text = json.dumps(doc, sort_keys=True, indent=2)
    if cfg.get("out") is not None:
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
        _echo_json(
            {
                "privacy": table.privacy,
                "distortion": table.distortion,
                "rows": len(doc["rows"]),
                "out": cfg["out"],
            },
            quiet,
        )
    else:
        click.echo(text)


# --------------------------------------------------------------------------
# sweep


def _sweep_dataset(cfg, seed):
    if cfg.get("data") is not None:
        return _read_dataset(cfg["data"])
    spec = cfg.get("synthetic")
    if spec is None:
        raise ConfigError("sweep needs either a 'data' path or a 'synthetic' generator spec")
    if not isinstance(spec, dict):
        raise ConfigError("'synthetic' must be a JSON object")
    return _synthesize(
        spec.get("family"),
        spec.get("params"),
        spec.get("preset"),
        int(spec.get("n", 1000)),
        int(spec.get("seed", seed)),
    )


def _sweep_points(cfg):
    """Expand the mechanism list into one point per hyperparameter value."""
    entries = cfg.get("mechanisms")
    if not entries or not isinstance(entries, list):
        raise ConfigError("sweep needs a non-empty 'mechanisms' list in the config")
    top_prior = cfg.get("prior")
    points = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise ConfigError(f"mechanism entries must be JSON objects, got {entry!r}")
        kind = entry.get("kind")
        if kind == "quantization":
            grid = entry.get("bin_counts")
            if not grid:
                raise ConfigError("quantization entry needs a non-empty 'bin_counts' list")
            prior_doc = entry.get("prior", top_prior)
            if prior_doc is None:
                raise ConfigError("quantization entries need a 'prior' (entry or top level)")
            prior = _parse_prior(prior_doc)
            for count in grid:
                points.append(
                    {"kind": kind, "params": {"bin_count": int(count)}, "prior": prior}
                )
        elif kind in ("ap_gaussian", "distp_laplace"):
            grid = entry.get("betas")
            if not grid:
                raise ConfigError(f"{kind} entry needs a non-empty 'betas' list")
            for beta in grid:
                points.append({"kind": kind, "params": {"beta": float(beta)}})
        elif kind == "dp_histogram":
            grid = entry.get("pairs")
            if not grid:
                raise ConfigError(
                    "dp_histogram entry needs a non-empty 'pairs' list of [bin_count, beta]"
                )
            for pair in grid:
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(f"dp_histogram pair must be [bin_count, beta], got {pair!r}")
                points.append(
                    {
                        "kind": kind,
                        "params": {"bin_count": int(pair[0]), "beta": float(pair[1])},
                    }
                )
        else:
            raise ConfigError(f"unknown mechanism kind {kind!r}")
    return points


def _point_seed(seed, index):
    """Per-point baseline seed, independent of worker scheduling."""
    ss = np.random.SeedSequence((seed & _SEED_MASK, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _worker_count(n_points):
    cap_text = os.environ.get("STATPRIV_THREADS")
    if cap_text is None:
        cap = min(8, os.cpu_count() or 1)
    else:
        try:
            cap = int(cap_text)
        except ValueError:
            raise ConfigError(
                f"STATPRIV_THREADS must be an integer, got {cap_text!r}"
            ) from None
        if cap < 1:
            raise ConfigError(f"STATPRIV_THREADS must be >= 1, got {cap}")
    return max(1, min(cap, n_points))


def _run_point(data, cfg, secret_fn, point, point_seed):
    if point["kind"] == "quantization":
        mechanism = QuantizationMechanism(
            family=_need(cfg, "family"),
            secret=secret_fn,
            prior=point["prior"],
            bin_count=point["params"]["bin_count"],
            n_trials=None if cfg.get("n_trials") is None else int(cfg["n_trials"]),
        )
        released = release_dataset(data, mechanism)
    else:
        baseline = BaselineMechanism(
            kind=point["kind"],
            beta=point["params"]["beta"],
            bin_count=point["params"].get("bin_count"),
            rng_seed=point_seed,
        )
        released = release_baseline(data, baseline)
    privacy = float(surrogate_privacy(released, data, secret_fn))
    distortion = float(surrogate_distortion(released, data))
    return privacy, distortion


def _timing_path(out_path):
    root, ext = os.path.splitext(out_path)
    return root + ".timing" + (ext or ".csv")


_SVG_COLORS = {
    "ap_gaussian": "#c23b3b",
    "distp_laplace": "#3a9652",
    "dp_histogram": "#8356a8",
    "quantization": "#2f6fb3",
}


def _svg_scatter(points, secret_kind):
    """Flat tradeoff scatter; points are sorted (kind, privacy, distortion)."""
    width, height = 640.0, 440.0
    left, right, top, bottom = 84.0, 24.0, 24.0, 58.0
    xs = [d for _, _, d in points]
    ys = [p for _, p, _ in points]
    frontier = secret_kind == "mean"
    if not xs:
        xs, ys = [0.0, 1.0], [-1.0, 0.0]
    x_lo, x_hi = min(xs + [0.0]), max(xs)
    if frontier:
        # the mean-secret floor renders as the line privacy = -distortion
        ys = ys + [-x_lo, -x_hi]
    y_lo, y_hi = min(ys), max(ys + [0.0])
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    x_pad = 0.05 * (x_hi - x_lo)
    y_pad = 0.05 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def sx(value):
        return left + (value - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(value):
        return height - bottom - (value - y_lo) / (y_hi - y_lo) * (height - top - bottom)

    def pt(value):
        return format(value, ".2f")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}" '
        f'height="{int(height)}" viewBox="0 0 {int(width)} {int(height)}">',
        f'<rect width="{int(width)}" height="{int(height)}" fill="#ffffff"/>',
    ]
    axis = 'stroke="#333333" stroke-width="1"'
    parts.append(
        f'<line x1="{pt(left)}" y1="{pt(height - bottom)}" x2="{pt(width - right)}" '
        f'y2="{pt(height - bottom)}" {axis}/>'
    )
    parts.append(
        f'<line x1="{pt(left)}" y1="{pt(top)}" x2="{pt(left)}" '
        f'y2="{pt(height - bottom)}" {axis}/>'
    )
    for tick in np.linspace(x_lo, x_hi, 5):
        x = sx(tick)
        parts.append(
            f'<line x1="{pt(x)}" y1="{pt(height - bottom)}" x2="{pt(x)}" '
            f'y2="{pt(height - bottom + 5)}" {axis}/>'
        )
        parts.append(
            f'<text x="{pt(x)}" y="{pt(height - bottom + 20)}" font-size="12" '
            f'font-family="sans-serif" text-anchor="middle">{format(tick, ".4g")}</text>'
        )
    for tick in np.linspace(y_lo, y_hi, 5):
        y = sy(tick)
        parts.append(
            f'<line x1="{pt(left - 5)}" y1="{pt(y)}" x2="{pt(left)}" y2="{pt(y)}" {axis}/>'
        )
        parts.append(
            f'<text x="{pt(left - 9)}" y="{pt(y + 4)}" font-size="12" '
            f'font-family="sans-serif" text-anchor="end">{format(tick, ".4g")}</text>'
        )
    parts.append(
        f'<text x="{pt((left + width - right) / 2)}" y="{pt(height - 14)}" font-size="14" '
        f'font-family="sans-serif" text-anchor="middle">surrogate distortion</text>'
    )
    parts.append(
        f'<text x="18" y="{pt((top + height - bottom) / 2)}" font-size="14" '
        f'font-family="sans-serif" text-anchor="middle" '
        f'transform="rotate(-90 18 {pt((top + height - bottom) / 2)})">surrogate privacy</text>'
    )
    if frontier:
        parts.append(
            f'<line x1="{pt(sx(max(x_lo, 0.0)))}" y1="{pt(sy(-max(x_lo, 0.0)))}" '
            f'x2="{pt(sx(x_hi))}" y2="{pt(sy(-x_hi))}" stroke="#888888" '
            f'stroke-width="1" stroke-dasharray="6 4"/>'
        )
    for kind, privacy, distortion in points:
        color = _SVG_COLORS.get(kind, "#555555")
        parts.append(
            f'<circle cx="{pt(sx(distortion))}" cy="{pt(sy(privacy))}" r="4" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    legend_kinds = sorted({kind for kind, _, _ in points})
    if frontier:
        legend_kinds.append("floor: privacy = -distortion")
    for row, kind in enumerate(legend_kinds):
        y = top + 14 + 18 * row
        x = width - right - 180
        if kind.startswith("floor:"):
            parts.append(
                f'<line x1="{pt(x - 6)}" y1="{pt(y - 4)}" x2="{pt(x + 8)}" y2="{pt(y - 4)}" '
                f'stroke="#888888" stroke-width="1" stroke-dasharray="6 4"/>'
            )
        else:
            color = _SVG_COLORS.get(kind, "#555555")
            parts.append(f'<circle cx="{pt(x)}" cy="{pt(y - 4)}" r="4" fill="{color}"/>')
        parts.append(
            f'<text x="{pt(x + 12)}" y="{pt(y)}" font-size="12" '
            f'font-family="sans-serif">{kind}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@main.command()
@click.option("--config", "config_path", default=None, help="JSON sweep spec; flags override its keys.")
@click.option("--data", "data_path", default=None, help="Input CSV (overrides the spec's dataset).")
@click.option("--out", "out_path", default=None, help="Tradeoff CSV path.")
@click.option("--svg", "svg_path", default=None, help="Optional SVG scatter path.")
@click.option("--family", default=None, help="Distribution family tag.")
@click.option("--secret", default=None, help="Secret NAME[:arg].")
@click.option("--epsilon", type=float, default=None, help="Attacker tolerance (recorded; must be > 0).")
@click.option("--seed", type=int, default=None, help="Base RNG seed for baseline mechanisms (default 0).")
@click.option("--n-trials", "n_trials", type=int, default=None, help="Trial count (binomial family only).")
@click.option("--quiet", is_flag=True, help="Suppress the JSON summary.")
@_wrap_errors
def sweep(config_path, data_path, out_path, svg_path, family, secret, epsilon, seed, n_trials, quiet):
    """Grid mechanisms against one dataset and write the tradeoff CSV.

    Rows are sorted by (mechanism, params) so the file does not depend on
    worker scheduling; per-point wallclock times go to a .timing.csv
    sidecar next to the output. Per-point failures become error rows and
    the run continues; any error row turns the exit code to 3.
    """
    cfg = _merged(
        _load_config(config_path),
        data=data_path,
        out=out_path,
        svg=svg_path,
        family=family,
        secret=secret,
        epsilon=epsilon,
        seed=seed,
        n_trials=n_trials,
    )
    quiet = quiet or bool(cfg.get("quiet"))
    eps = float(_need(cfg, "epsilon"))
    if not (math.isfinite(eps) and eps > 0.0):
        raise ConfigError(f"epsilon must be positive, got {eps}")
    secret_fn = _parse_secret(_need(cfg, "secret"))
    base_seed = int(cfg.get("seed", 0))
    out_file = _need(cfg, "out")
    data = _sweep_dataset(cfg, base_seed)
    points = _sweep_points(cfg)
    seeds = [_point_seed(base_seed, index) for index in range(len(points))]

    def job(index):
        start = time.perf_counter()
        try:
            privacy, distortion = _run_point(data, cfg, secret_fn, points[index], seeds[index])
            outcome = (privacy, distortion, "")
        except _DOMAIN_ERRORS as exc:
            outcome = (None, None, str(exc))
        return outcome, (time.perf_counter() - start) * 1000.0

    workers = _worker_count(len(points))
    if workers == 1:
        results = [job(index) for index in range(len(points))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(len(points))))

    rows = []
    timing_rows = []
    scatter = []
    errors = 0
    for point, ((privacy, distortion, error), elapsed_ms) in zip(points, results):
        label = json.dumps(point["params"], sort_keys=True)
        key = (point["kind"], tuple(sorted(point["params"].items())))
        if error:
            errors += 1
            rows.append((key, [point["kind"], label, "", "", error]))
        else:
            rows.append(
                (key, [point["kind"], label, _fmt(privacy), _fmt(distortion), ""])
            )
            scatter.append((key, (point["kind"], privacy, distortion)))
        timing_rows.append((key, [point["kind"], label, format(elapsed_ms, ".3f")]))
    rows.sort(key=lambda item: item[0])
    timing_rows.sort(key=lambda item: item[0])
    scatter.sort(key=lambda item: item[0])
    _write_table(
        out_file,
        ["mechanism", "params", "surrogate_privacy", "surrogate_distortion", "error"],
        [row for _, row in rows],
    )
    _write_table(
        _timing_path(out_file),
        ["mechanism", "params", "wallclock_ms"],
        [row for _, row in timing_rows],
    )
    if cfg.get("svg") is not None:
        with open(cfg["svg"], "w", encoding="utf-8", newline="") as fh:
            fh.write(_svg_scatter([item for _, item in scatter], secret_fn.kind))
    _echo_json(
        {"points": len(points), "errors": errors, "epsilon": eps, "out": out_file},
        quiet,
    )
    if errors:
        raise SystemExit(3)
