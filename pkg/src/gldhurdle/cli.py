"""Command line interface.

Every command writes its results into ``--out``: ``result.json`` with the
estimates, headered CSV tables for plot-ready vectors, ``manifest.json``
(configuration, seed, versions, files) and ``timing.json`` (wall time,
kept apart so that the other files are byte-identical across runs with
the same seed).

Exit codes: 0 success, 2 input error, 3 fit failure or non-convergence,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
from scipy import stats

from . import diagnostics, gld, gpd
from .fitting import nmle_fit
from .hurdle import fit_hurdle, split
from .io import InputError, ingest, transform, write_csv
from .optim import FitError, OptimizerConfig
from .regression import (
    gld_regression_fit,
    hurdle_regression_fit,
    regression_residuals,
    simulate_coefficient_cis,
)
from .simulation import COEFFICIENT_NAMES, SCENARIOS, simulation_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_INTERNAL = 4

CURVE_POINTS = 512


class RunWriter:
    """Collects output files of one command run."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.converged = True
        self.dropped = 0

    def json(self, name, obj):
        path = self.out / name
        path.write_text(_dumps(obj), encoding="utf-8")
        self.files.append(name)

    def csv(self, name, header, rows):
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def check(self, converged):
        self.converged = self.converged and bool(converged)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        # JSON has no NaN or infinity
        return val if math.isfinite(val) else None
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _names(text):
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _parametrizations(value):
    return ["RS", "FKML"] if value == "both" else [value.upper()]


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(n_candidates=args.candidates, restarts=args.restarts,
                           seed=args.seed)


def _load(args, w, need_covariates=False):
    covs = _names(args.covariates)
    zcovs = _names(getattr(args, "zero_covariates", None))
    if need_covariates and not covs:
        raise InputError("--covariates is required for this command")
    data = ingest(args.input, args.response, list(dict.fromkeys(covs + zcovs)))
    y = transform(data.response, args.truncate, args.log)
    w.dropped = data.dropped
    return data, y, covs, zcovs


def _curve_grid(x, h):
    return np.linspace(x.min() - 3.0 * h, x.max() + 3.0 * h, CURVE_POINTS)


def _density_bundle(w: RunWriter, tag, x, pdf, quantile):
    """QQ pairs, histogram, KDE / fitted curves and the distances."""
    qq = diagnostics.qq_points(x, quantile)
    w.csv(f"{tag}_qq.csv", ["empirical", "theoretical"], qq.tolist())
    counts, edges = np.histogram(x, bins="fd")
    width = np.diff(edges)
    dens = counts / (len(x) * width)
    w.csv(f"{tag}_histogram.csv", ["left", "right", "density"],
          list(zip(edges[:-1].tolist(), edges[1:].tolist(), dens.tolist())))
    k = diagnostics.kde(x)
    grid = _curve_grid(x, k.bandwidth)
    w.csv(f"{tag}_density.csv", ["y", "kde", "fitted"],
          list(zip(grid.tolist(), k(grid).tolist(), np.asarray(pdf(grid), dtype=float).tolist())))
    report = diagnostics.density_distances(pdf, k, x)
    return {"bandwidth": k.bandwidth, "distances": report.to_dict()}


def _gld_pdf(params):
    return lambda t: gld.pdf(params, t)


def _gld_quantile(params):
    return lambda p: gld.quantile(params, p)


def _residual_bundle(w: RunWriter, tag, e, r, flagged, ref_pdf, ref_quantile):
    w.csv(f"{tag}_residuals.csv", ["error", "quantile", "flagged"],
          [[float(a), float(b), int(c)] for a, b, c in zip(e, r, flagged)])
    finite = r[np.isfinite(r)]
    if len(finite):
        qq = diagnostics.qq_points(finite, stats.norm.ppf)
        w.csv(f"{tag}_quantile_residual_qq.csv", ["empirical", "theoretical"], qq.tolist())
    return _density_bundle(w, f"{tag}_error", e, ref_pdf, ref_quantile)


def cmd_fit(args, w: RunWriter):
    _, y, _, _ = _load(args, w)
    config = _config(args)
    out = {"n": len(y)}
    for par in _parametrizations(args.parametrization):
        fit = nmle_fit(y, par, config)
        w.check(fit.converged)
        tag = par.lower()
        entry = fit.to_dict()
        entry["diagnostics"] = _density_bundle(w, tag, y, _gld_pdf(fit.params),
                                               _gld_quantile(fit.params))
        out[tag] = entry
    return out


def cmd_fit_hurdle(args, w: RunWriter):
    _, y, _, _ = _load(args, w)
    config = _config(args)
    parts = split(y)
    out = {"n": len(y), "zero_count": parts.zero_count}
    for par in _parametrizations(args.parametrization):
        fit = fit_hurdle(y, par, config)
        tag = par.lower()
        entry = fit.to_dict()
        if fit.fit is None:
            w.check(False)
        else:
            w.check(fit.fit.converged)
            entry["diagnostics"] = _density_bundle(
                w, tag, parts.nonzero_values, _gld_pdf(fit.fit.params),
                _gld_quantile(fit.fit.params))
        out[tag] = entry
    return out


def _regression_entry(w, tag, fit, W, y, args, config):
    entry = fit.to_dict()
    if args.replicates:
        cis = simulate_coefficient_cis(fit, W, args.replicates, args.alpha, args.seed, config)
        entry["cis"] = cis.to_dict()
        w.csv(f"{tag}_ci_samples.csv", [f"beta{j}" for j in range(W.shape[1])],
              cis.samples.tolist())
    e, r, flagged = regression_residuals(fit, W, y)
    p = fit.error_params
    entry["diagnostics"] = _residual_bundle(w, tag, e, r, flagged, _gld_pdf(p), _gld_quantile(p))
    return entry


def cmd_regress(args, w: RunWriter):
    data, y, covs, _ = _load(args, w, need_covariates=True)
    W = data.matrix(covs)
    config = _config(args)
    out = {"n": len(y), "coefficients": ["intercept"] + covs}
    for par in _parametrizations(args.parametrization):
        fit = gld_regression_fit(W, y, par, config)
        w.check(fit.converged)
        out[par.lower()] = _regression_entry(w, par.lower(), fit, W, y, args, config)
    return out


def cmd_hurdle_regress(args, w: RunWriter):
    data, y, covs, zcovs = _load(args, w, need_covariates=True)
    W = data.matrix(covs)
    Z = data.matrix(zcovs or covs)
    config = _config(args)
    keep = y != 0.0
    out = {"n": len(y), "coefficients": ["intercept"] + covs,
           "zero_coefficients": ["intercept"] + (zcovs or covs)}
    for par in _parametrizations(args.parametrization):
        fit = hurdle_regression_fit(W, Z, y, par, config, ci_reps=0)
        w.check(fit.nonzero_part.converged)
        if fit.zero_part is None:
            w.check(False)
        else:
            w.check(fit.zero_part.converged)
        entry = fit.to_dict()
        entry["nonzero_part"] = _regression_entry(w, par.lower(), fit.nonzero_part, W[keep],
                                                  y[keep], args, config)
        out[par.lower()] = entry
    return out


def _gpd_threshold(args, y):
    if args.gpd_threshold is not None:
        return float(args.gpd_threshold)
    if args.truncate is not None:
        return math.log(args.truncate) if args.log else float(args.truncate)
    nz = y[y != 0.0]
    if len(nz) == 0:
        raise InputError("no non-zero values for the GPD")
    return float(nz.min())


def cmd_fit_gpd(args, w: RunWriter):
    _, y, _, _ = _load(args, w)
    alpha = _gpd_threshold(args, y)
    fit = gpd.hurdle_gpd_fit(y, alpha, config=_config(args))
    w.check(fit.continuous.converged)
    p = fit.continuous.params
    out = fit.to_dict()
    out["threshold"] = alpha
    out["diagnostics"] = _density_bundle(w, "gpd", y[y != 0.0], lambda t: gpd.gpd_pdf(p, t),
                                         lambda q: gpd.gpd_quantile(p, q))
    return out


def cmd_hurdle_regress_gpd(args, w: RunWriter):
    data, y, covs, zcovs = _load(args, w, need_covariates=True)
    alpha = _gpd_threshold(args, y)
    X = data.matrix(covs)
    Z = data.matrix(zcovs or covs)
    fit = gpd.hurdle_gpd_fit(y, alpha, X=X, Z=Z, config=_config(args))
    w.check(fit.continuous.converged)
    w.check(fit.zero_part is not None and fit.zero_part.converged)
    keep = y != 0.0
    e, r, flagged = gpd.gpd_residuals(fit.continuous, X[keep], y[keep], alpha)
    ref = gpd.error_residual_law(fit.continuous)
    out = fit.to_dict()
    out["threshold"] = alpha
    out["coefficients"] = ["intercept"] + covs
    out["zero_coefficients"] = ["intercept"] + (zcovs or covs)
    out["diagnostics"] = _residual_bundle(w, "gpd", e, r, flagged,
                                          lambda t: gpd.gpd_pdf(ref, t),
                                          lambda q: gpd.gpd_quantile(ref, q))
    return out


def cmd_compare(args, w: RunWriter):
    _, y, _, _ = _load(args, w)
    config = _config(args)
    parts = split(y)
    x = parts.nonzero_values
    alpha = _gpd_threshold(args, y)
    k = diagnostics.kde(x)
    grid = _curve_grid(x, k.bandwidth)
    models = {}
    for par in ("RS", "FKML"):
        fit = nmle_fit(x, par, config)
        w.check(fit.converged)
        models[par.lower()] = (fit.to_dict(), _gld_pdf(fit.params))
    g = gpd.gpd_mle_fit(x, alpha, config)
    w.check(g.converged)
    models["gpd"] = (g.to_dict(), lambda t, p=g.params: gpd.gpd_pdf(p, t))
    rows, out = [], {"n": len(y), "zero_count": parts.zero_count,
                     "lambda0": parts.zero_count / len(y), "threshold": alpha,
                     "bandwidth": k.bandwidth, "models": {}}
    curves = [grid, k(grid)]
    for name, (summary, pdf) in models.items():
        rep = diagnostics.density_distances(pdf, k, x)
        rows.append([name, rep.global_distance, rep.l2, rep.linf])
        summary["distances"] = rep.to_dict()
        out["models"][name] = summary
        curves.append(np.asarray(pdf(grid), dtype=float))
    w.csv("distances.csv", ["model", "global", "l2", "linf"], rows)
    w.csv("density.csv", ["y", "kde"] + list(models), np.column_stack(curves).tolist())
    return out


def cmd_simulate(args, w: RunWriter):
    sizes = [int(s) for s in _names(args.sizes)]
    if not sizes or min(sizes) < 10:
        raise InputError("--sizes must list sample sizes of at least 10")
    replicates = args.replicates or 1000
    res = simulation_study(args.scenario, sizes, replicates, args.seed, _config(args))
    fields = ["coefficient", "target", "n", "mean", "se", "p025", "p975",
              "replicates", "failures"]
    w.csv("summary.csv", fields, [[getattr(r, f) for f in fields] for r in res.rows])
    for n, est in res.estimates.items():
        w.csv(f"estimates_n{n}.csv", list(COEFFICIENT_NAMES), est.tolist())
    return res.to_dict()


COMMANDS = {
    "fit": (cmd_fit, "numerical ML fit of a GLD to the response"),
    "fit-hurdle": (cmd_fit_hurdle, "hurdle GLD: zero mass plus a GLD on the non-zero values"),
    "regress": (cmd_regress, "GLD location regression with simulated intervals"),
    "hurdle-regress": (cmd_hurdle_regress, "logistic zero part plus GLD regression"),
    "fit-gpd": (cmd_fit_gpd, "hurdle generalized Pareto fit"),
    "hurdle-regress-gpd": (cmd_hurdle_regress_gpd, "logistic zero part plus GPD GLM"),
    "compare": (cmd_compare, "distances of RS, FKML and GPD fits to the kernel estimate"),
    "simulate": (cmd_simulate, "replicated simulation of the two-part regression model"),
}


def _add_common(p, data=True):
    if data:
        p.add_argument("--input", required=True, help="headered CSV file")
        p.add_argument("--response", required=True, help="response column")
        p.add_argument("--covariates", default="", help="comma separated covariate columns")
        p.add_argument("--zero-covariates", default="",
                       help="covariates of the zero part (default: --covariates)")
        p.add_argument("--parametrization", choices=["rs", "fkml", "both"], default="both",
                       type=str.lower)
        p.add_argument("--truncate", type=float, default=None,
                       help="values strictly below this become 0")
        p.add_argument("--log", action="store_true", help="log of the non-zero values")
        p.add_argument("--alpha", type=float, default=0.05, help="interval level")
        p.add_argument("--gpd-threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--candidates", type=int, default=10000,
                   help="quasi-random starting candidates")
    p.add_argument("--restarts", type=int, default=3, help="simplex restarts")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gldhurdle",
                                     description="Hurdle generalized lambda models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        if name == "simulate":
            p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
            p.add_argument("--sizes", default="100,200,1000")
            _add_common(p, data=False)
        else:
            _add_common(p)
    return parser


def _validate(args):
    if not 0 <= args.seed < 2 ** 64:
        raise InputError("--seed must be an unsigned 64-bit integer")
    if args.replicates is not None and args.replicates < 0:
        raise InputError("--replicates must be nonnegative")
    if hasattr(args, "alpha") and not 0 < args.alpha < 1:
        raise InputError("--alpha must lie in (0, 1)")
    if args.command in ("regress", "hurdle-regress") and args.replicates is None:
        args.replicates = 1000


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    handler = COMMANDS[args.command][0]
    try:
        _validate(args)
        w = RunWriter(Path(args.out))
        result = handler(args, w)
        w.json("result.json", result)
        config = {k: v for k, v in sorted(vars(args).items()) if k != "out"}
        w.json("manifest.json", {
            "command": args.command,
            "config": config,
            "seed": args.seed,
            "versions": _versions(),
            "outputs": sorted(w.files + ["manifest.json"]),
            "converged": w.converged,
            "dropped_rows": w.dropped,
        })
        (w.out / "timing.json").write_text(
            _dumps({"wall_seconds": time.perf_counter() - start}), encoding="utf-8")
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    if not w.converged:
        print("warning: at least one fit did not converge", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
