"""Command-line entry point: ``stochfd <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Plot data is written as CSV; models and fits as plain ``key = value`` text.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np
from scipy.stats import norm

from .calibration import result_to_document, wls_fit
from .dataset import DataError, load_csv
from .experiment import (ExperimentConfig, calibrate_prior, expand_priors,
                         initial_config, run_sweep, write_sweep)
from .gpr import ExactGP, optimize_hyperparameters
from .kernels import KERNEL_KINDS
from .kvdoc import DocumentError, format_kv
from .metrics import evaluate
from .models import ModelError, get_spec, model_names
from .sampling import SAMPLERS, SamplerSpec, draw, write_indices_csv
from .sgpr import (DEFAULT_INDUCING, fit_from_document, fit_to_document,
                   optimize_sgpr_hyperparameters, sgpr_fit)

log = logging.getLogger("stochfd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_ENV = "FD_SGPR_DATA"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(spec: str) -> np.ndarray:
    """``"start:stop:step"`` with ``stop`` included when it lies on the grid."""
    try:
        start, stop, step = (float(p) for p in spec.split(":"))
    except ValueError:
        raise UsageError(f"bad range {spec!r}; expected start:stop:step") from None
    if not step > 0 or stop < start:
        raise UsageError(f"bad range {spec!r}; need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def parse_sizes(spec: str):
    """Comma list of integers and/or ``start:stop:step`` ranges."""
    out = []
    for tok in (t.strip() for t in spec.split(",")):
        if not tok:
            continue
        if ":" in tok:
            out += [int(round(x)) for x in parse_range(tok)]
        else:
            try:
                out.append(int(tok))
            except ValueError:
                raise UsageError(f"bad inducing size {tok!r}") from None
    if not out or min(out) < 1:
        raise UsageError("inducing sizes must be positive integers")
    return out


def _load(args):
    path = args.data or os.environ.get(DATA_ENV)
    if not path:
        raise UsageError(f"no dataset: pass --data or set {DATA_ENV}")
    return load_csv(path, args.density_column, args.speed_column)


def _write_table(rows, header, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        out.writerows(rows)


def _aligned(rows, header):
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                     for r in cells) + "\n"


# --- commands ----------------------------------------------------------------

def cmd_calibrate(args):
    data = _load(args)
    names = model_names() if args.model == "all" else [get_spec(args.model).name]
    weights = np.ones(len(data)) if args.unweighted else None
    header = ("model", "params", "objective", "gradient_norm", "iterations", "converged", "note")
    rows = []
    for name in names:
        spec = get_spec(name)
        res = wls_fit(spec, data, weights, seed=args.seed)
        params = " ".join(f"{k}={v:.4f}" for k, v in res.model.as_dict().items())
        rows.append((spec.label, params, f"{res.objective:.6g}", f"{res.gradient_norm:.3g}",
                     res.iterations, res.converged, spec.note))
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, f"{name}.model.txt"), "w", encoding="utf-8") as fh:
                fh.write(result_to_document(res))
    text = _aligned(rows, header)
    sys.stdout.write(text)
    if args.out:
        _write_table(rows, header, os.path.join(args.out, "calibration.csv"))
        with open(os.path.join(args.out, "calibration.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _gp_config(args, data):
    prior = calibrate_prior(get_spec(args.prior).name if args.prior != "none" else "none",
                            data, args.seed)
    return initial_config(args.kernel, data, prior)


def cmd_fit_gp(args):
    data = _load(args)
    cfg = _gp_config(args, data)
    cfg = optimize_hyperparameters(cfg, data, budget=args.budget, seed=args.seed)
    gp = ExactGP(cfg, data)
    report = evaluate(gp.predict(data.density), data)
    k = cfg.kernel
    sys.stdout.write(format_kv([
        ("kind", "exact"), ("kernel", k.kind), ("signal_sigma", k.signal_sigma),
        ("length_scale", k.length_scale), ("noise_variance", cfg.noise_variance),
        ("mean_model", cfg.mean_function.name if cfg.mean_function else "none"),
        ("log_marginal_likelihood", gp.log_marginal_likelihood()),
        ("rmse", report.rmse), ("mape", report.mape), ("pwci", report.pwci)]))
    if args.out:
        queries = parse_range(args.query) if args.query else data.density
        gp.predict(queries).write_csv(args.out)
    return EXIT_OK


def cmd_fit_sgpr(args):
    data = _load(args)
    inducing = draw(SamplerSpec(args.sampler, args.seed), data, args.m)
    cfg = _gp_config(args, data)
    cfg = optimize_sgpr_hyperparameters(cfg, data, inducing, budget=args.budget,
                                        seed=args.seed)
    fit = sgpr_fit(cfg, data, inducing)
    doc = fit_to_document(fit)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(doc)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(doc)
    return EXIT_OK


def _read_fit(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fit_from_document(fh.read())
    except FileNotFoundError:
        raise DataError(f"no such fit file: {path}") from None


def density_pdf_grid(posterior, speeds):
    """Rows ``(density, speed, pdf)`` of the Gaussian predictive density."""
    sd = np.sqrt(posterior.predictive_variance)
    pdf = norm.pdf(speeds[None, :], loc=posterior.mean[:, None], scale=sd[:, None])
    for i, x in enumerate(posterior.query_densities):
        for s, p in zip(speeds, pdf[i]):
            yield x, s, p


def cmd_predict(args):
    fit = _read_fit(args.fit)
    if args.query:
        queries = parse_range(args.query)
    elif args.data or os.environ.get(DATA_ENV):
        queries = _load(args).density
    else:
        raise UsageError("pass --query start:stop:step or a dataset")
    post = fit.predict(queries)
    if args.out:
        post.write_csv(args.out)
    else:
        post.write_csv(sys.stdout)
    if args.surface:
        if args.speed_grid:
            speeds = parse_range(args.speed_grid)
        else:
            sd = np.sqrt(post.predictive_variance)
            speeds = np.linspace(float(np.min(post.mean - 6 * sd)),
                                 float(np.max(post.mean + 6 * sd)), args.speed_points)
        _write_table(([repr(float(a)), repr(float(b)), repr(float(c))]
                      for a, b, c in density_pdf_grid(post, speeds)),
                     ("density", "speed", "pdf"), args.surface)
    return EXIT_OK


def cmd_evaluate(args):
    fit = _read_fit(args.fit)
    data = _load(args)
    report = evaluate(fit.predict(data.density), data, args.level)
    sys.stdout.write(format_kv([
        ("n_points", report.n_points), ("rmse", report.rmse), ("mape", report.mape),
        ("mape_excluded", report.mape_excluded), ("pwci", report.pwci),
        ("level", args.level)]))
    return EXIT_OK


def cmd_sample(args):
    data = _load(args)
    inducing = draw(SamplerSpec(args.sampler, args.seed), data, args.m)
    write_indices_csv(inducing, args.out or sys.stdout)
    return EXIT_OK


def cmd_sweep(args):
    data = _load(args)
    priors = expand_priors(args.prior)
    samplers = [s.strip() for s in args.sampler.split(",") if s.strip()]
    sizes = parse_sizes(args.m)
    if not priors or not samplers:
        raise UsageError("sweep grid is empty")
    configs = [ExperimentConfig(p, SamplerSpec(s, args.seed), m, args.kernel, args.seed,
                                args.budget, args.level, args.holdout,
                                data_path=args.data or "", output_dir=args.out)
               for p in priors for s in samplers for m in sizes]
    os.makedirs(args.out, exist_ok=True)
    done = write_sweep(run_sweep(configs, data, args.jobs),
                       os.path.join(args.out, "sweep.csv"),
                       os.path.join(args.out, "curves.csv"))
    failed = sum(1 for r in done if r.error)
    log.info("%d cells, %d failed", len(done), failed)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help=f"density/speed CSV (default: ${DATA_ENV})")
    common.add_argument("--density-column", default="density")
    common.add_argument("--speed-column", default="speed")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    gp = argparse.ArgumentParser(add_help=False)
    gp.add_argument("--prior", "--model", dest="prior", default="none",
                    help="calibrated mean function, or 'none'")
    gp.add_argument("--kernel", default="exponential",
                    help=f"one of {', '.join(KERNEL_KINDS)} (aliases: exp, se, rq)")
    gp.add_argument("--budget", type=int, default=300,
                    help="objective evaluations for the hyperparameter search")

    p = _Parser(prog="stochfd", description="Stochastic speed-density diagrams.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("calibrate", parents=[common], help="WLS-fit deterministic models")
    c.add_argument("--model", default="all", help="model name or 'all'")
    c.add_argument("--unweighted", action="store_true", help="ordinary least squares")
    c.add_argument("--out", help="directory for calibration.csv/.txt and model files")
    c.set_defaults(func=cmd_calibrate)

    c = sub.add_parser("fit-gp", parents=[common, gp], help="exact GP regression")
    c.add_argument("--query", help="range start:stop:step for the posterior CSV")
    c.add_argument("--out", help="posterior CSV path")
    c.set_defaults(func=cmd_fit_gp)

    c = sub.add_parser("fit-sgpr", parents=[common, gp], help="sparse variational GP")
    c.add_argument("--sampler", default="rs", choices=sorted(SAMPLERS))
    c.add_argument("--m", type=int, default=DEFAULT_INDUCING, help="inducing points")
    c.add_argument("--out", help="fit document path (default: stdout)")
    c.set_defaults(func=cmd_fit_sgpr)

    c = sub.add_parser("predict", parents=[common], help="posterior bands from a fit file")
    c.add_argument("--fit", required=True)
    c.add_argument("--query", help="range start:stop:step (default: dataset densities)")
    c.add_argument("--out", help="posterior CSV path (default: stdout)")
    c.add_argument("--surface", help="also write a (density, speed, pdf) grid here")
    c.add_argument("--speed-grid", help="speed range start:stop:step for --surface")
    c.add_argument("--speed-points", type=int, default=1201)
    c.set_defaults(func=cmd_predict)

    c = sub.add_parser("evaluate", parents=[common], help="RMSE/MAPE/PWCI of a fit")
    c.add_argument("--fit", required=True)
    c.add_argument("--level", type=float, default=0.95)
    c.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("sample", parents=[common], help="draw inducing rows")
    c.add_argument("--sampler", default="rs", choices=sorted(SAMPLERS))
    c.add_argument("--m", type=int, default=DEFAULT_INDUCING)
    c.add_argument("--out", help="index CSV path (default: stdout)")
    c.set_defaults(func=cmd_sample)

    c = sub.add_parser("sweep", parents=[common], help="prior x sampler x size grid")
    c.add_argument("--prior", "--model", dest="prior", default="none",
                   help="comma list of model names, 'none' and/or 'all'")
    c.add_argument("--sampler", default="rs", help="comma list from rs,ss,cs,wrs")
    c.add_argument("--m", default=str(DEFAULT_INDUCING),
                   help="comma list of sizes and/or start:stop:step ranges")
    c.add_argument("--kernel", default="exponential")
    c.add_argument("--budget", type=int, default=300)
    c.add_argument("--level", type=float, default=0.95)
    c.add_argument("--holdout", type=float, default=1.0,
                   help="train fraction; below 1 scores on the held-out rows")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", default="sweep_out", help="output directory")
    c.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, DocumentError, OSError) as exc:
        print(f"stochfd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"stochfd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ModelError, ValueError) as exc:
        print(f"stochfd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
