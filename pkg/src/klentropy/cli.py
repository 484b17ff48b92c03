"""Command-line interface.

Exit codes: 0 success, 2 usage or arity error, 3 data or domain error,
4 I/O error.
"""

import argparse
import math
import sys

import numpy as np

from . import __version__
from .core_math import Metric, MixingProfile, MomentProfile
from .errors import ArityError, KLEntropyError
from .estimator import EstimatorConfig, kl_entropy, mutual_information
from .experiment import read_plan, run_and_write
from .neighbors import Dataset, set_threads
from .processes import (
    GaussianChainSpec,
    RngSeed,
    dataset_from_csv,
    dataset_to_csv,
    sample_iid_gaussian,
    sample_stationary_chain,
    standard_normals,
)
from .theory import (
    bound_table_csv,
    empirical_tv_to_poisson,
    marginal_ball_mass,
    neighbor_count_experiment,
    stein_chen_bound,
    theta_interval,
    tv_standard_error,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 2, 3, 4
_JITTER_STREAM = 1 << 40


def _jitter(data, scale, seed, offset=0):
    noise = standard_normals(RngSeed(seed, _JITTER_STREAM + offset), data.points.shape)
    return Dataset(data.points + scale * noise)


def _load(path, args, offset=0):
    data = dataset_from_csv(path)
    if args.jitter:
        data = _jitter(data, args.jitter, args.seed, offset)
    return data


def cmd_simulate(args):
    seed = RngSeed(args.seed, args.stream)
    if args.iid:
        data = sample_iid_gaussian(args.d, args.r, args.length, seed)
    else:
        data = sample_stationary_chain(GaussianChainSpec(args.d, args.r, args.rho), args.length, seed)
    dataset_to_csv(data, args.output)
    return EXIT_OK


def cmd_estimate(args):
    data = _load(args.input, args)
    cfg = EstimatorConfig(args.k, args.metric)
    est = kl_entropy(data, cfg)
    print(f"H = {est.value:.6f} nats (n_points={est.n_points}, k={cfg.k}, metric={cfg.metric.value})")
    return EXIT_OK


def cmd_mi(args):
    x = _load(args.input_x, args, 0)
    y = _load(args.input_y, args, 1)
    cfg = EstimatorConfig(args.k, args.metric)
    mi = mutual_information(x, y, cfg)
    print(f"I = {mi:.6f} nats (n_points={x.n_points}, k={cfg.k}, metric={cfg.metric.value})")
    return EXIT_OK


def cmd_experiment(args):
    plan = read_plan(args.plan)

    def progress(done, total):
        print(f"  {done}/{total} replicates", file=sys.stderr)

    reports, manifest = run_and_write(plan, args.output_dir, progress=None if args.quiet else progress)
    for k, report in sorted(reports.items()):
        bias = "NA" if report.bias_fit is None else f"{report.bias_fit.slope:.4f}"
        var = "NA" if report.variance_fit is None else f"{report.variance_fit.slope:.4f}"
        print(f"k={k}: bias_slope={bias} variance_slope={var}")
    print(f"wrote {len(manifest['files'])} files to {args.output_dir}")
    return EXIT_OK


def cmd_rates(args):
    bound = theta_interval(args.d, MixingProfile(0.0, args.eps), MomentProfile(args.r_mom))
    rows = [
        ("d", args.d),
        ("eps", float(args.eps)),
        ("r_mom", float(args.r_mom)),
        *bound.terms.items(),
        ("theta_sup", bound.theta_sup),
        ("admissible", str(bound.admissible).lower()),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        shown = f"{value:.12g}" if isinstance(value, float) else value
        print(f"{name:<{width}}  {shown}")
    if not bound.admissible:
        limit = min(args.d, 1.0 + math.sqrt(5.0))
        print(f"warning: eps={args.eps:g} does not exceed min(d, 1+sqrt(5))={limit:g}; "
              "the rate bound does not apply", file=sys.stderr)
    if args.csv:
        bound_table_csv(rows, args.csv)
    return EXIT_OK


def cmd_diagnose(args):
    spec = GaussianChainSpec(args.d, args.r, args.rho)
    pin = np.zeros(args.d) if args.pin is None else np.array([float(v) for v in args.pin.split(",")])
    if pin.size != args.d:
        raise ArityError(f"--pin has {pin.size} coordinates, expected {args.d}")
    metric = Metric.parse(args.metric)
    res = neighbor_count_experiment(
        spec, pin, args.n, args.r_rule, args.replicates, RngSeed(args.seed), metric
    )
    tv = empirical_tv_to_poisson(res.histogram, res.lambda_hat)
    se = tv_standard_error(res.histogram, seed=RngSeed(args.seed, _JITTER_STREAM - 1))
    p = marginal_ball_mass(spec, pin, res.radius, metric)
    mixing = MixingProfile(args.mixing_k, args.eps, args.mixing_l)
    beta = args.beta if args.beta is not None else max(0.05, 1.0 / (1.0 + args.eps))
    bound = stein_chen_bound(mixing, beta, args.n, p)
    rows = [
        ("n", args.n),
        ("radius", res.radius),
        ("replicates", res.histogram.total),
        ("lambda_hat", res.lambda_hat),
        ("n_times_p", args.n * p),
        ("tv_to_poisson", tv),
        ("tv_std_error", se),
        ("stein_chen_bound", bound),
        ("mixing_k", mixing.k_mix),
        ("mixing_l", mixing.l_mix),
        ("beta", beta),
    ]
    for name, value in rows:
        shown = f"{value:.6g}" if isinstance(value, float) else value
        print(f"{name:<17} {shown}")
    if spec.temporal != 0.0 and mixing.k_mix == 0.0:
        print("note: K=0 describes independent data; pass --mixing-k/--mixing-l "
              "to bound a dependent chain", file=sys.stderr)
    if args.output:
        res.histogram.to_csv(args.output)
    else:
        print()
        sys.stdout.write(res.histogram.to_csv())
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for neighbour search")
    common.add_argument("--metric", choices=[m.value for m in Metric], default="euclidean")
    common.add_argument("--jitter", type=float, default=None, metavar="EPS",
                        help="add EPS * N(0, 1) noise to input points (seeded)")

    parser = argparse.ArgumentParser(prog="klentropy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"klentropy {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write a simulated dataset as CSV")
    p.add_argument("output")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=float, default=0.25, help="band parameter of the covariance")
    p.add_argument("--rho", type=float, default=0.25, help="lag-one correlation")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--iid", action="store_true", help="independent draws instead of a chain")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="entropy of a CSV dataset")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mi", parents=[common], help="mutual information of two CSV datasets")
    p.add_argument("input_x")
    p.add_argument("input_y")
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("experiment", parents=[common], help="run a bias/variance plan")
    p.add_argument("plan")
    p.add_argument("output_dir")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("rates", parents=[common], help="bias-rate exponent table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r-mom", type=float, required=True)
    p.add_argument("--csv", default=None, metavar="PATH")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("diagnose", parents=[common], help="Poisson approximation of neighbour counts")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True, help="number of other points N")
    p.add_argument("--r-rule", type=float, required=True, help="ball radius is (r_rule / N)^(1/d)")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--pin", default=None, help="comma-separated conditioning point (default origin)")
    p.add_argument("--mixing-k", type=float, default=0.0)
    p.add_argument("--mixing-l", type=float, default=None)
    p.add_argument("--eps", type=float, default=1e6)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--output", default=None, metavar="PATH", help="histogram CSV path")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        set_threads(args.threads)
    try:
        return args.func(args)
    except ArityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KLEntropyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
