"""Command-line interface.

Subcommands: generate, privatize, fit, evaluate, simulate, real-data,
select-model, budget. Exit codes: 0 success, 1 validation error,
2 convergence failure, 3 missing data.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .data import (MECHANISMS, PairwiseDataset, centered_uniform_preferences,
                   equally_spaced_preferences, generate, load_csv, privatize,
                   write_csv)
from .estimator import (ConvergenceError, EstimatorConfig, default_lambda, fit)
from .experiments import (RankReport, ScenarioSpec, real_data_pipeline,
                          run_scenario, write_real_data_report, write_report)
from .extensions import budget_check, select_model
from .mechanisms import PrivacyProfile, load_profile_csv, write_profile_csv
from .metrics import kendall, rank_of, spearman_footrule, topk_hamming
from .models import ComparisonModel

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONVERGENCE = 2
EXIT_MISSING_DATA = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argument problems are validation errors
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _read_config_file(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and #-comments are skipped."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _load_theta(path) -> np.ndarray:
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["item", "theta_hat"]:
            raise ValueError(f"{path}: expected header 'item,theta_hat'")
        for row in reader:
            if row:
                entries[int(row[0])] = float(row[1])
    if sorted(entries) != list(range(1, len(entries) + 1)):
        raise ValueError(f"{path}: items must be 1..m without gaps")
    return np.array([entries[i] for i in sorted(entries)])


def _write_theta(theta, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "theta_hat"])
        for i, v in enumerate(theta, start=1):
            writer.writerow([i, format(float(v), ".17g")])


def _parse_epsilons(text) -> np.ndarray:
    if os.path.exists(text):
        return load_profile_csv(text).epsilons
    return np.array([float(tok) for tok in text.split(",") if tok.strip()])


def _print_kv(**kwargs) -> None:
    for key, value in kwargs.items():
        if isinstance(value, float):
            print(f"{key}={value:.10g}")
        else:
            print(f"{key}={value}")


def _cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    model = ComparisonModel.from_token(args.model)
    if args.spacing is not None:
        theta = equally_spaced_preferences(args.m, args.spacing)
    else:
        theta = centered_uniform_preferences(args.m, rng)
    dataset = generate(theta, model, args.L, args.p, rng)
    write_csv(dataset, args.out)
    if args.theta_out:
        _write_theta(theta, args.theta_out)
    if args.profile_out:
        if args.eps_low is None:
            profile = PrivacyProfile.non_private(args.L)
        else:
            profile = PrivacyProfile.uniform(args.L, args.eps_low, args.eps_high, rng)
        write_profile_csv(profile, args.profile_out)
    _print_kv(records=len(dataset), m=dataset.m, L=dataset.L, out=args.out)
    return EXIT_OK


def _cmd_privatize(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = load_csv(args.data)
    profile = load_profile_csv(args.profile)
    private = privatize(dataset, profile, args.mechanism.replace("-", "_"), rng)
    write_csv(private, args.out)
    _print_kv(records=len(private), kind=private.kind, out=args.out)
    return EXIT_OK


def _fit_config(args, profile) -> EstimatorConfig:
    if args.reg is not None:
        lam = args.reg
    elif profile is not None:
        lam = default_lambda(profile, args.reg_c)
    else:
        lam = args.reg_c / 1.0  # bare constant when no profile is known
    return EstimatorConfig(lam=lam, step_size=args.step_size,
                           grad_tol=args.grad_tol, max_iters=args.max_iters)


def _cmd_fit(args) -> int:
    profile = load_profile_csv(args.profile) if args.profile else None
    dataset = load_csv(args.data, profile=profile)
    if profile is None:
        profile = PrivacyProfile.non_private(dataset.L)
        dataset = dataset.with_values(dataset.values, dataset.kind, profile)
    model = ComparisonModel.from_token(args.model)
    config = _fit_config(args, profile)
    est = fit(dataset, model, config)
    _write_theta(est.theta_hat, args.out)
    _print_kv(iterations=est.iterations, final_grad_norm=est.final_grad_norm,
              objective=est.objective_value, lam=config.lam, out=args.out)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    theta_hat = _load_theta(args.estimate)
    theta_star = _load_theta(args.truth)
    diff = theta_hat - theta_star
    _print_kv(l2_error=float(np.linalg.norm(diff) / math.sqrt(diff.size)),
              linf_error=float(np.max(np.abs(diff))),
              kendall=kendall(theta_hat, theta_star),
              spearman=spearman_footrule(theta_hat, theta_star))
    if args.k is not None:
        _print_kv(topk_hamming=topk_hamming(theta_hat, theta_star, args.k))
    _print_kv(ranking=",".join(str(r) for r in rank_of(theta_hat)))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    overrides = {}
    if args.config:
        overrides = _read_config_file(args.config)
    replicates = int(overrides.get("replicates", args.replicates))
    base_seed = int(overrides.get("base_seed", args.seed))
    models = tuple(tok.strip() for tok in
                   overrides.get("models", args.model).split(",") if tok.strip())
    spec = ScenarioSpec(scenario=args.scenario, replicates=replicates,
                        base_seed=base_seed, models=models,
                        lambda_c=float(overrides.get("lambda_c", args.reg_c)))
    report = run_scenario(spec)
    paths = write_report(report, args.out)
    for agg in report.aggregates:
        print(f"scenario={agg['scenario']} cell={agg['cell']} model={agg['model']} "
              f"mechanism={agg['mechanism']} metric={agg['metric']} "
              f"mean={agg['mean']:.6g} sd={agg['sd']:.6g} n={agg['n']}")
    for key, value in report.extras.items():
        _print_kv(**{key: value})
    _print_kv(outputs=";".join(paths))
    flagged = [a for a in report.aggregates if a["flagged"]]
    if flagged:
        print(f"warning: {len(flagged)} cell aggregates exceeded the 5% failure budget",
              file=sys.stderr)
    return EXIT_OK


def _cmd_real_data(args) -> int:
    report = real_data_pipeline(args.data, replicates=args.replicates,
                                base_seed=args.seed, lambda_c=args.reg_c)
    if args.out:
        write_real_data_report(report, args.out)
    _print_kv(ground_truth_ranking=",".join(str(r) for r in report.ground_truth_ranking))
    for name in report.methods:
        _print_kv(**{f"{name}_mean": report.means[name], f"{name}_sd": report.sds[name]})
    for key, (t, p) in report.t_tests.items():
        _print_kv(**{f"{key}_t": t, f"{key}_p": p})
    return EXIT_OK


def _cmd_select_model(args) -> int:
    profile = load_profile_csv(args.profile) if args.profile else None
    dataset = load_csv(args.data, profile=profile)
    candidates = [ComparisonModel.from_token(tok) for tok in args.candidates.split(",")]
    if args.reg is not None:
        lam = args.reg
    else:
        lam = default_lambda(profile if profile is not None
                             else PrivacyProfile.non_private(dataset.L), args.reg_c)
    chosen = select_model(dataset, candidates, lam)
    _print_kv(selected=chosen.kind, lam=lam)
    return EXIT_OK


def _cmd_budget(args) -> int:
    eps = _parse_epsilons(args.epsilons)
    G, ok = budget_check(eps, args.alpha)
    _print_kv(G=G, alpha=args.alpha, satisfied=ok)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privrank",
                     description="Differentially private rank aggregation from pairwise comparisons")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log fit diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=True):
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        if model:
            p.add_argument("--model", default="btl", help="btl, tm or dt")

    p = sub.add_parser("generate", help="draw a synthetic raw comparison dataset")
    add_common(p)
    p.add_argument("--m", type=int, required=True, help="item count")
    p.add_argument("--L", type=int, required=True, help="user count")
    p.add_argument("--p", type=float, default=1.0, help="observation probability")
    p.add_argument("--spacing", type=float, default=None,
                   help="equally spaced preferences with this gap (default uniform)")
    p.add_argument("--out", required=True, help="dataset CSV to write")
    p.add_argument("--theta-out", default=None, help="write the true preferences here")
    p.add_argument("--profile-out", default=None, help="also draw a privacy profile")
    p.add_argument("--eps-low", type=float, default=None)
    p.add_argument("--eps-high", type=float, default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("privatize", help="apply a privacy mechanism to raw comparisons")
    add_common(p, model=False)
    p.add_argument("--data", required=True)
    p.add_argument("--profile", required=True, help="privacy profile CSV")
    p.add_argument("--mechanism", required=True,
                   choices=[m.replace("_", "-") for m in MECHANISMS])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_privatize)

    p = sub.add_parser("fit", help="fit preference parameters")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--profile", default=None,
                   help="profile CSV (required for debiased_weighted data)")
    p.add_argument("--reg", type=float, default=None, help="regularization (overrides --reg-c)")
    p.add_argument("--reg-c", type=float, default=1.0,
                   help="constant c in the default lambda = c/(L*B)")
    p.add_argument("--step-size", default="auto")
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=50_000)
    p.add_argument("--out", required=True, help="estimate CSV to write")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("evaluate", help="score an estimate against a reference")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--k", type=int, default=None, help="also report the top-K error")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    add_common(p, model=False)
    p.add_argument("--scenario", type=int, required=True, choices=[1, 2, 3, 4, 5])
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--model", default="btl,tm", help="comma-separated model tokens")
    p.add_argument("--reg-c", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("real-data", help="run the survey-data comparison pipeline")
    add_common(p, model=False)
    p.add_argument("--data", required=True, help="normalized choice CSV")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--reg-c", type=float, default=1.0)
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=_cmd_real_data)

    p = sub.add_parser("select-model", help="likelihood-based model selection")
    add_common(p, model=False)
    p.add_argument("--data", required=True)
    p.add_argument("--profile", default=None)
    p.add_argument("--candidates", default="btl,tm")
    p.add_argument("--reg", type=float, default=None)
    p.add_argument("--reg-c", type=float, default=1.0)
    p.set_defaults(func=_cmd_select_model)

    p = sub.add_parser("budget", help="check the collected privacy budget")
    p.add_argument("--epsilons", required=True,
                   help="comma-separated budgets or a profile CSV path")
    p.add_argument("--alpha", type=float, required=True, help="collection threshold")
    p.set_defaults(func=_cmd_budget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_DATA
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
