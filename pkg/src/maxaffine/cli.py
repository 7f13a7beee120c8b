"""Command-line interface: dataset synthesis, fitting, initialization, grids.

Subcommands
-----------
gen         synthesize a planted max-affine dataset to CSV (+ .meta sidecar)
fit         run the sparse fit on a dataset CSV, from a file/spectral/random init
init        run the spectral initializer and save support/factor/projector
experiment  run a Monte Carlo grid described by a flat key-value config file

Exit codes: 0 success, 2 configuration error, 3 search-guard trip,
4 input/output error.  The environment variable MAXAFFINE_SEED overrides
the default master seed of any subcommand whose --seed flag is omitted.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, GuardError
from .experiment import load_config, run_experiment
from .model import generate_dataset, generate_ground_truth
from .search import covering_search, random_search_init
from .spectral import sparse_spectral, sparse_spectral_sweep
from .spgd import SpgdConfig, fit_spgd

SEED_ENV_VAR = "MAXAFFINE_SEED"


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from exc
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxaffine",
        description="Sparse max-affine regression: synthesis, fitting, "
        "spectral initialization, and Monte Carlo grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="synthesize a planted dataset to CSV")
    gen.add_argument("--d", type=int, required=True, help="ambient dimension")
    gen.add_argument("--s", type=int, required=True, help="joint support size")
    gen.add_argument("--k", type=int, required=True, help="number of affine pieces")
    gen.add_argument("--n", type=int, required=True, help="sample count")
    gen.add_argument("--sigma-z", type=float, default=0.0, help="noise std dev")
    gen.add_argument(
        "--covariate-dist", choices=("gaussian", "uniform"), default="gaussian"
    )
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="dataset CSV path")
    gen.add_argument(
        "--truth-out",
        default=None,
        help="ground-truth parameter CSV (default: <out>.truth.csv)",
    )

    fit = sub.add_parser("fit", help="sparse fit on a dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV from gen")
    fit.add_argument("--s", type=int, required=True)
    fit.add_argument("--k", type=int, required=True)
    fit.add_argument(
        "--init",
        default="spectral",
        help="'spectral', 'random', or a parameter CSV to warm-start from",
    )
    fit.add_argument(
        "--init-mode",
        choices=("covering", "random"),
        default="random",
        help="search mode on the spectral subspace",
    )
    fit.add_argument("--candidates", type=int, default=16, help="random-search draws")
    fit.add_argument("--r", type=float, default=1.0, help="covering radius")
    fit.add_argument("--max-iters", type=int, default=500)
    fit.add_argument("--rel-tol", type=float, default=1e-6)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", required=True, help="fitted parameter CSV path")
    fit.add_argument(
        "--trace",
        default=None,
        help="optional CSV of per-iterate loss and cell shares",
    )

    init = sub.add_parser("init", help="spectral subspace + support estimation")
    init.add_argument("--data", required=True)
    init.add_argument("--s", type=int, required=True)
    init.add_argument("--k", type=int, required=True)
    init.add_argument(
        "--lam",
        "--lambda",
        dest="lam",
        default="sweep",
        help="penalty level, or 'sweep' for the cross-validated grid",
    )
    init.add_argument("--seed", type=int, default=None)
    init.add_argument("--out-support", required=True, help="support index list (txt)")
    init.add_argument("--out-factor", required=True, help="s x k factor CSV")
    init.add_argument("--out-projector", required=True, help="d x d relaxation CSV")

    exp = sub.add_parser("experiment", help="run a Monte Carlo grid")
    exp.add_argument("--config", required=True, help="flat key-value config file")
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--threads", type=int, default=1, help="max parallel workers")
    exp.add_argument(
        "--svg", action="store_true", help="also render heatmap.svg (2-axis grids)"
    )
    return parser


def _cmd_gen(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    streams = np.random.SeedSequence([seed]).spawn(2)
    truth = generate_ground_truth(
        d=args.d, s=args.s, k=args.k, rng=np.random.default_rng(streams[0])
    )
    data = generate_dataset(
        truth,
        n=args.n,
        covariate_dist=args.covariate_dist,
        sigma_z=args.sigma_z,
        rng=np.random.default_rng(streams[1]),
        seed=seed,
    )
    io.write_dataset(args.out, data, extra_meta={"s": args.s, "k": args.k})
    truth_out = args.truth_out or f"{args.out}.truth.csv"
    io.write_params(truth_out, truth)
    print(f"wrote {args.n} samples to {args.out}; truth to {truth_out}")
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    data = io.read_dataset(args.data)
    seed = _resolve_seed(args.seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    if args.init == "spectral":
        est = sparse_spectral_sweep(data, s=args.s, k=args.k, rng=rng)
        if args.init_mode == "covering":
            candidate = covering_search(
                data, args.k, est.factor, est.support, r=args.r
            )
            start = candidate.lifted
        else:
            start = random_search_init(
                data, args.s, args.k, est.factor, est.support, args.candidates, rng
            )
    elif args.init == "random":
        start = random_search_init(
            data,
            args.s,
            args.k,
            np.eye(data.d),
            np.arange(data.d),
            args.candidates,
            rng,
        )
    else:
        start = io.read_params(args.init)
        if start.d != data.d or start.k != args.k:
            raise ConfigError(
                f"init file has (k={start.k}, d={start.d}), expected "
                f"(k={args.k}, d={data.d})"
            )
    cfg = SpgdConfig(s=args.s, max_iters=args.max_iters, rel_tol=args.rel_tol)
    report = fit_spgd(start, data, cfg)
    io.write_params(args.out, report.final)
    if args.trace is not None:
        header = ["iter", "loss"] + [f"pi{j + 1}" for j in range(args.k)]
        lines = [",".join(header)]
        for t, (lo, pi) in enumerate(zip(report.loss_trace, report.pi_trace)):
            lines.append(
                ",".join([str(t), "%.17g" % lo] + ["%.17g" % p for p in pi])
            )
        Path(args.trace).write_text("\n".join(lines) + "\n")
    print(
        f"iters={report.iters_run} converged={report.converged} "
        f"loss={report.loss_trace[-1]:.6g} out={args.out}"
    )
    return 0


def _cmd_init(args: argparse.Namespace) -> int:
    data = io.read_dataset(args.data)
    if args.lam == "sweep":
        seed = _resolve_seed(args.seed)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
        est = sparse_spectral_sweep(data, s=args.s, k=args.k, rng=rng)
    else:
        try:
            lam = float(args.lam)
        except ValueError as exc:
            raise ConfigError(
                f"--lam must be a number or 'sweep', got {args.lam!r}"
            ) from exc
        est = sparse_spectral(data, s=args.s, k=args.k, lam=lam)
    Path(args.out_support).write_text(
        "\n".join(str(int(i)) for i in est.support) + "\n"
    )
    np.savetxt(args.out_factor, est.factor, fmt="%.17g", delimiter=",")
    np.savetxt(args.out_projector, est.relaxed, fmt="%.17g", delimiter=",")
    print(
        f"lam={est.lam:.6g} support={list(map(int, est.support))} "
        f"admm_iters={est.admm_iters}"
    )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg = dataclasses.replace(cfg, out=args.out)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            cfg = dataclasses.replace(cfg, master_seed=int(env))
        except ValueError as exc:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from exc
    grid = run_experiment(cfg, threads=args.threads, svg=args.svg)
    print(
        f"{cfg.kind}: {len(grid.cells)} cells x {cfg.trials} trials -> {args.out}"
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "fit": _cmd_fit,
    "init": _cmd_init,
    "experiment": _cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"guard tripped: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
