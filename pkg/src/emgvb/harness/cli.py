"""Command line front end.

    emgvb run <config> [--out DIR]
    emgvb metrics <result.json>
    emgvb mcmc <config> [--out DIR]
    emgvb density <result.json> --param I [--out FILE]

Exit codes: 0 ok, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..gaussian import PosteriorStructure, VariationalState
from .experiment import _csv_text, build_transform, density_grid, run_experiment, run_mcmc
from ..models.transforms import back_transform_density

__all__ = ["main"]


def _read_result(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"cannot read result {path}: {exc}")


def _state_from_result(res) -> VariationalState:
    st = res["structure"]
    structure = PosteriorStructure(st["kind"], tuple(st["sizes"]))
    cov = res["cov"]
    if structure.kind == "full":
        cov = np.asarray(cov)
    elif structure.kind == "block":
        cov = [np.asarray(b) for b in cov]
    else:
        cov = np.asarray(cov)
    return VariationalState.from_covariance(np.asarray(res["mean"]), cov, structure)


def _cmd_metrics(args) -> int:
    res = _read_result(args.result)
    print(f"lower bound (best smoothed): {res['lb_best']:.6g}  iterations: {res['n_iter']} ({res['stop_reason']})")
    for split in ("train", "test"):
        if split in res["metrics"]:
            vals = "  ".join(f"{k}={v:.6g}" for k, v in sorted(res["metrics"][split].items()))
            print(f"{split:5s} {vals}")
    if "kl_to_exact" in res:
        print(f"KL to exact posterior: {res['kl_to_exact']:.3e}")
    return 0


def _cmd_density(args) -> int:
    res = _read_result(args.result)
    state = _state_from_result(res)
    if not 0 <= args.param < state.dim:
        print(f"param must lie in [0, {state.dim - 1}]", file=sys.stderr)
        return 2
    transform = build_transform(res["config"]["model"], state.dim)
    grid = density_grid(state, transform, args.param)
    dens = back_transform_density(state, transform, grid, param=args.param)
    name = transform.names[args.param]
    text = _csv_text(("param", "name", "theta", "density"),
                     [(args.param, name, float(t), float(v)) for t, v in zip(grid, dens)])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emgvb", description="Gaussian variational inference experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="optimize and write trace/result artifacts")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides [output] dir)")
    m = sub.add_parser("metrics", help="print the metrics stored in a result file")
    m.add_argument("result")
    c = sub.add_parser("mcmc", help="random-walk Metropolis reference run")
    c.add_argument("config")
    c.add_argument("--out")
    d = sub.add_parser("density", help="marginal density of one parameter on the constrained scale")
    d.add_argument("result")
    d.add_argument("--param", type=int, required=True)
    d.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "run":
        return run_experiment(args.config, args.out)
    if args.command == "mcmc":
        return run_mcmc(args.config, args.out)
    if args.command == "metrics":
        return _cmd_metrics(args)
    return _cmd_density(args)


if __name__ == "__main__":
    sys.exit(main())
