"""Build a problem from a config, run it and write its artifacts."""
from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .. import _kernels
from ..gaussian import PosteriorStructure, VariationalState, kl_gaussian
from ..models import (
    GarchFamily,
    GarchSpec,
    GarchTransform,
    KnownNoiseLinearRegression,
    LinearRegression,
    LogisticRegression,
    PriorSpec,
)
from ..models.transforms import CoordinatewiseTransform, back_transform_density
from ..optimizer import OptimizationError, OptimizerKind, TrainerConfig, run
from .config import VOLATILITY, ConfigError, ExperimentConfig, as_vector, load_config
from .data import CSVParseError, Dataset, load_csv, load_labor, make_conjugate, simulate_garch
from .mcmc import metropolis_sample
from .metrics import classification_metrics, regression_metrics

__all__ = ["Problem", "build_problem", "build_transform", "run_experiment", "run_mcmc", "density_table",
           "TRACE_COLUMNS"]

TRACE_COLUMNS = ("iter", "lb_raw", "lb_smooth", "beta_t", "clipped")
GRID_POINTS = 512


@dataclass
class Problem:
    model: object
    prior: PriorSpec
    init: VariationalState
    trainer: TrainerConfig
    kind: OptimizerKind
    data: Dataset

    @property
    def train(self) -> Dataset:
        return self.data.train

    @property
    def test(self) -> Dataset | None:
        return self.data.test


def _load_data(cfg: ExperimentConfig) -> Dataset:
    d = cfg.data
    frac = d.get("train_fraction", 1.0)
    src = d["source"]
    if src == "conjugate":
        ds = make_conjugate(d.get("n", 100), d.get("d", 5), d.get("noise_sd", 1.0), d.get("data_seed", 0))
        return ds.split(frac)
    if src == "labor":
        path = cfg.path(d["path"]) if "path" in d else None
        return load_labor(path, d.get("train_fraction", 0.75), d.get("shuffle_seed", 0))
    if src == "csv":
        if "target" not in d or "features" not in d:
            raise ConfigError("[data] source=csv needs target and features")
        cols = load_csv(cfg.path(d["path"]), [d["target"]] + d["features"])
        feats = [cols[f] for f in d["features"]]
        names = tuple(d["features"])
        if d.get("intercept", True):
            feats.insert(0, np.ones(cols[d["target"]].shape[0]))
            names = ("intercept",) + names
        return Dataset(cols[d["target"]], np.column_stack(feats), None, names).split(frac, d.get("shuffle_seed"))
    if src == "returns":
        col = d.get("column", "return")
        r = load_csv(cfg.path(d["path"]), [col])[col]
        if d.get("demean", True):
            r = r - r.mean()
        return Dataset(r).split(d.get("train_fraction", 0.8))
    r = simulate_garch(d.get("n", 2000), d.get("omega", 0.1), d.get("alpha", 0.2), d.get("beta", 0.7),
                       d.get("data_seed", 0), gamma=d.get("gamma", 0.0))
    return Dataset(r).split(d.get("train_fraction", 1.0))


def _garch_spec(model_cfg) -> GarchSpec:
    kind = model_cfg["kind"]
    q = model_cfg.get("q", 0 if kind == "arch" else 1)
    o = model_cfg.get("o", 1 if kind == "gjr" else 0)
    return GarchSpec(kind, 1, o, q, model_cfg.get("truncation", 1000))


def _build_model(cfg: ExperimentConfig, train: Dataset):
    kind = cfg.model["kind"]
    if kind in VOLATILITY:
        return GarchFamily(_garch_spec(cfg.model), train.y)
    if kind == "logistic":
        return LogisticRegression(train.x, train.y, train.names or None)
    if kind == "linreg":
        return LinearRegression(train.x, train.y, train.names or None)
    return KnownNoiseLinearRegression(train.x, train.y, cfg.model.get("noise_sd", 1.0), train.names or None)


def build_transform(model_cfg: dict, k: int):
    kind = model_cfg["kind"]
    if kind in VOLATILITY:
        return GarchTransform(_garch_spec(model_cfg))
    if kind == "linreg":
        return LinearRegression(np.zeros((1, k - 1)), np.zeros(1)).transform
    return CoordinatewiseTransform.identity(k)


def _structure(opt: dict, k: int) -> PosteriorStructure:
    st = opt.get("structure", "full")
    if st == "full":
        return PosteriorStructure.full(k)
    if st == "diagonal":
        return PosteriorStructure.diagonal(k)
    blocks = opt["blocks"]
    if sum(blocks) != k:
        raise ConfigError(f"[optimizer] blocks sum to {sum(blocks)} but the model has {k} parameters")
    return PosteriorStructure.block(blocks)


def build_problem(cfg: ExperimentConfig) -> Problem:
    data = _load_data(cfg)
    model = _build_model(cfg, data.train)
    k = model.k
    pc = cfg.prior
    mu0 = as_vector(pc["mu0"], k)
    prior = PriorSpec(mu0, tau=pc["tau"]) if "tau" in pc else PriorSpec(mu0, tau=1.0 / pc["sigma0"])

    opt = cfg.optimizer
    keys = ("beta", "omega", "S", "window", "patience", "t_max", "t_prime", "l_max", "l_max_init",
            "estimator", "control_variates", "seed")
    try:
        trainer = TrainerConfig(**{key: opt[key] for key in keys if key in opt})
    except ValueError as exc:
        raise ConfigError(f"[optimizer] {exc}") from None
    init_sigma = opt.get("init_sigma", 0.05)
    if not init_sigma > 0:
        raise ConfigError("[optimizer] init_sigma must be positive")
    init_mu = opt.get("init_mu", 0.0)
    if isinstance(init_mu, str):
        rng = np.random.default_rng(opt.get("init_seed", trainer.seed))
        mu1 = rng.normal(0.0, np.sqrt(init_sigma), k)
    else:
        mu1 = as_vector(init_mu, k)
    structure = _structure(opt, k)
    prec = np.full(k, 1.0 / init_sigma) if structure.is_diagonal else np.eye(k) / init_sigma
    init = VariationalState.from_precision(mu1, prec, structure)
    return Problem(model, prior, init, trainer, OptimizerKind(opt["name"]), data)


def _metrics(problem: Problem, cfg: ExperimentConfig, q: VariationalState) -> dict:
    model = problem.model
    mu = q.mu
    out = {"train": {"loglik": model.loglik(mu)}}
    test = problem.test
    kind = cfg.model["kind"]
    if kind == "logistic":
        n_pred = cfg.output.get("predictive_draws", 0)

        def probs(x):
            if n_pred > 0:
                draws = q.sample(n_pred, np.random.default_rng(problem.trainer.seed))
                return expit(x @ draws.T).mean(axis=1)
            return model.predict_proba(mu, x)

        out["train"].update(classification_metrics(problem.train.y, probs(problem.train.x)))
        if test is not None:
            out["test"] = {"loglik": LogisticRegression(test.x, test.y).loglik(mu)}
            out["test"].update(classification_metrics(test.y, probs(test.x)))
    elif kind in VOLATILITY:
        r = problem.train.y
        out["train"].update(regression_metrics(r * r, model.fitted(mu)))
        if test is not None:
            full = model.with_returns(problem.data.y, backcast=model.backcast)
            s2 = full.fitted(mu)[len(r):]
            rt = test.y
            out["test"] = {"loglik": float(-0.5 * np.sum(np.log(2 * np.pi * s2) + rt * rt / s2))}
            out["test"].update(regression_metrics(rt * rt, s2))
    else:
        fit = problem.train.x @ (mu[:-1] if kind == "linreg" else mu)
        out["train"].update(regression_metrics(problem.train.y, fit))
        if test is not None:
            mtest = type(model)(test.x, test.y, *((model.noise_sd,) if kind == "conjugate" else ()))
            out["test"] = {"loglik": mtest.loglik(mu)}
            out["test"].update(regression_metrics(test.y, test.x @ (mu[:-1] if kind == "linreg" else mu)))
    return out


def _cov_payload(q: VariationalState):
    if q.structure.is_diagonal:
        return [float(v) for v in q.cov]
    if q.structure.kind == "full":
        return np.asarray(q.cov[0]).tolist()
    return [np.asarray(b).tolist() for b in q.cov]


def density_grid(state: VariationalState, transform, param: int, n: int = GRID_POINTS) -> np.ndarray:
    mu = state.mu[param]
    sd = float(np.sqrt(state.dense_cov()[param, param]))
    if transform.coordinatewise:
        m = transform.maps[param]
        psi = np.linspace(mu - 5.0 * sd, mu + 5.0 * sd, n)
        theta = m.fwd(psi)
        lo, hi = m.support
        theta = theta[(theta > lo) & (theta < hi)]
        return np.unique(theta)
    draws = transform.forward(state.sample(4000, np.random.default_rng(0)))[:, param]
    lo, hi = np.quantile(draws, [0.0005, 0.9995])
    pad = 0.1 * (hi - lo)
    return np.linspace(lo - pad, hi + pad, n)


def density_table(state: VariationalState, transform, params=None) -> list:
    rows = []
    for i in range(state.dim) if params is None else params:
        grid = density_grid(state, transform, i)
        dens = back_transform_density(state, transform, grid, param=i)
        rows += [(i, transform.names[i], float(t), float(v)) for t, v in zip(grid, dens)]
    return rows


class _Artifacts:
    """Atomic writers that remember what they wrote, for cleanup on failure."""

    def __init__(self, directory: Path):
        self.dir = directory
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        target = self.dir / name
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(target)
        return target

    def rollback(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def execute(cfg: ExperimentConfig) -> dict:
    """Run the optimization described by ``cfg`` and return the result payload and trace."""
    problem = build_problem(cfg)
    t0 = time.perf_counter()
    q, trace = run(problem.model, problem.prior, problem.trainer, problem.kind, problem.init)
    wall = time.perf_counter() - t0
    transform = problem.model.transform
    result = {
        "names": list(transform.names),
        "mean": [float(v) for v in q.mu],
        "cov": _cov_payload(q),
        "structure": {"kind": q.structure.kind, "sizes": list(q.structure.sizes)},
        "constrained_mean": [float(v) for v in transform.forward(q.mu)],
        "lb_best": float(max(trace.lb_smooth)) if len(trace) else None,
        "best_iter": trace.best_iter,
        "n_iter": len(trace),
        "stop_reason": trace.stop_reason,
        "metrics": _metrics(problem, cfg, q),
        "config": cfg.to_dict(),
        "seed": problem.trainer.seed,
        "backend": _kernels.BACKEND,
        "wall_clock": wall,
    }
    if isinstance(problem.model, KnownNoiseLinearRegression):
        exact = problem.model.exact_posterior(problem.prior)
        result["kl_to_exact"] = kl_gaussian(q, exact)
        result["log_evidence"] = problem.model.log_evidence(problem.prior)
    return {"problem": problem, "state": q, "trace": trace, "result": result}


def run_experiment(config_path, out_dir=None) -> int:
    """CLI entry for ``run``: 0 on success, 1 on runtime failure, 2 on config errors."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    directory = Path(out_dir) if out_dir is not None else cfg.path(cfg.output["dir"])
    arts = _Artifacts(directory)
    prefix = cfg.output["prefix"]
    try:
        out = execute(cfg)
        arts.write(f"{prefix}_trace.csv", _csv_text(TRACE_COLUMNS, out["trace"].rows()))
        if cfg.output.get("density"):
            rows = density_table(out["state"], out["problem"].model.transform)
            arts.write(f"{prefix}_density.csv", _csv_text(("param", "name", "theta", "density"), rows))
        arts.write(f"{prefix}_result.json", _json_text(out["result"]))
    except ConfigError as exc:
        arts.rollback()
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OptimizationError, CSVParseError, FileNotFoundError, OSError, ValueError, FloatingPointError) as exc:
        arts.rollback()
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        arts.rollback()
        raise
    return 0


def run_mcmc(config_path, out_dir=None) -> int:
    try:
        cfg = load_config(config_path)
        problem = build_problem(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CSVParseError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    mc = cfg.mcmc
    res = metropolis_sample(problem.model, problem.prior, problem.init.mu, mc["n_samples"],
                            mc.get("step_scale"), mc["seed"], mc["pilot"])
    transform = problem.model.transform
    payload = {
        "names": list(transform.names),
        "mean": res.mean.tolist(),
        "sd": res.sd.tolist(),
        "constrained_mean": transform.forward(res.chain).mean(axis=0).tolist(),
        "acceptance_rate": res.acceptance_rate,
        "ess": res.ess().tolist(),
        "n_kept": int(res.chain.shape[0]),
        "seed": mc["seed"],
    }
    directory = Path(out_dir) if out_dir is not None else cfg.path(cfg.output["dir"])
    _Artifacts(directory).write(f"{cfg.output['prefix']}_mcmc.json", _json_text(payload))
    return 0
