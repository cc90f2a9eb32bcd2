"""Experiment configuration files.

INI syntax with four required sections and two optional ones::

    [data]
    source = conjugate | labor | csv | returns | garch_sim
    ...                       # source-specific keys, see DATA_KEYS
    [model]
    kind = conjugate | logistic | linreg | arch | garch | gjr | egarch | figarch
    q = 1                     # volatility models: lagged variances
    truncation = 1000         # FIGARCH ARCH(inf) truncation
    [prior]
    mu0 = 0                   # scalar or comma list
    sigma0 = 5                # prior covariance scale (or tau = precision)
    [optimizer]
    name = emgvb | mgvb
    structure = full | diagonal | block:8,1
    beta, omega, S, window, patience, t_max, t_prime,
    l_max, l_max_init, estimator, control_variates, seed,
    init_mu (scalar, list or "random"), init_sigma
    [output]
    dir = out
    prefix = run
    density = false
    [mcmc]
    n_samples = 20000
    seed = 0

Relative paths are resolved against the config file's directory.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]

SOURCES = ("conjugate", "labor", "csv", "returns", "garch_sim")
MODELS = ("conjugate", "logistic", "linreg", "arch", "garch", "gjr", "egarch", "figarch")
VOLATILITY = ("arch", "garch", "gjr", "egarch", "figarch")

DATA_KEYS = {
    "conjugate": {"n", "d", "noise_sd", "data_seed", "train_fraction"},
    "labor": {"path", "train_fraction", "shuffle_seed"},
    "csv": {"path", "target", "features", "intercept", "train_fraction", "shuffle_seed"},
    "returns": {"path", "column", "train_fraction", "demean"},
    "garch_sim": {"n", "omega", "alpha", "beta", "gamma", "data_seed", "train_fraction"},
}
MODEL_KEYS = {"kind", "q", "o", "truncation", "noise_sd"}
PRIOR_KEYS = {"mu0", "sigma0", "tau"}
OPT_KEYS = {
    "name", "structure", "beta", "omega", "s", "window", "patience", "t_max", "t_prime", "l_max",
    "l_max_init", "estimator", "control_variates", "seed", "init_mu", "init_sigma", "init_seed",
}
OUTPUT_KEYS = {"dir", "prefix", "density", "predictive_draws"}
MCMC_KEYS = {"n_samples", "seed", "pilot", "step_scale"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    data: dict
    model: dict
    prior: dict
    optimizer: dict
    output: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> dict:
        return {k: dict(getattr(self, k)) for k in ("data", "model", "prior", "optimizer", "output", "mcmc")}

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _num(section, key, value, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r} as {kind.__name__}") from None


def _bool(section, key, value) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")


def _vector(section, key, value):
    if isinstance(value, (int, float)):
        return float(value)
    parts = [p for p in str(value).replace(" ", "").split(",") if p]
    vals = [_num(section, key, p) for p in parts]
    return vals[0] if len(vals) == 1 else vals


def _check_keys(section, got, allowed):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"[{section}] unknown key {extra[0]!r}")


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in ("data", "model", "prior", "optimizer"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    extra = sorted(set(cp.sections()) - {"data", "model", "prior", "optimizer", "output", "mcmc"})
    if extra:
        raise ConfigError(f"unknown section [{extra[0]}]")
    raw = {s: dict(cp.items(s)) for s in cp.sections()}

    data = raw["data"]
    src = data.pop("source", None)
    if src not in SOURCES:
        raise ConfigError(f"[data] source must be one of {', '.join(SOURCES)}; got {src!r}")
    _check_keys("data", data, DATA_KEYS[src])
    data_out = {"source": src}
    for key, val in data.items():
        if key in ("n", "d", "data_seed", "shuffle_seed"):
            data_out[key] = _num("data", key, val, int)
        elif key in ("noise_sd", "train_fraction", "omega", "alpha", "beta", "gamma"):
            data_out[key] = _num("data", key, val)
        elif key in ("intercept", "demean"):
            data_out[key] = _bool("data", key, val)
        elif key == "features":
            data_out[key] = [f.strip() for f in val.split(",") if f.strip()]
        else:
            data_out[key] = val
    if src in ("csv", "returns") and "path" not in data_out:
        raise ConfigError(f"[data] source={src} needs a path")

    model = raw["model"]
    _check_keys("model", model, MODEL_KEYS)
    kind = model.get("kind")
    if kind not in MODELS:
        raise ConfigError(f"[model] kind must be one of {', '.join(MODELS)}; got {kind!r}")
    model_out = {"kind": kind}
    for key in ("q", "o", "truncation"):
        if key in model:
            model_out[key] = _num("model", key, model[key], int)
    if "noise_sd" in model:
        model_out["noise_sd"] = _num("model", "noise_sd", model["noise_sd"])
    compatible = {
        "conjugate": ("conjugate", "csv"),
        "logistic": ("labor", "csv"),
        "linreg": ("csv", "conjugate"),
    }
    allowed_src = compatible.get(kind, ("returns", "garch_sim"))
    if src not in allowed_src:
        raise ConfigError(f"model {kind!r} cannot use data source {src!r}")

    prior = raw["prior"]
    _check_keys("prior", prior, PRIOR_KEYS)
    if ("sigma0" in prior) == ("tau" in prior):
        raise ConfigError("[prior] give exactly one of sigma0 or tau")
    prior_out = {"mu0": _vector("prior", "mu0", prior.get("mu0", "0"))}
    if "sigma0" in prior:
        prior_out["sigma0"] = _num("prior", "sigma0", prior["sigma0"])
        if not prior_out["sigma0"] > 0:
            raise ConfigError("[prior] sigma0 must be positive")
    else:
        prior_out["tau"] = _num("prior", "tau", prior["tau"])
        if not prior_out["tau"] > 0:
            raise ConfigError("[prior] tau must be positive")

    opt = raw["optimizer"]
    _check_keys("optimizer", opt, OPT_KEYS)
    name = opt.get("name", "emgvb").strip().lower()
    if name not in ("emgvb", "mgvb"):
        raise ConfigError(f"[optimizer] unknown optimizer name {name!r}")
    opt_out = {"name": name, "structure": opt.get("structure", "full").strip().lower()}
    st = opt_out["structure"]
    if not (st in ("full", "diagonal") or st.startswith("block:")):
        raise ConfigError(f"[optimizer] unknown structure {st!r}")
    if st.startswith("block:"):
        opt_out["blocks"] = [_num("optimizer", "structure", b, int) for b in st[6:].split(",") if b.strip()]
    for key in ("beta", "omega", "l_max", "l_max_init", "init_sigma"):
        if key in opt:
            opt_out[key] = _num("optimizer", key, opt[key])
    for key in ("s", "window", "patience", "t_max", "t_prime", "seed", "init_seed"):
        if key in opt:
            opt_out["S" if key == "s" else key] = _num("optimizer", key, opt[key], int)
    if "estimator" in opt:
        if opt["estimator"] not in ("h_function", "gaussian_prior_loglik"):
            raise ConfigError(f"[optimizer] unknown estimator {opt['estimator']!r}")
        opt_out["estimator"] = opt["estimator"]
    if "control_variates" in opt:
        opt_out["control_variates"] = _bool("optimizer", "control_variates", opt["control_variates"])
    if "init_mu" in opt:
        v = opt["init_mu"].strip()
        opt_out["init_mu"] = v if v == "random" else _vector("optimizer", "init_mu", v)

    output = raw.get("output", {})
    _check_keys("output", output, OUTPUT_KEYS)
    out = {"dir": output.get("dir", "."), "prefix": output.get("prefix", "run")}
    out["density"] = _bool("output", "density", output.get("density", "false"))
    out["predictive_draws"] = _num("output", "predictive_draws", output.get("predictive_draws", "0"), int)

    mc = raw.get("mcmc", {})
    _check_keys("mcmc", mc, MCMC_KEYS)
    mcmc = {
        "n_samples": _num("mcmc", "n_samples", mc.get("n_samples", "20000"), int),
        "seed": _num("mcmc", "seed", mc.get("seed", "0"), int),
        "pilot": _num("mcmc", "pilot", mc.get("pilot", "2000"), int),
    }
    if "step_scale" in mc:
        mcmc["step_scale"] = _num("mcmc", "step_scale", mc["step_scale"])

    return ExperimentConfig(data_out, model_out, prior_out, opt_out, out, mcmc,
                            Path(base_dir) if base_dir is not None else Path.cwd())


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.resolve().parent)


def as_vector(value, k: int) -> np.ndarray:
    v = np.asarray(value, dtype=float).ravel()
    if v.size == 1:
        return np.full(k, float(v[0]))
    if v.size != k:
        raise ConfigError(f"expected {k} values, got {v.size}")
    return v
