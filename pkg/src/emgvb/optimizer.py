"""Training loops: EMGVB on the precision and the MGVB baseline on the covariance.

Each iteration updates the state with the current momentum, draws from the
new state, estimates gradients from those draws (the same draws give the
lower-bound estimate), then folds the gradients into the momentum after
transporting it to the new tangent space.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from . import estimators as est
from .gaussian import NaturalGradientPair, VariationalState
from .models.priors import PriorSpec
from .spd import ComplexRoot, NotPositiveDefinite, RetractionFailed, retract, spd_sqrt_product, symmetrize

__all__ = [
    "OptimizerKind",
    "TrainerConfig",
    "RunTrace",
    "OptimizationError",
    "lr_schedule",
    "should_stop",
    "emgvb_update",
    "mgvb_update",
    "update_momentum",
    "emgvb_step",
    "mgvb_step",
    "mgvb_natgrads",
    "run",
    "run_block_diagonal",
]


class OptimizerKind(str, enum.Enum):
    EMGVB = "emgvb"
    MGVB = "mgvb"


class OptimizationError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        self.iteration = int(iteration)
        super().__init__(f"iteration {iteration}: {message}")


@dataclass(frozen=True)
class TrainerConfig:
    """Hyper-parameters of a run.

    ``l_max_init`` replaces ``l_max`` during the first ``window`` iterations.
    ``snapshot_every`` thins the stored ``mu``/precision history (0 keeps
    none).
    """

    beta: float = 0.05
    omega: float = 0.4
    S: int = 100
    window: int = 30
    patience: int = 500
    t_max: int = 2000
    t_prime: int = 2000
    l_max: float | None = None
    l_max_init: float | None = None
    estimator: est.EstimatorKind = est.EstimatorKind.GAUSSIAN_PRIOR
    control_variates: bool = False
    seed: int = 0
    max_halvings: int = 5
    snapshot_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "estimator", est.EstimatorKind(self.estimator))
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.omega < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        for name in ("S", "window", "patience", "t_prime"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.t_max > 0 and (self.window > self.t_max or self.t_prime > self.t_max):
            raise ValueError("window and t_prime cannot exceed t_max")
        for name in ("l_max", "l_max_init"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.value
        return d


@dataclass
class RunTrace:
    lb_raw: list = field(default_factory=list)
    lb_smooth: list = field(default_factory=list)
    lb_best: list = field(default_factory=list)
    beta_t: list = field(default_factory=list)
    clipped: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    prec: list = field(default_factory=list)
    snapshot_iters: list = field(default_factory=list)
    best_iter: int = 0
    stop_reason: str = ""

    def __len__(self) -> int:
        return len(self.lb_raw)

    def record(self, lb: float, window: int, beta_t: float, clipped: bool) -> bool:
        """Append one iteration; returns True when the smoothed LB improved."""
        self.lb_raw.append(float(lb))
        t = len(self.lb_raw)
        sm = float(np.mean(self.lb_raw[max(0, t - window):]))
        self.lb_smooth.append(sm)
        improved = not self.lb_best or sm > self.lb_best[-1]
        self.lb_best.append(sm if improved else self.lb_best[-1])
        if improved:
            self.best_iter = t
        self.beta_t.append(float(beta_t))
        self.clipped.append(bool(clipped))
        return improved

    def rows(self):
        for i in range(len(self)):
            yield i + 1, self.lb_raw[i], self.lb_smooth[i], self.beta_t[i], int(self.clipped[i])


def lr_schedule(beta: float, t: int, t_prime: int) -> float:
    """``min(beta, beta * t_prime / t)``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return beta if t <= t_prime else beta * t_prime / t


def should_stop(trace: RunTrace, patience: int, t_max: int) -> bool:
    t = len(trace)
    if t == 0:
        raise ValueError("empty trace")
    return t >= t_max or t - trace.best_iter >= patience


# -- single steps ---------------------------------------------------------

def _retract_diag(p, xi):
    out = p + xi + 0.5 * xi * xi / p
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        bad = np.flatnonzero(~(np.isfinite(out) & (out > 0)))
        raise RetractionFailed(int(bad[0]), "retracted diagonal is not positive")
    return out


def emgvb_update(state: VariationalState, mom: NaturalGradientPair, beta_t: float) -> VariationalState:
    """Move ``mu`` along the momentum and retract the precision."""
    mu = state.mu + beta_t * mom.g_mu
    if state.structure.is_diagonal:
        return state.replace(mu=mu, prec=_retract_diag(state.prec, beta_t * mom.g_prec))
    precs = [retract(p, c, beta_t * m) for p, c, m in zip(state.prec, state.cov, mom.g_prec)]
    return state.replace(mu=mu, prec=precs)


def mgvb_update(state: VariationalState, mom: NaturalGradientPair, beta_t: float) -> VariationalState:
    """As :func:`emgvb_update` but retracting the covariance; ``mom.g_prec`` holds the covariance direction."""
    mu = state.mu + beta_t * mom.g_mu
    if state.structure.is_diagonal:
        cov = _retract_diag(state.cov, beta_t * mom.g_prec)
        return VariationalState.from_precision(mu, 1.0 / cov, state.structure)
    covs = [retract(c, p, beta_t * m) for c, p, m in zip(state.cov, state.prec, mom.g_prec)]
    return VariationalState.from_covariance(mu, covs, state.structure)


def _transport_parts(old_pt, old_inv, new_pt, xi, diagonal: bool):
    if diagonal:
        return (new_pt / old_pt) * xi
    out = []
    for a, ainv, b, m in zip(old_pt, old_inv, new_pt, xi):
        e = spd_sqrt_product(b, ainv)
        out.append(symmetrize(e @ m @ e.T))
    return tuple(out)


def update_momentum(old: VariationalState, new: VariationalState, mom: NaturalGradientPair,
                    grads: NaturalGradientPair, omega: float, kind=OptimizerKind.EMGVB) -> NaturalGradientPair:
    """``omega * transport(mom) + (1 - omega) * grads`` (plain average for the mean)."""
    diag = old.structure.is_diagonal
    if OptimizerKind(kind) is OptimizerKind.EMGVB:
        moved = _transport_parts(old.prec, old.cov, new.prec, mom.g_prec, diag)
    else:
        moved = _transport_parts(old.cov, old.prec, new.cov, mom.g_prec, diag)
    return NaturalGradientPair(mom.g_mu, moved) * omega + grads * (1.0 - omega)


def emgvb_step(state, mom, grads, beta_t, omega):
    """One update followed by the momentum refresh with ``grads`` taken at the new state."""
    new = emgvb_update(state, mom, beta_t)
    return new, update_momentum(state, new, mom, grads, omega)


def mgvb_step(state, mom, grads, beta_t, omega):
    new = mgvb_update(state, mom, beta_t)
    return new, update_momentum(state, new, mom, grads, omega, OptimizerKind.MGVB)


def mgvb_natgrads(state: VariationalState, grad_mu, grad_sigma) -> NaturalGradientPair:
    """``(Sigma grad_mu, Sigma grad_Sigma Sigma)`` from euclidean gradients."""
    if state.structure.is_diagonal:
        return NaturalGradientPair(state.cov * grad_mu, state.cov * state.cov * grad_sigma)
    g_mu = np.empty(state.dim)
    g_s = []
    for sl, c, g in zip(state.structure.slices(), state.cov, grad_sigma):
        g_mu[sl] = c @ grad_mu[sl]
        g_s.append(symmetrize(c @ g @ c))
    return NaturalGradientPair(g_mu, tuple(g_s))


# -- training loop --------------------------------------------------------

def _gradients(kind, state, batch, prior, cfg, l_max):
    g_mu, g_sig = est.euclidean_grads(state, batch, cfg.estimator, prior, cfg.control_variates)
    clipped = False
    if l_max is not None:
        g_mu, c1 = est._clip_parts(g_mu, l_max)
        g_sig, c2 = est._clip_parts(g_sig, l_max)
        clipped = c1 or c2
    if kind is OptimizerKind.EMGVB:
        return est.to_natural(state, g_mu, g_sig), clipped
    return mgvb_natgrads(state, g_mu, g_sig), clipped


def run(model, prior: PriorSpec, cfg: TrainerConfig, kind=OptimizerKind.EMGVB,
        init: VariationalState | None = None):
    """Optimize the lower bound from ``init``.

    Returns the state with the highest smoothed lower bound and the trace.
    Data are held by ``model``.  A failed retraction or transport halves the
    step, at most ``cfg.max_halvings`` times; the draws of the iteration are
    reused, so retries do not perturb the random stream.
    """
    kind = OptimizerKind(kind)
    if init is None:
        raise ValueError("an initial state is required")
    if init.dim != model.k or prior.dim != model.k:
        raise ValueError(f"model has {model.k} parameters, state {init.dim}, prior {prior.dim}")
    trace = RunTrace()
    if cfg.t_max == 0:
        trace.stop_reason = "t_max"
        return init, trace

    update = emgvb_update if kind is OptimizerKind.EMGVB else mgvb_update
    rng = np.random.default_rng(cfg.seed)
    d = init.dim

    def clip_at(t):
        if cfg.l_max_init is not None and t <= cfg.window:
            return cfg.l_max_init
        return cfg.l_max

    state = init
    try:
        batch = est.evaluate_draws(model, prior, state, state.draw(rng.standard_normal((cfg.S, d))))
    except (est.NonFiniteLikelihood, FloatingPointError) as exc:
        raise OptimizationError(str(exc), 0) from exc
    mom, _ = _gradients(kind, state, batch, prior, cfg, clip_at(0))
    best = state

    t = 0
    while True:
        t += 1
        beta_t = lr_schedule(cfg.beta, t, cfg.t_prime)
        eps = rng.standard_normal((cfg.S, d))
        step = beta_t
        for attempt in range(cfg.max_halvings + 1):
            try:
                new = update(state, mom, step)
                batch = est.evaluate_draws(model, prior, new, new.draw(eps))
                grads, clipped = _gradients(kind, new, batch, prior, cfg, clip_at(t))
                new_mom = update_momentum(state, new, mom, grads, cfg.omega, kind)
                break
            except (NotPositiveDefinite, ComplexRoot) as exc:
                if attempt == cfg.max_halvings:
                    raise OptimizationError(
                        f"update failed after {cfg.max_halvings} step halvings ({exc})", t
                    ) from exc
                step *= 0.5
            except FloatingPointError as exc:
                raise OptimizationError(str(exc), t) from exc
        lb = est.estimate_lb(batch)
        if not np.isfinite(lb):
            raise OptimizationError("non-finite lower bound estimate", t)
        state, mom = new, new_mom
        if trace.record(lb, cfg.window, step, clipped):
            best = state
        if cfg.snapshot_every and t % cfg.snapshot_every == 0:
            trace.snapshot_iters.append(t)
            trace.mu.append(state.mu.copy())
            trace.prec.append(state.prec if state.structure.is_diagonal else tuple(state.prec))
        if should_stop(trace, cfg.patience, cfg.t_max):
            trace.stop_reason = "t_max" if t >= cfg.t_max else "patience"
            break
    return best, trace


def run_block_diagonal(model, prior: PriorSpec, cfg: TrainerConfig, init: VariationalState,
                       kind=OptimizerKind.EMGVB):
    """:func:`run` for a block-diagonal (or diagonal) posterior.

    Every block is updated with its own precision while a single
    log-likelihood per joint draw feeds all block estimators.
    """
    if init.structure.kind == "full":
        raise ValueError("init must have a block or diagonal structure")
    return run(model, prior, cfg, kind, init)
