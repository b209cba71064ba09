"""Momentum gradient descent for shallow GCNNs, plus gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedError, InvalidInputError
from .model import NetworkParams, loss_and_grad, rmse, ruae, shift_powers
from .spectral import SpectralBasis

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    ``init="uniform"`` draws every parameter from ``U[-delta, delta]``;
    ``init="paper_zero"`` starts at the origin, which is a stationary point
    of the approximate gradient, so nothing moves.
    """

    momentum: float = 0.9
    learning_rate: float = 0.003
    iterations: int = 300
    init: str = "uniform"
    delta: float = 0.1
    seed: int = 0
    eps: float = 1e-5
    record_every: int = 1
    activation: str = "relu"
    minibatch: int | None = None

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must lie in [0, 1)")
        if not self.learning_rate >= 0:
            raise InvalidInputError("learning_rate must be nonnegative")
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.init not in ("uniform", "paper_zero"):
            raise InvalidInputError(f"unknown init {self.init!r}")
        if self.record_every < 1:
            raise InvalidInputError("record_every must be >= 1")
        if self.minibatch is not None and self.minibatch < 1:
            raise InvalidInputError("minibatch must be positive")


@dataclass
class Trajectory:
    params_final: NetworkParams
    losses: list = field(default_factory=list)
    ruae_final: float = float("nan")
    checkpoints: dict = field(default_factory=dict)

    @property
    def iterations(self) -> np.ndarray:
        return np.array([it for it, _ in self.losses], dtype=int)

    @property
    def rmse(self) -> np.ndarray:
        return np.array([v for _, v in self.losses])


def init_params(basis: SpectralBasis, M: int, L: int, cfg: TrainConfig) -> NetworkParams:
    params = NetworkParams.zeros(basis, M, L)
    if cfg.init == "paper_zero":
        return params
    rng = np.random.default_rng(cfg.seed)
    theta = rng.uniform(-cfg.delta, cfg.delta, size=params.flat().size)
    return params.from_flat(theta)


def sgdm(X, y, basis: SpectralBasis, M: int, L: int, cfg: TrainConfig, checkpoints=(), params=None):
    """Train with the momentum update ``Temp <- mu Temp + Grad; Theta <- Theta - gamma Temp``.

    ``Temp`` starts at the gradient of the initial parameters. Gradients are
    full-batch unless ``cfg.minibatch`` is set. Losses are recorded at
    iteration 0, every ``record_every`` steps and at the last step;
    ``checkpoints`` lists iterations whose parameters are kept.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape != (len(y), basis.n):
        raise InvalidInputError(f"X must be ({len(y)}, {basis.n}), got {X.shape}")
    if params is None:
        params = init_params(basis, M, L, cfg)
    powers = shift_powers(basis, X, L)
    batch_rng = np.random.default_rng([cfg.seed, 1])

    def step_grad(p):
        if cfg.minibatch is None or cfg.minibatch >= len(y):
            return loss_and_grad(p, X, y, cfg.eps, cfg.activation, powers)
        idx = np.sort(batch_rng.choice(len(y), cfg.minibatch, replace=False))
        _, g = loss_and_grad(p, X[idx], y[idx], cfg.eps, cfg.activation, powers[:, idx])
        return rmse(p, X, y, cfg.activation, cfg.eps), g

    theta = params.flat()
    loss, g = step_grad(params)
    temp = g.flat()
    traj = Trajectory(params, [(0, loss)])
    wanted = set(int(c) for c in checkpoints)
    if 0 in wanted:
        traj.checkpoints[0] = params
    for n in range(1, cfg.iterations + 1):
        if n > 1:
            loss, g = step_grad(params)
            if (n - 1) % cfg.record_every == 0:
                traj.losses.append((n - 1, loss))
        if loss > DIVERGENCE_LIMIT or not np.isfinite(loss):
            traj.params_final = params
            raise DivergedError(f"RMSE {loss:.3g} exceeded {DIVERGENCE_LIMIT:g} at iteration {n - 1}", traj)
        temp = cfg.momentum * temp + g.flat()
        theta = theta - cfg.learning_rate * temp
        params = params.from_flat(theta)
        if n in wanted:
            traj.checkpoints[n] = params
    final = rmse(params, X, y, cfg.activation, cfg.eps)
    traj.losses.append((cfg.iterations, final))
    traj.params_final = params
    traj.ruae_final = ruae(params, X, y, activation=cfg.activation, eps=cfg.eps)
    if final > DIVERGENCE_LIMIT or not np.isfinite(final):
        raise DivergedError(f"RMSE {final:.3g} exceeded {DIVERGENCE_LIMIT:g}", traj)
    return traj


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    max_rel_error_all: float
    n_excluded: int
    analytic: np.ndarray = field(repr=False)
    numeric: np.ndarray = field(repr=False)
    near_kink: np.ndarray = field(repr=False)

    @property
    def flagged(self) -> bool:
        return self.max_rel_error_all > 1e-4


def _near_kink_mask(params: NetworkParams, X, eps: float, width: float) -> np.ndarray:
    from .model import preactivations

    Z = preactivations(params, np.atleast_2d(X))
    # kinks of sigma_eps at +-eps (and of relu at 0) all lie inside [-eps, eps]
    close = np.abs(Z) < eps + width  # (M, S, N)
    mask_a = np.zeros(params.a.shape, dtype=bool)
    mask_b = np.repeat(close.any(axis=(1, 2))[:, None], params.b.shape[1], axis=1)
    mask_c = close.any(axis=1)
    return np.concatenate([mask_a.ravel(), mask_b.ravel(), mask_c.ravel()])


def grad_check(
    params: NetworkParams,
    X,
    y,
    step: float = 1e-6,
    eps: float = 1e-5,
    activation: str = "smooth",
    kink_width: float | None = None,
    floor: float = 1e-8,
) -> GradCheckResult:
    """Compare analytic gradients with central differences of the loss.

    Relative error per component is ``|g - fd| / max(|g|, |fd|, floor)``.
    Components whose preactivations come within ``kink_width`` (default
    ``10 eps``) of the smoothing interval are excluded from
    ``max_rel_error`` but counted in ``max_rel_error_all``.
    """
    if not step > 0:
        raise InvalidInputError("step must be positive")
    if kink_width is None:
        kink_width = 10 * eps
    _, g = loss_and_grad(params, X, y, eps, activation)
    analytic = g.flat()
    theta = params.flat()
    numeric = np.empty_like(theta)
    for j in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += step
        tm[j] -= step
        fp = rmse(params.from_flat(tp), X, y, activation, eps)
        fm = rmse(params.from_flat(tm), X, y, activation, eps)
        numeric[j] = (fp - fm) / (2 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom
    near = _near_kink_mask(params, X, eps, kink_width)
    ok = rel[~near]
    return GradCheckResult(
        max_rel_error=float(ok.max()) if ok.size else 0.0,
        max_rel_error_all=float(rel.max()) if rel.size else 0.0,
        n_excluded=int(near.sum()),
        analytic=analytic,
        numeric=numeric,
        near_kink=near,
    )
