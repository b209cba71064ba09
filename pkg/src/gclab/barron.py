"""Discrete Barron measures, Monte Carlo network sampling and the neuron kernel."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMeasureError, InvalidInputError
from .model import (
    NetworkParams,
    NormConfig,
    kernel_bias_norms,
    preactivations,
    relu,
    vector_norm,
)
from .spectral import SpectralBasis

SPHERE_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteBarronMeasure:
    """Weighted atoms ``(a_j, b_j, c_j)`` on the product of unit spheres.

    Atoms are stored as a weight-free :class:`NetworkParams` so that
    evaluation reuses the network code; ``weights`` sum to one.
    """

    atoms: NetworkParams
    weights: np.ndarray
    normcfg: NormConfig = field(default_factory=NormConfig)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.atoms.M,):
            raise InvalidInputError("one weight per atom is required")
        if np.any(w <= 0):
            raise InvalidInputError("weights must be positive")
        if abs(w.sum() - 1) > 1e-12:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, not 1")
        cfg = self.normcfg
        a_dual = vector_norm(self.atoms.a, cfg.dual)
        rest = kernel_bias_norms(self.atoms, cfg)
        if np.abs(a_dual - 1).max() > SPHERE_TOL or np.abs(rest - 1).max() > SPHERE_TOL:
            raise InvalidInputError("atoms must lie on the unit spheres; use normalize_measure")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def basis(self) -> SpectralBasis:
        return self.atoms.basis

    @property
    def size(self) -> int:
        return self.atoms.M

    def features(self, X) -> np.ndarray:
        """``(J, S)`` neuron values ``a_j^T sigma(b_j * x_i + c_j)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = preactivations(self.atoms, X)
        return np.einsum("jn,jsn->js", self.atoms.a, relu(Z))

    def to_json(self) -> str:
        cfg = self.normcfg
        return json.dumps(
            {
                "mode": self.atoms.mode,
                "weights": self.weights.tolist(),
                "atoms": [{"a": a.tolist(), "b": b.tolist(), "c": c.tolist()} for a, b, c in self.atoms.neurons],
                "normcfg": {
                    "p_norm": "inf" if cfg.p_norm == np.inf else cfg.p_norm,
                    "conv_norm_kind": cfg.conv_norm_kind,
                    "D0": cfg.D0,
                    "D1": cfg.D1,
                    "D2": cfg.D2,
                    "D3": cfg.D3,
                },
            }
        )

    @classmethod
    def from_json(cls, text: str, basis: SpectralBasis) -> "DiscreteBarronMeasure":
        obj = json.loads(text)
        atoms = NetworkParams(
            np.array([t["a"] for t in obj["atoms"]]),
            np.array([t["b"] for t in obj["atoms"]]),
            np.array([t["c"] for t in obj["atoms"]]),
            basis,
            obj["mode"],
        )
        return cls(atoms, np.array(obj["weights"]), NormConfig(**obj["normcfg"]))


def normalize_measure(atoms: NetworkParams, weights, normcfg: NormConfig | None = None):
    """Rescale raw atoms onto the unit spheres.

    Each atom is divided as ``a / ||a||_*`` and ``(b, c) / (||b||_co + ||c||)``;
    positive homogeneity of ReLU moves the product of the two factors into
    the weight. Returns ``(measure, scale)`` with
    ``scale = sum_j w_j ||a_j||_* (||b_j||_co + ||c_j||)`` so that
    ``scale * sum_j w'_j phi'_j = sum_j w_j phi_j``. Atoms with zero norm
    represent the zero function and are dropped.
    """
    cfg = normcfg or NormConfig()
    w = np.asarray(weights, dtype=float)
    if w.shape != (atoms.M,) or np.any(w < 0):
        raise InvalidInputError("weights must be nonnegative, one per atom")
    a_dual = vector_norm(atoms.a, cfg.dual)
    bc = kernel_bias_norms(atoms, cfg)
    totals = a_dual * bc
    keep = (totals > 0) & (w > 0)
    if not keep.any():
        raise EmptyMeasureError("every atom is degenerate")
    a_dual, bc = a_dual[keep], bc[keep]
    mass = w[keep] * totals[keep]
    scale = float(mass.sum())
    normalized = NetworkParams(
        atoms.a[keep] / a_dual[:, None],
        atoms.b[keep] / bc[:, None],
        atoms.c[keep] / bc[:, None],
        atoms.basis,
        atoms.mode,
    )
    return DiscreteBarronMeasure(normalized, mass / scale, cfg), scale


def eval_barron(measure: DiscreteBarronMeasure, scale: float, X):
    """``scale * sum_j w_j a_j^T sigma(b_j * x + c_j)`` for one or many signals."""
    X = np.asarray(X, dtype=float)
    out = scale * (measure.weights @ measure.features(X))
    return float(out[0]) if X.ndim == 1 else out


def sample_indices(weights, M: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from a categorical distribution."""
    cdf = np.cumsum(weights)
    idx = np.searchsorted(cdf, rng.random(M) * cdf[-1], side="right")
    return np.minimum(idx, len(weights) - 1)


def sample_network(measure: DiscreteBarronMeasure, M: int, seed=0, scale: float = 1.0) -> NetworkParams:
    """Network of M neurons drawn i.i.d. from the measure, outer weights times ``scale``.

    Every neuron has norm ``scale``, so the infinity path norm equals the
    representation's Barron-norm surrogate.
    """
    if M < 1:
        raise InvalidInputError("M must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = sample_indices(measure.weights, M, rng)
    atoms = measure.atoms
    return NetworkParams(scale * atoms.a[idx], atoms.b[idx], atoms.c[idx], atoms.basis, atoms.mode)


@dataclass(frozen=True)
class RateRow:
    M: int
    mean_error: float
    stderr: float
    bound: float


def approx_rate_experiment(
    measure: DiscreteBarronMeasure,
    scale: float,
    M_list,
    trials: int = 50,
    S_eval: int = 1000,
    seed: int = 0,
) -> list[RateRow]:
    """Mean squared error of sampled networks against the target, per width M.

    Evaluation points are drawn once, uniformly on ``[-1, 1]^N``; each
    (M, trial) pair then samples a fresh network from its own seeded stream.
    """
    M_list = list(M_list)
    if not M_list:
        raise InvalidInputError("M_list must be nonempty")
    if trials < 10:
        raise InvalidInputError("trials must be >= 10")
    root = np.random.default_rng(seed)
    X = root.uniform(-1, 1, (S_eval, measure.basis.n))
    phi = measure.features(X)  # sampled networks are averages of scaled rows
    target = scale * (measure.weights @ phi)
    streams = np.random.SeedSequence(seed).spawn(len(M_list))
    rows = []
    for M, ss in zip(M_list, streams):
        rng = np.random.default_rng(ss)
        errs = np.empty(trials)
        for t in range(trials):
            idx = sample_indices(measure.weights, M, rng)
            approx = scale * phi[idx].mean(axis=0)
            errs[t] = np.mean((approx - target) ** 2)
        rows.append(RateRow(int(M), float(errs.mean()), float(errs.std(ddof=1) / np.sqrt(trials)), scale**2 / M))
    return rows


def loglog_slope(rows) -> float:
    M = np.log([r.M for r in rows])
    e = np.log([r.mean_error for r in rows])
    return float(np.polyfit(M, e, 1)[0])


def rkhs_kernel(measure: DiscreteBarronMeasure, x, x2) -> float:
    f = measure.features(np.stack([np.asarray(x, float), np.asarray(x2, float)]))
    return float(measure.weights @ (f[:, 0] * f[:, 1]))


def rkhs_gram(measure: DiscreteBarronMeasure, X) -> np.ndarray:
    F = measure.features(X)
    G = (F * measure.weights[:, None]).T @ F
    return 0.5 * (G + G.T)


def random_measure(basis: SpectralBasis, n_atoms: int, seed=0, mode: str = "spectral_signal",
                   L: int | None = None, normcfg: NormConfig | None = None):
    """Random atoms with Gaussian entries and Dirichlet weights, normalized."""
    rng = np.random.default_rng(seed)
    n = basis.n
    width = n if mode == "spectral_signal" else L + 1
    atoms = NetworkParams(
        rng.standard_normal((n_atoms, n)),
        rng.standard_normal((n_atoms, width)),
        rng.standard_normal((n_atoms, n)),
        basis,
        mode,
    )
    weights = rng.dirichlet(np.ones(n_atoms))
    return normalize_measure(atoms, weights, normcfg)
