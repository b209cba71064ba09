"""Shallow graph convolutional networks ``(1/M) sum_m a_m^T sigma(b_m * x + c_m)``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .conv import conv_norm, operator_norm
from .errors import DegenerateTargetError, InvalidInputError
from .spectral import SpectralBasis

MODES = ("spectral_signal", "poly_filter")
RUAE_REGULARIZER = 1e-6


def _parse_p(p):
    if p in (np.inf, "inf", "infinity", float("inf")):
        return np.inf
    p = float(p)
    if p < 1:
        raise InvalidInputError(f"norm exponent must be >= 1, got {p}")
    return int(p) if p.is_integer() else p


def dual_exponent(p):
    p = _parse_p(p)
    if p == 1:
        return np.inf
    if p == np.inf:
        return 1
    return p / (p - 1)


def vector_norm(v, p) -> np.ndarray:
    """l^p norm along the last axis."""
    p = _parse_p(p)
    v = np.abs(np.asarray(v, dtype=float))
    if p == np.inf:
        return v.max(axis=-1, initial=0.0)
    return (v**p).sum(axis=-1) ** (1.0 / p)


@dataclass(frozen=True)
class NormConfig:
    """Norm on signals, its dual, the convolution norm and domain constants.

    ``conv_norm_kind="auto"`` picks ``coop_p`` (induced by ``p_norm``) for
    raw-signal kernels and ``cofi`` for polynomial-coefficient kernels.
    Defaults describe ``Omega = [-1, 1]^N`` under the l-infinity norm, where
    ``D0 = D1 = D2 = D3 = 1``.
    """

    p_norm: object = np.inf
    conv_norm_kind: str = "auto"
    D0: float = 1.0
    D1: float = 1.0
    D2: float = 1.0
    D3: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p_norm", _parse_p(self.p_norm))
        if self.p_norm not in (1, 2, np.inf):
            raise InvalidInputError("p_norm must be 1, 2 or inf")
        if self.conv_norm_kind not in ("auto", "coop", "cofi"):
            raise InvalidInputError(f"unknown conv_norm_kind {self.conv_norm_kind!r}")
        for name in ("D0", "D1", "D2", "D3"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")

    @property
    def dual(self):
        return dual_exponent(self.p_norm)

    def coop_kind(self) -> str:
        return {1: "coop_1", 2: "coop_2", np.inf: "coop_inf"}[self.p_norm]


class Neuron(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class NetworkParams:
    """Parameters of M neurons stacked row-wise.

    ``a`` and ``c`` are ``(M, N)``. In ``spectral_signal`` mode ``b`` is
    ``(M, N)`` (one convolving signal per neuron); in ``poly_filter`` mode it
    is ``(M, L + 1)``, the coefficients of ``sum_l b(l) S^l`` over the single
    shift of ``basis``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: SpectralBasis = field(repr=False, compare=False)
    mode: str = "poly_filter"

    def __post_init__(self):
        a, b, c = (np.atleast_2d(np.array(v, dtype=float)) for v in (self.a, self.b, self.c))
        n = self.basis.n
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown conv mode {self.mode!r}")
        if a.shape[0] < 1:
            raise InvalidInputError("a network needs at least one neuron")
        if a.shape != c.shape or a.shape[1] != n:
            raise InvalidInputError(f"a and c must be (M, {n}); got {a.shape}, {c.shape}")
        if b.shape[0] != a.shape[0]:
            raise InvalidInputError("b must have one row per neuron")
        if self.mode == "spectral_signal" and b.shape[1] != n:
            raise InvalidInputError(f"spectral_signal kernels must have length {n}")
        if self.mode == "poly_filter" and self.basis.k != 1:
            raise InvalidInputError("poly_filter mode needs a single-shift basis")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def M(self) -> int:
        return self.a.shape[0]

    @property
    def N(self) -> int:
        return self.a.shape[1]

    @property
    def L(self) -> int | None:
        return self.b.shape[1] - 1 if self.mode == "poly_filter" else None

    @property
    def neurons(self) -> list[Neuron]:
        return [Neuron(*t) for t in zip(self.a, self.b, self.c)]

    @classmethod
    def from_neurons(cls, neurons, basis, mode="poly_filter") -> "NetworkParams":
        neurons = list(neurons)
        return cls(
            np.stack([n[0] for n in neurons]),
            np.stack([n[1] for n in neurons]),
            np.stack([n[2] for n in neurons]),
            basis,
            mode,
        )

    @classmethod
    def zeros(cls, basis, M, L=None, mode="poly_filter") -> "NetworkParams":
        width = basis.n if mode == "spectral_signal" else L + 1
        return cls(np.zeros((M, basis.n)), np.zeros((M, width)), np.zeros((M, basis.n)), basis, mode)

    def with_arrays(self, a=None, b=None, c=None) -> "NetworkParams":
        return replace(
            self,
            a=self.a if a is None else a,
            b=self.b if b is None else b,
            c=self.c if c is None else c,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b.ravel(), self.c.ravel()])

    def from_flat(self, theta) -> "NetworkParams":
        theta = np.asarray(theta, dtype=float)
        na, nb = self.a.size, self.b.size
        return self.with_arrays(
            theta[:na].reshape(self.a.shape),
            theta[na : na + nb].reshape(self.b.shape),
            theta[na + nb :].reshape(self.c.shape),
        )

    def to_json(self, hex_floats: bool = False) -> str:
        enc = float.hex if hex_floats else float

        def arr(v):
            return [enc(float(t)) for t in v]

        return json.dumps(
            {
                "M": self.M,
                "L": self.L,
                "mode": self.mode,
                "hex": hex_floats,
                "neurons": [{"a": arr(a), "b": arr(b), "c": arr(c)} for a, b, c in self.neurons],
            }
        )

    @classmethod
    def from_json(cls, text: str, basis: SpectralBasis) -> "NetworkParams":
        obj = json.loads(text)
        dec = float.fromhex if obj.get("hex") else float
        neurons = [
            Neuron(*(np.array([dec(t) for t in nrn[key]]) for key in ("a", "b", "c")))
            for nrn in obj["neurons"]
        ]
        return cls.from_neurons(neurons, basis, obj["mode"])


def relu(t):
    return np.maximum(t, 0.0)


def relu_smooth(t, eps: float):
    """Quadratic-smoothed ReLU and its derivative.

    Value is ``t`` for ``t >= eps``, ``(t + eps)**2 / (4 eps)`` on
    ``(-eps, eps)`` and 0 below; the derivative ``1``, ``(t + eps) / (2 eps)``,
    ``0`` on the same pieces equals ``(relu(t + eps) - relu(t - eps)) / (2 eps)``.
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    t = np.asarray(t, dtype=float)
    mid = (t > -eps) & (t < eps)
    value = np.where(t >= eps, t, np.where(mid, (t + eps) ** 2 / (4 * eps), 0.0))
    deriv = np.where(t >= eps, 1.0, np.where(mid, (t + eps) / (2 * eps), 0.0))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def _activation(z, activation, eps):
    if activation == "relu":
        return relu(z)
    if activation == "smooth":
        return relu_smooth(z, eps)[0]
    raise InvalidInputError(f"unknown activation {activation!r}")


def _stack(params: NetworkParams, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != params.N:
        raise InvalidInputError(f"signal length {X.shape[1]} does not match graph order {params.N}")
    return X, single


def shift_powers(basis: SpectralBasis, X, L: int) -> np.ndarray:
    """``(L + 1, S, N)`` stack of ``S^l x_i`` computed through the eigenbasis."""
    Xh = X @ basis.U
    lam = basis.spectrum[:, 0]
    return np.stack([(Xh * lam**l) @ basis.U.T for l in range(L + 1)])


def preactivations(params: NetworkParams, X, powers=None) -> np.ndarray:
    """``(M, S, N)`` array of ``b_m * x_i + c_m``."""
    if params.mode == "poly_filter":
        if powers is None:
            powers = shift_powers(params.basis, X, params.L)
        Z = np.einsum("ml,lsn->msn", params.b, powers)
    else:
        U = params.basis.U
        Xh = X @ U
        beta = params.b @ U
        Z = np.einsum("sk,mk,nk->msn", Xh, beta, U)
    return Z + params.c[:, None, :]


def forward(params: NetworkParams, X, activation: str = "relu", eps: float = 1e-5):
    """Network output for one signal ``(N,)`` or a stack ``(S, N)``."""
    X, single = _stack(params, X)
    Z = preactivations(params, X)
    out = np.einsum("mn,msn->s", params.a, _activation(Z, activation, eps)) / params.M
    return float(out[0]) if single else out


def kernel_bias_norms(params: NetworkParams, normcfg: NormConfig | None = None) -> np.ndarray:
    """``||b_m||_co + ||c_m||`` for each neuron."""
    cfg = normcfg or NormConfig()
    b_co = np.array([kernel_norm(params, b, cfg) for b in params.b])
    return b_co + vector_norm(params.c, cfg.p_norm)


def neuron_norms(params: NetworkParams, normcfg: NormConfig | None = None) -> np.ndarray:
    """``||a_m||_* (||b_m||_co + ||c_m||)`` for each neuron."""
    cfg = normcfg or NormConfig()
    return vector_norm(params.a, cfg.dual) * kernel_bias_norms(params, cfg)


def kernel_norm(params: NetworkParams, b, cfg: NormConfig) -> float:
    kind = cfg.conv_norm_kind
    if kind == "auto":
        kind = "cofi" if params.mode == "poly_filter" else "coop"
    if params.mode == "poly_filter":
        if kind != "cofi":
            raise InvalidInputError("poly_filter kernels use the cofi convolution norm")
        s = operator_norm(params.basis.shifts[0], cfg.p_norm)
        return cfg.D3 * float(np.sum(np.abs(b) * s ** np.arange(len(b))))
    if kind == "coop":
        return conv_norm(params.basis, b, cfg.coop_kind(), cfg.D3)
    return conv_norm(params.basis, b, "cofi", cfg.D3, shift_norm_p=cfg.p_norm)


def path_norm(params: NetworkParams, p=np.inf, normcfg: NormConfig | None = None) -> float:
    """p-path norm: the p-mean over neurons of their neuron norms; max for p=inf."""
    p = _parse_p(p)
    norms = neuron_norms(params, normcfg)
    if p == np.inf:
        return float(norms.max())
    return float(np.mean(norms**p) ** (1.0 / p))


def relu_lipschitz_estimate(p, n: int, trials: int = 10000, seed: int = 0) -> float:
    """Largest observed ``||relu(x) - relu(x')||_p / ||x - x'||_p`` over random pairs."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((trials, n))
    y = rng.standard_normal((trials, n))
    return float(np.max(vector_norm(relu(x) - relu(y), p) / vector_norm(x - y, p)))


def _target_energy(y) -> float:
    y = np.asarray(y, dtype=float)
    energy = float(y @ y)
    if energy == 0:
        raise DegenerateTargetError("targets are identically zero")
    return energy


def rmse(params: NetworkParams, X, y, activation: str = "relu", eps: float = 1e-5) -> float:
    """Relative mean square error ``sum (y_i - f_M(x_i))^2 / ||y||_2^2``."""
    energy = _target_energy(y)
    r = np.asarray(y, dtype=float) - forward(params, np.atleast_2d(X), activation, eps)
    return float(r @ r) / energy


def ruae(
    params: NetworkParams,
    X,
    y,
    regularizer: float = RUAE_REGULARIZER,
    activation: str = "relu",
    eps: float = 1e-5,
) -> float:
    """Relative uniform error ``max|y - f_M| / (max|y| + regularizer)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size < 1:
        raise InvalidInputError("ruae needs at least one sample")
    r = y - forward(params, np.atleast_2d(X), activation, eps)
    return float(np.abs(r).max() / (np.abs(y).max() + regularizer))


@dataclass(frozen=True)
class Gradient:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b.ravel(), self.c.ravel()])


def loss_and_grad(
    params: NetworkParams,
    X,
    y,
    eps: float = 1e-5,
    activation: str = "relu",
    powers=None,
) -> tuple[float, Gradient]:
    """RMSE loss and its approximate gradient over polynomial coefficients.

    With residuals ``z_i = y_i - f_M(x_i)`` and preactivations
    ``p_mi = b_m(S) x_i + c_m``, each component carries the factor
    ``-2 / (M ||y||^2)``::

        dF/da_m    ~ sum_i z_i sigma(p_mi)
        dF/dc_m    ~ sum_i z_i diag(sigma'_app(p_mi)) a_m
        dF/db_m(l) ~ sum_i z_i a_m^T diag(sigma'_app(p_mi)) S^l x_i

    ``activation`` chooses sigma in the forward pass and in dF/da: exact
    ReLU by default, or ``"smooth"`` for the exact gradient of the smoothed
    loss.
    """
    if params.mode != "poly_filter":
        raise InvalidInputError("gradients are defined for poly_filter networks")
    X, _ = _stack(params, X)
    y = np.asarray(y, dtype=float)
    energy = _target_energy(y)
    if powers is None:
        powers = shift_powers(params.basis, X, params.L)
    Z = preactivations(params, X, powers)
    act = _activation(Z, activation, eps)
    dact = relu_smooth(Z, eps)[1]
    pred = np.einsum("mn,msn->s", params.a, act) / params.M
    z = y - pred
    loss = float(z @ z) / energy
    coef = -2.0 / (params.M * energy)
    ga = coef * np.einsum("s,msn->mn", z, act)
    weighted = z[None, :, None] * dact  # (M, S, N)
    gc = coef * weighted.sum(axis=1) * params.a
    gb = coef * np.einsum("mn,msn,lsn->ml", params.a, weighted, powers)
    return loss, Gradient(ga, gb, gc)


def grad(params: NetworkParams, X, y, eps: float = 1e-5, activation: str = "relu") -> Gradient:
    return loss_and_grad(params, X, y, eps, activation)[1]
