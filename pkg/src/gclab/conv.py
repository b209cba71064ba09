"""Spectral convolution and its polynomial-filter form."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    AssumptionViolatedError,
    InterpolationUnavailableError,
    InvalidInputError,
    LiftingUnavailableError,
)
from .spectral import SpectralBasis, gft

NORM_KINDS = ("coop_1", "coop_2", "coop_inf", "cofi")


def multi_indices(k: int, degree: int) -> list[tuple[int, ...]]:
    """All ``(l_1, ..., l_K)`` with total degree ``<= degree``, graded order."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.product(range(total + 1), repeat=k):
            if sum(combo) == total:
                out.append(combo)
    return out


@dataclass(frozen=True)
class FilterPoly:
    """Multivariate polynomial ``h`` in K shift variables.

    ``terms`` maps multi-indices to monomial coefficients. For K=1 filters
    built by interpolation the Newton form (``newton_nodes``,
    ``newton_coefs``) is kept too and used for evaluation, since it is far
    better conditioned than the monomial expansion.
    """

    k: int
    degree: int
    terms: dict
    newton_nodes: np.ndarray | None = field(default=None, compare=False)
    newton_coefs: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        for idx in self.terms:
            if len(idx) != self.k or sum(idx) > self.degree or min(idx) < 0:
                raise InvalidInputError(f"multi-index {idx} outside K={self.k}, degree {self.degree}")

    @classmethod
    def constant(cls, value: float, k: int = 1) -> "FilterPoly":
        return cls(k, 0, {(0,) * k: float(value)})

    @classmethod
    def from_coefficients(cls, coefs) -> "FilterPoly":
        """Single-shift filter ``sum_l coefs[l] t**l``."""
        coefs = np.asarray(coefs, dtype=float)
        return cls(1, len(coefs) - 1, {(l,): float(c) for l, c in enumerate(coefs)})

    def __call__(self, points) -> np.ndarray:
        """Evaluate at joint-spectrum points ``(N, K)``."""
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        if self.newton_coefs is not None:
            t = P[:, 0]
            out = np.full_like(t, self.newton_coefs[-1])
            for j in range(len(self.newton_coefs) - 2, -1, -1):
                out = out * (t - self.newton_nodes[j]) + self.newton_coefs[j]
            return out
        out = np.zeros(P.shape[0])
        for idx, coef in self.terms.items():
            out = out + coef * np.prod(P ** np.asarray(idx), axis=1)
        return out

    def cofi_norm(self, shift_norms) -> float:
        shift_norms = np.asarray(shift_norms, dtype=float)
        return float(
            sum(abs(c) * np.prod(shift_norms ** np.asarray(idx)) for idx, c in self.terms.items())
        )


@dataclass(frozen=True)
class ConvKernel:
    """A convolving signal ``b`` together with its Fourier coefficients."""

    basis: SpectralBasis = field(repr=False)
    b: np.ndarray
    beta: np.ndarray = field(init=False)

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.shape != (self.basis.n,):
            raise InvalidInputError(f"kernel signal must have shape ({self.basis.n},)")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        beta = gft(self.basis, b)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @cached_property
    def matrix(self) -> np.ndarray:
        U = self.basis.U
        return (U * self.beta) @ U.T


def _kernel(basis, b) -> ConvKernel:
    return b if isinstance(b, ConvKernel) else ConvKernel(basis, b)


def convolve(basis: SpectralBasis, b, x) -> np.ndarray:
    """``b * x = U diag(U^T b) U^T x`` for one signal or a stack ``(S, N)``."""
    kern = _kernel(basis, b)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != basis.n:
        raise InvalidInputError(f"signal length {x.shape[-1]} does not match graph order {basis.n}")
    return x @ kern.matrix  # C is symmetric


def _newton_divided_differences(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef = np.array(y, dtype=float)
    n = len(t)
    for j in range(1, n):
        coef[j:] = (coef[j:] - coef[j - 1 : -1]) / (t[j:] - t[: n - j])
    return coef


def _newton_to_monomial(nodes: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    # Horner on polynomial coefficient arrays (ascending powers)
    poly = np.array([coefs[-1]])
    for j in range(len(coefs) - 2, -1, -1):
        shifted = np.concatenate([[0.0], poly])
        shifted[:-1] -= nodes[j] * poly
        shifted[0] += coefs[j]
        poly = shifted
    return poly


def filter_from_signal(basis: SpectralBasis, b, max_degree: int | None = None) -> FilterPoly:
    """Polynomial ``h`` with ``h(lambda(n)) = u_n^T b`` on the joint spectrum.

    K=1 with ``max_degree >= N - 1`` uses Newton divided differences on the
    N distinct eigenvalues. Otherwise the coefficients are fitted by least
    squares over monomials of total degree ``<= max_degree``, and
    :class:`InterpolationUnavailableError` is raised when the fit misses
    the targets by more than ``1e-8 * max|U^T b|``.
    """
    if not basis.distinct:
        raise AssumptionViolatedError(
            f"joint spectrum is not distinct (gap {basis.distinctness_gap:.3g})"
        )
    beta = gft(basis, b)
    n, k = basis.n, basis.k
    if max_degree is None:
        max_degree = n - 1
    if max_degree < 0:
        raise InvalidInputError("max_degree must be nonnegative")
    tol = 1e-8 * max(np.abs(beta).max(), np.finfo(float).tiny)

    if k == 1 and max_degree >= n - 1:
        t = basis.spectrum[:, 0]
        coefs = _newton_divided_differences(t, beta)
        mono = _newton_to_monomial(t, coefs)
        h = FilterPoly(
            1,
            n - 1,
            {(l,): float(c) for l, c in enumerate(mono)},
            newton_nodes=t.copy(),
            newton_coefs=coefs,
        )
    else:
        idx = multi_indices(k, max_degree)
        V = np.stack([np.prod(basis.spectrum ** np.asarray(i), axis=1) for i in idx], axis=1)
        sol, *_ = np.linalg.lstsq(V, beta, rcond=None)
        h = FilterPoly(k, max_degree, {i: float(c) for i, c in zip(idx, sol)})

    residual = float(np.abs(h(basis.spectrum) - beta).max())
    if residual > tol:
        raise InterpolationUnavailableError(
            f"no polynomial of degree <= {max_degree} interpolates the spectrum "
            f"(residual {residual:.3g})",
            residual,
        )
    return h


def signal_from_filter(basis: SpectralBasis, h: FilterPoly) -> np.ndarray:
    """``b = h(S_1, ..., S_K) U 1``, evaluated in the spectral domain."""
    if h.k != basis.k:
        raise InvalidInputError(f"filter has K={h.k} variables, basis has K={basis.k}")
    return basis.U @ h(basis.spectrum)


def apply_filter(basis: SpectralBasis, h: FilterPoly, x) -> np.ndarray:
    """Spatial evaluation ``h(S_1, ..., S_K) x`` by repeated shift products."""
    x = np.asarray(x, dtype=float)
    shifts = basis.shifts
    if h.newton_coefs is not None:
        S = shifts[0]
        y = h.newton_coefs[-1] * x
        for j in range(len(h.newton_coefs) - 2, -1, -1):
            y = y @ S - h.newton_nodes[j] * y + h.newton_coefs[j] * x
        return y
    out = np.zeros_like(x)
    for idx, coef in h.terms.items():
        y = x
        for S, power in zip(shifts, idx):
            for _ in range(power):
                y = y @ S
        out = out + coef * y
    return out


def wl_basis(basis: SpectralBasis, L: int) -> tuple[np.ndarray, int]:
    """Spanning signals ``S_1^l1 ... S_K^lK U 1`` of W_L and their numerical rank.

    Rank is counted from singular values above ``1e-10`` times the largest,
    after normalizing each signal to unit length.
    """
    if not 0 <= L <= basis.n - 1:
        raise InvalidInputError(f"L must lie in [0, {basis.n - 1}], got {L}")
    ones = basis.U.sum(axis=1)
    signals = []
    for idx in multi_indices(basis.k, L):
        v = ones
        for S, power in zip(basis.shifts, idx):
            for _ in range(power):
                v = S @ v
        signals.append(v)
    B = np.stack(signals)
    norms = np.linalg.norm(B, axis=1)
    nz = norms > 0
    if not nz.any():
        return B, 0
    s = np.linalg.svd(B[nz] / norms[nz, None], compute_uv=False)
    return B, int(np.sum(s > 1e-10 * s[0]))


def operator_norm(M: np.ndarray, p) -> float:
    if p == 1:
        return float(np.abs(M).sum(axis=0).max())
    if p == 2:
        return float(np.linalg.norm(M, 2))
    if p in (np.inf, "inf"):
        return float(np.abs(M).sum(axis=1).max())
    raise InvalidInputError(f"unsupported operator norm p={p!r}")


def conv_norm(
    basis: SpectralBasis,
    b,
    norm_kind: str,
    D3: float = 1.0,
    h: FilterPoly | None = None,
    shift_norm_p=2,
) -> float:
    """Convolution norm of ``b`` scaled by ``D3 = sup_{x in Omega} ||x||``.

    ``coop_p`` is the induced p-norm of the convolution matrix. ``cofi`` is
    ``sum |h_l| prod ||S_k||^{l_k}`` over a filter representing ``b``
    (derived by interpolation when ``h`` is not given); ``shift_norm_p``
    selects the operator norm used for ``||S_k||``.
    """
    if norm_kind not in NORM_KINDS:
        raise InvalidInputError(f"unknown norm kind {norm_kind!r}; expected one of {NORM_KINDS}")
    if norm_kind == "cofi":
        if h is None:
            if not np.any(np.asarray(_kernel(basis, b).b)):
                return 0.0
            h = filter_from_signal(basis, _kernel(basis, b).b)
        shift_norms = [operator_norm(S, shift_norm_p) for S in basis.shifts]
        return D3 * h.cofi_norm(shift_norms)
    kern = _kernel(basis, b)
    if norm_kind == "coop_2":
        return D3 * float(np.abs(kern.beta).max())
    p = 1 if norm_kind == "coop_1" else np.inf
    return D3 * operator_norm(kern.matrix, p)


def lift_neuron(basis: SpectralBasis, v, w: float, n0: int, tol: float = 1e-8):
    """GCNN neuron ``(a, b, c)`` reproducing the classic neuron ``sigma(v^T x + w)``.

    With ``a = e_n0``, ``c = w e_n0`` and ``b`` whose Fourier coefficients
    are ``(U^T v)(n) / U[n0, n]``, the identity
    ``a^T sigma(b * x + c) = sigma(v^T x + w)`` holds for every ``x``.
    Requires every entry of row ``n0`` of ``U`` to be nonzero.
    """
    n = basis.n
    if not 0 <= n0 < n:
        raise InvalidInputError(f"vertex {n0} out of range")
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise InvalidInputError(f"v must have shape ({n},)")
    row = basis.U[n0]
    small = np.flatnonzero(np.abs(row) < tol)
    if small.size:
        raise LiftingUnavailableError(
            f"row {n0} of U has a (near-)zero entry at column {int(small[0])}", int(small[0])
        )
    if not basis.distinct:
        raise AssumptionViolatedError("joint spectrum is not distinct")
    e = np.zeros(n)
    e[n0] = 1.0
    b = basis.U @ (gft(basis, v) / row)
    return e, b, w * e
