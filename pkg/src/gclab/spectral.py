"""Joint diagonalization of commuting shifts and the graph Fourier transform."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, JointDiagonalizationError
from .graph_core import Graph, ShiftMatrix

DISTINCTNESS_TOL = 1e-10
COMMUTE_TOL = 1e-8
MAX_REDRAWS = 16


@dataclass(frozen=True)
class CommutationReport:
    max_deviation: float
    worst_pair: tuple[int, int] | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


@dataclass(frozen=True)
class SpectralBasis:
    """Orthogonal eigenbasis shared by commuting shifts.

    Attributes
    ----------
    U : np.ndarray
        ``(N, N)`` orthogonal; column ``n`` is the n-th frequency component.
    spectrum : np.ndarray
        ``(N, K)``; row ``n`` is the joint eigenvalue vector.
    ordering : np.ndarray
        Permutation applied to the solver's raw eigenvector order.
    distinctness_gap : float
        Minimum l1 distance between distinct rows of ``spectrum``.
    shifts : tuple of np.ndarray
        The shift matrices that were diagonalized.
    """

    U: np.ndarray
    spectrum: np.ndarray
    ordering: np.ndarray
    distinctness_gap: float
    shifts: tuple

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.spectrum.shape[1]

    @property
    def distinct(self) -> bool:
        return self.distinctness_gap >= DISTINCTNESS_TOL

    def to_dict(self) -> dict:
        return {
            "N": self.n,
            "K": self.k,
            "U": self.U.ravel().tolist(),
            "spectrum": self.spectrum.ravel().tolist(),
            "ordering": self.ordering.tolist(),
            "distinctness_gap": self.distinctness_gap,
            "shifts": [S.ravel().tolist() for S in self.shifts],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SpectralBasis":
        n, k = obj["N"], obj["K"]
        return cls(
            U=_frozen(np.array(obj["U"]).reshape(n, n)),
            spectrum=_frozen(np.array(obj["spectrum"]).reshape(n, k)),
            ordering=_frozen(np.array(obj["ordering"], dtype=int)),
            distinctness_gap=float(obj["distinctness_gap"]),
            shifts=tuple(_frozen(np.array(S).reshape(n, n)) for S in obj["shifts"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SpectralBasis":
        return cls.from_dict(json.loads(text))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=a.dtype)
    a.setflags(write=False)
    return a


def _as_arrays(shifts) -> list[np.ndarray]:
    mats = [np.asarray(s.entries if isinstance(s, ShiftMatrix) else s, dtype=float) for s in shifts]
    if not mats:
        raise InvalidInputError("at least one shift is required")
    n = mats[0].shape[0]
    for S in mats:
        if S.shape != (n, n):
            raise InvalidInputError(f"shift shapes differ: {S.shape} vs {(n, n)}")
    return mats


def check_commuting(shifts, tol: float = COMMUTE_TOL) -> CommutationReport:
    mats = _as_arrays(shifts)
    worst, pair = 0.0, None
    for p in range(len(mats)):
        for q in range(p + 1, len(mats)):
            dev = float(np.abs(mats[p] @ mats[q] - mats[q] @ mats[p]).max())
            if pair is None or dev > worst:
                worst, pair = dev, (p, q)
    return CommutationReport(worst, pair, tol)


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps until the off-diagonal Frobenius mass drops below
    ``tol * ||A||_F``. Returns ``(eigenvalues, eigenvectors)`` unsorted.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-12 * (1 + np.abs(A).max(initial=0))):
        raise InvalidInputError("jacobi_eigh needs a square symmetric matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A**2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise JointDiagonalizationError("Jacobi sweeps did not converge")
    return np.diag(A).copy(), V


def _eigh(A, method):
    if method == "lapack":
        return np.linalg.eigh(A)
    if method == "jacobi":
        return jacobi_eigh(A)
    raise InvalidInputError(f"unknown eigensolver {method!r}")


def _min_gap(values: np.ndarray) -> float:
    if len(values) < 2:
        return np.inf
    return float(np.diff(np.sort(values)).min())


def joint_eigs(shifts, seed: int = 0, method: str = "lapack") -> SpectralBasis:
    """Jointly diagonalize commuting symmetric shifts.

    A single shift goes straight to the eigensolver. Several shifts are
    diagonalized through a random combination ``sum_k c_k S_k`` whose
    eigenvalues are simple; the coefficients are redrawn (up to 16 times)
    from ``seed`` until that holds. Columns are sorted by the l1 norm of the
    joint eigenvalue vector, ties lexicographically, and signed so that each
    column's largest-magnitude entry is positive.
    """
    mats = _as_arrays(shifts)
    n = mats[0].shape[0]
    for k, S in enumerate(mats):
        if not np.allclose(S, S.T, rtol=0, atol=1e-12 * (1 + np.abs(S).max())):
            raise InvalidInputError(f"shift {k} is not symmetric")
    mats = [0.5 * (S + S.T) for S in mats]
    report = check_commuting(mats)
    if not report.passed:
        raise InvalidInputError(
            f"shifts {report.worst_pair} do not commute (deviation {report.max_deviation:.3g})"
        )

    if len(mats) == 1:
        _, V = _eigh(mats[0], method)
    else:
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(MAX_REDRAWS):
            coef = rng.standard_normal(len(mats))
            C = sum(c * S for c, S in zip(coef, mats))
            w, V = _eigh(C, method)
            gap = _min_gap(w)
            if best is None or gap > best[0]:
                best = (gap, V)
            if gap > 1e-8 * (1 + np.abs(C).max()):
                break
        V = best[1]

    spectrum = np.stack([np.einsum("in,ij,jn->n", V, S, V) for S in mats], axis=1)
    for k, S in enumerate(mats):
        D = V.T @ S @ V
        off = np.abs(D - np.diag(np.diag(D))).max()
        if off > 1e-8 * (1 + np.abs(S).max()):
            raise JointDiagonalizationError(
                f"combined spectrum not simple after {MAX_REDRAWS} redraws; "
                f"shift {k} off-diagonal residual {off:.3g}"
            )

    l1 = np.abs(spectrum).sum(axis=1)
    keys = tuple(spectrum[:, k] for k in reversed(range(spectrum.shape[1]))) + (l1,)
    order = np.lexsort(keys)
    U = V[:, order]
    spectrum = spectrum[order]
    lead = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[lead, np.arange(n)])
    signs[signs == 0] = 1.0
    U = U * signs

    if n > 1:
        diffs = np.abs(spectrum[:, None, :] - spectrum[None, :, :]).sum(axis=-1)
        gap = float(diffs[~np.eye(n, dtype=bool)].min())
    else:
        gap = np.inf

    return SpectralBasis(
        U=_frozen(U),
        spectrum=_frozen(spectrum),
        ordering=_frozen(order),
        distinctness_gap=gap,
        shifts=tuple(_frozen(S) for S in mats),
    )


def _check_dim(basis: SpectralBasis, x: np.ndarray):
    if x.shape[-1] != basis.n:
        raise InvalidInputError(f"signal length {x.shape[-1]} does not match graph order {basis.n}")


def gft(basis: SpectralBasis, x) -> np.ndarray:
    """``U^T x``. Accepts one signal ``(N,)`` or a stack ``(S, N)``."""
    x = np.asarray(x, dtype=float)
    _check_dim(basis, x)
    return x @ basis.U


def igft(basis: SpectralBasis, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    _check_dim(basis, omega)
    return omega @ basis.U.T


def basis_cache_key(g: Graph, kinds: Sequence[str], seed: int) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(g.weights).tobytes())
    h.update(json.dumps(list(kinds)).encode())
    h.update(str(int(seed)).encode())
    return h.hexdigest()
