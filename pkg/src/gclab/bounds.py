"""Closed-form width, covering, Rademacher and generalization bounds.

The empirical Rademacher estimator works over a finite family of networks,
so it lower-bounds the complexity of the full Barron ball and can be checked
against the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidFamilyError, InvalidInputError
from .model import NormConfig, forward, path_norm


@dataclass(frozen=True)
class BoundReport:
    bound_value: float
    empirical_value: float | None = None
    tolerance: float = 0.0
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.empirical_value is None:
            return True
        return self.bound_value >= self.empirical_value - self.tolerance


def _check_eps(eps: float):
    if not 0 < eps < 0.5:
        raise InvalidInputError(f"epsilon must lie in (0, 1/2), got {eps}")


def covering_bound_sparse(N: int, s: int, eps: float) -> int:
    """Smallest M with ``M >= 2 ln 2 / eps^2 + (2 s / eps^2) ln(e N / (s eps))``."""
    _check_eps(eps)
    if not 1 <= s <= N:
        raise InvalidInputError(f"sparsity must satisfy 1 <= s <= N, got s={s}, N={N}")
    rhs = 2 * math.log(2) / eps**2 + (2 * s / eps**2) * math.log(math.e * N / (s * eps))
    return math.ceil(rhs)


def covering_bound_ball(N: int, eps: float) -> int:
    """Smallest M with ``M >= 2 ln 2 / eps^2 + (2 N / eps^2) ln(3 / eps)``."""
    _check_eps(eps)
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    rhs = 2 * math.log(2) / eps**2 + (2 * N / eps**2) * math.log(3 / eps)
    return math.ceil(rhs)


def min_width(eps: float, n_ext: int) -> int:
    """Smallest M with ``2 n_ext exp(-M eps^2 / 2) < 1``."""
    _check_eps(eps)
    if n_ext < 1:
        raise InvalidInputError("covering number must be >= 1")
    return math.floor(2 * math.log(2 * n_ext) / eps**2) + 1


def width_condition(M: int, eps: float, n_ext: int) -> bool:
    return 2 * n_ext * math.exp(-M * eps**2 / 2) < 1


def rademacher_bound(Q: float, S: int, N: int, D0: float = 1.0, D2: float = 1.0) -> float:
    """``2 Q (D0 D2 sqrt(2 ln 2N) + sqrt(2 ln 2)) / sqrt(S)``."""
    if Q < 0 or S < 1 or N < 1 or D0 <= 0 or D2 <= 0:
        raise InvalidInputError("rademacher_bound needs Q >= 0 and positive S, N, D0, D2")
    return 2 * Q * (D0 * D2 * math.sqrt(2 * math.log(2 * N)) + math.sqrt(2 * math.log(2))) / math.sqrt(S)


def generalization_bound(Q: float, S: int, N: int, delta: float, D0: float = 1.0, D2: float = 1.0) -> float:
    """Uniform deviation bound holding with probability ``1 - delta``."""
    if not 0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    if Q < 0 or S < 1 or N < 1 or D0 <= 0 or D2 <= 0:
        raise InvalidInputError("generalization_bound needs Q >= 0 and positive S, N, D0, D2")
    inner = 4 * D0 * D2 * math.sqrt(math.log(2 * N)) + 4 * math.sqrt(math.log(2)) + math.sqrt(math.log(1 / delta))
    return inner * math.sqrt(2) * Q / math.sqrt(S)


@dataclass(frozen=True)
class RademacherEstimate:
    estimate: float
    stderr: float
    trials: int


def empirical_rademacher(
    family,
    X,
    trials: int = 1000,
    seed: int = 0,
    Q: float | None = None,
    normcfg: NormConfig | None = None,
) -> RademacherEstimate:
    """Monte Carlo ``E max_f (1/S) sum_i xi_i f(x_i)`` over a finite family.

    When ``Q`` is given every member must have 1-path norm (its Barron-norm
    surrogate) at most ``Q``.
    """
    family = list(family)
    if not family:
        raise InvalidFamilyError("family must be nonempty")
    if trials < 2:
        raise InvalidInputError("trials must be >= 2")
    if Q is not None:
        for k, params in enumerate(family):
            pn = path_norm(params, 1, normcfg)
            if pn > Q * (1 + 1e-12):
                raise InvalidFamilyError(f"member {k} has path norm {pn:.6g} > Q={Q}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.stack([forward(f, X) for f in family])  # (n_family, S)
    rng = np.random.default_rng(seed)
    xi = rng.choice(np.array([-1.0, 1.0]), size=(trials, X.shape[0]))
    sups = (xi @ F.T).max(axis=1) / X.shape[0]
    return RademacherEstimate(float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(trials)), trials)


def rademacher_report(family, X, Q: float, trials: int = 1000, seed: int = 0,
                      normcfg: NormConfig | None = None) -> BoundReport:
    cfg = normcfg or NormConfig()
    family = list(family)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S, N = X.shape
    est = empirical_rademacher(family, X, trials, seed, Q, cfg)
    bound = rademacher_bound(Q, S, N, cfg.D0, cfg.D2)
    return BoundReport(
        bound,
        est.estimate,
        3 * est.stderr,
        {"Q": Q, "S": S, "N": N, "D0": cfg.D0, "D2": cfg.D2, "trials": trials, "seed": seed,
         "family_size": len(family), "stderr": est.stderr},
    )
