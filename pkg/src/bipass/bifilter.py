"""Bi-directional low-pass graph filter solved by ADMM.

The filter denoises an n-by-d signal matrix F jointly along a node graph
(Laplacian L1, applied from the left) and a feature graph (Laplacian L2,
applied from the right) by minimizing

    ||Y - F||_F^2 + lam1 * tr(Y^T L1 Y) + lam2 * tr(Y L2 Y^T).

The objective splits into two single-direction smoothing problems coupled
by a consensus constraint; ADMM alternates between them with penalty p and
dual variable Z. Two update variants are provided: ``exact`` solves each
subproblem's linear system, ``taylor`` replaces each inverse filter with
its first-order expansion I - (2*lam/(1+p)) L. The returned estimate is
the mean of the two smoothed iterates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .spectral import _dense

VARIANTS = ("exact", "taylor")


@dataclass(frozen=True)
class FilterParams:
    """Hyperparameters of the bi-directional filter.

    `lambda1`/`lambda2` weight smoothing along the node/feature graph,
    `p` is the ADMM penalty, `k` the fixed iteration count. For the
    taylor variant the expansion is trustworthy only while the scaled
    Laplacian spectra stay inside [-1, 1]; with normalized Laplacians
    (spectrum in [0, 2]) that means 4*lam/(1+p) <= 1. The bound is
    enforced as a warning, not an error: hyperparameter choices well
    above it are used deliberately in the experiment presets and work
    in practice at small k.
    """

    lambda1: float
    lambda2: float
    p: float
    k: int = 2
    variant: str = "taylor"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if self.p <= 0:
            raise ValueError("penalty p must be positive")
        if self.k < 1:
            raise ValueError("iteration count k must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.variant == "taylor":
            ratio = 4.0 * max(self.lambda1, self.lambda2) / (1.0 + self.p)
            if ratio > 1.0:
                warnings.warn(
                    "taylor spectral-radius bound exceeded: "
                    f"4*lambda/(1+p) = {ratio:.3g} > 1",
                    stacklevel=2,
                )

    @property
    def c1(self) -> float:
        """Left filter coefficient 2*lambda1/(1+p)."""
        return 2.0 * self.lambda1 / (1.0 + self.p)

    @property
    def c2(self) -> float:
        """Right filter coefficient 2*lambda2/(1+p)."""
        return 2.0 * self.lambda2 / (1.0 + self.p)


@dataclass
class AdmmTrace:
    """Per-iteration snapshots of the ADMM state."""

    y1: list = field(default_factory=list)
    y2: list = field(default_factory=list)
    z: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)

    def record(self, y1, y2, z):
        self.y1.append(y1.copy())
        self.y2.append(y2.copy())
        self.z.append(z.copy())
        self.primal_residual.append(float(np.linalg.norm(y2 - y1)))

    def __len__(self) -> int:
        return len(self.y1)


def _update_y1_taylor(F, L1, y2, z, p, c1):
    rhs = F + p * y2 + z
    return (rhs - c1 * (L1 @ rhs)) / (1.0 + p)


def _update_y2_taylor(F, L2, y1, z, p, c2):
    rhs = F + p * y1 - z
    return (rhs - c2 * (rhs @ L2)) / (1.0 + p)


def _update_y1_exact(F, solve1, y2, z, p):
    return solve1(F + p * y2 + z) / (1.0 + p)


def _update_y2_exact(F, solve2, y1, z, p):
    return solve2(F + p * y1 - z) / (1.0 + p)


def admm_bifilter(F, L1, L2, params: FilterParams):
    """Run k ADMM iterations of the bi-directional filter.

    F is n-by-d, L1 an n-by-n (sparse or dense) symmetric Laplacian, L2 a
    d-by-d dense symmetric Laplacian. Initialization is Y1 = Y2 = F and
    Z = 0; each iteration updates Y1, then Y2, then the dual Z. Returns
    the mean (Y1 + Y2)/2 after k iterations together with the iteration
    trace. Raises if shapes disagree or an iterate goes non-finite (the
    message names the offending iteration).
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("F must be a 2-D matrix")
    n, d = F.shape
    L2 = np.asarray(_dense(L2), dtype=np.float64)
    if L1.shape != (n, n) or L2.shape != (d, d):
        raise ValueError(f"dimension mismatch: F {F.shape}, L1 {L1.shape}, L2 {L2.shape}")

    p, c1, c2 = params.p, params.c1, params.c2
    if params.variant == "exact":
        # Both system matrices are constant across iterations; factor once.
        A1 = np.eye(n) + c1 * _dense(L1)
        A2 = np.eye(d) + c2 * L2
        f1 = scipy.linalg.cho_factor(A1)
        f2 = scipy.linalg.cho_factor(A2)
        solve1 = lambda rhs: scipy.linalg.cho_solve(f1, rhs)
        solve2 = lambda rhs: scipy.linalg.cho_solve(f2, rhs.T).T
    else:
        L1 = L1 if sp.issparse(L1) else np.asarray(L1, dtype=np.float64)

    y1 = F.copy()
    y2 = F.copy()
    z = np.zeros_like(F)
    trace = AdmmTrace()
    for it in range(params.k):
        if params.variant == "exact":
            y1 = _update_y1_exact(F, solve1, y2, z, p)
            y2 = _update_y2_exact(F, solve2, y1, z, p)
        else:
            y1 = _update_y1_taylor(F, L1, y2, z, p, c1)
            y2 = _update_y2_taylor(F, L2, y1, z, p, c2)
        z = z + p * (y2 - y1)
        if not (np.isfinite(y1).all() and np.isfinite(y2).all() and np.isfinite(z).all()):
            raise FloatingPointError(f"non-finite ADMM iterate at iteration {it}")
        trace.record(y1, y2, z)
    return (y1 + y2) / 2.0, trace


def admm_one_step_closed_form(F, L1, L2, params: FilterParams):
    """Closed forms of the first taylor-variant iteration (test reference).

    With Y1 = Y2 = F and Z = 0 the first iteration collapses to
        Y1 = (I - c1*L1) F
        Y2 = (I - p*c1/(1+p) * L1) F (I - c2*L2)
    with c_i = 2*lambda_i/(1+p).
    """
    F = np.asarray(F, dtype=np.float64)
    n, d = F.shape
    if L1.shape != (n, n) or L2.shape != (d, d):
        raise ValueError(f"dimension mismatch: F {F.shape}, L1 {L1.shape}, L2 {L2.shape}")
    p, c1, c2 = params.p, params.c1, params.c2
    L2 = _dense(L2)
    y1 = F - c1 * (L1 @ F)
    left = F - (p * c1 / (1.0 + p)) * (L1 @ F)
    y2 = left - c2 * (left @ L2)
    return y1, y2


def degenerate_filter(F, L1, lambda1: float, lambda2: float) -> np.ndarray:
    """Single-direction limit of the joint smoother when L2 is the identity.

    Solves ((1 + lambda2) I + lambda1 L1) Y = F by a dense Cholesky solve.
    """
    F = np.asarray(F, dtype=np.float64)
    A = _dense(L1)
    n = A.shape[0]
    if F.shape[0] != n:
        raise ValueError(f"dimension mismatch: L1 {A.shape}, F {F.shape}")
    system = (1.0 + lambda2) * np.eye(n) + lambda1 * A
    c = scipy.linalg.cho_factor(system)
    return scipy.linalg.cho_solve(c, F)
