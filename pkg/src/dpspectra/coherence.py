"""Coherence measures of singular-vector bases.

Coherence depends on the chosen factorization, so every value here is
computed from a :class:`~dpspectra.matrix.SpectralFactorization` (normally
the deterministic Jacobi oracle) and reports its provenance.  Columns that
belong to zero singular values are an arbitrary completion of the basis and
are left out unless ``include_null=True``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix import SpectralFactorization, exact_factorization

ORTHONORMAL_TOL = 1e-8
NULL_TOL = 1e-10


def _active(F: SpectralFactorization, include_null: bool) -> int:
    if include_null:
        return F.sigma.size
    return max(F.rank(NULL_TOL), 1)


def _dims(F, m, n):
    if m is None or n is None:
        m, n = F.left.shape[0], F.right.shape[0]
    return m, n


def mu(F: SpectralFactorization, m=None, n=None, *, include_null=False) -> float:
    """``max(m ||U||_inf^2, n ||V||_inf^2)`` over the factorization's columns."""
    m, n = _dims(F, m, n)
    r = _active(F, include_null)
    u = F.left[:, :r]
    v = F.right[:, :r]
    return float(max(m * np.max(u * u), n * np.max(v * v)))


def mu_k(F: SpectralFactorization, k: int, m=None, n=None) -> float:
    """Coherence restricted to the top-k singular vector pairs."""
    m, n = _dims(F, m, n)
    if not 1 <= k <= F.sigma.size:
        raise ValueError(f"k must lie in [1, {F.sigma.size}], got {k}")
    u = F.left[:, :k]
    v = F.right[:, :k]
    return float(max(m * np.max(u * u), n * np.max(v * v)))


def mu0(U) -> float:
    """``(n / r) max_j ||U_(j)||^2`` for an n x r column-orthonormal U."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    n, r = U.shape
    gram = U.T @ U
    if np.max(np.abs(gram - np.eye(r))) > ORTHONORMAL_TOL:
        raise ValueError("columns are not orthonormal")
    return float(n / r * np.max(np.sum(U * U, axis=1)))


@dataclass
class CoherenceReport:
    mu: float
    mu0: float
    mu_k: dict = field(default_factory=dict)
    rank: int = 0
    svd_provenance: str = ""

    def to_dict(self):
        return {
            "mu": self.mu,
            "mu0": self.mu0,
            "mu_k": {str(k): v for k, v in self.mu_k.items()},
            "rank": self.rank,
            "svd_provenance": self.svd_provenance,
        }


def coherence_report(A, ks=(), *, include_null=False, factorization=None) -> CoherenceReport:
    F = factorization if factorization is not None else exact_factorization(A)
    m, n = F.left.shape[0], F.right.shape[0]
    r = _active(F, include_null)
    return CoherenceReport(
        mu=mu(F, m, n, include_null=include_null),
        mu0=mu0(F.left[:, :r]),
        mu_k={k: mu_k(F, k, m, n) for k in ks},
        rank=F.rank(NULL_TOL),
        svd_provenance=F.provenance,
    )
