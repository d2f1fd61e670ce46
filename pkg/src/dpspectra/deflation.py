"""Rank-k approximation by repeated private power iteration and deflation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coherence import mu as coherence_mu
from .errors import PreconditionError
from .matrix import SymmetricMatrix, as_symmetric, exact_factorization, matvec
from .power import PpiConfig, ppi
from .privacy import NoiseLedger, PrivacyBudget, compose_advanced, sample_laplace

# Slack constant for admissible deflation inputs; used only as a filter.
DEFLATION_C0 = 10.0
# Constant of the O(i log n) term in the coherence-growth bound.
GROWTH_CONST = 32.0


def split_budget(budget: PrivacyBudget, k: int) -> tuple[float, float]:
    """Per-stage ``(eps / sqrt(4 k ln(1/delta)), delta / k)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < budget.delta < 1:
        raise ValueError("rank-k needs delta in (0, 1)")
    return budget.epsilon / math.sqrt(4.0 * k * math.log(1.0 / budget.delta)), budget.delta / k


@dataclass
class RankKResult:
    vectors: list = field(default_factory=list)
    sigma_hat: list = field(default_factory=list)
    approximation: np.ndarray | None = None
    residual: np.ndarray | None = None
    residuals: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    ledger: NoiseLedger = field(default_factory=NoiseLedger)
    stage_budget: tuple = (math.inf, 0.0)
    failed_stage: int | None = None

    @property
    def failed(self) -> bool:
        return self.failed_stage is not None

    @property
    def k(self) -> int:
        return len(self.vectors)

    def oracle_residual_norm(self, A) -> float:
        """``||A - B_k||_2`` by the exact oracle (non-private)."""
        diff = np.asarray(A) - self.approximation
        return float(exact_factorization(SymmetricMatrix(_symmetrise(diff))).sigma[0])

    def budget_accounting(self, delta_prime=None) -> dict:
        """Advanced composition over the 2k stage mechanisms."""
        eps_s, delta_s = self.stage_budget
        k = max(self.k, 1)
        delta_prime = delta_s * k if delta_prime is None else delta_prime
        if not 0 < eps_s < 1:
            return {"per_stage": [eps_s, delta_s], "advanced": None}
        total = compose_advanced(2 * k, eps_s, delta_s, delta_prime)
        return {"per_stage": [eps_s, delta_s], "advanced": [total.epsilon, total.delta]}


def _symmetrise(a):
    # Deflation updates are symmetric in exact arithmetic; rounding is not.
    return (a + a.T) / 2.0


def rank_k_approx(A, k, T, budget: PrivacyBudget, C, rng, *, gate=True) -> RankKResult:
    """Rank-k approximation ``B_k = sum_i sigma_hat_i v_i v_i^T``.

    Stage i runs PPI on the current residual ``A_{i-1}`` with the per-stage
    budget, releases ``sigma_hat_i = ||A_{i-1} v_i|| + Lap(1/eps')`` and
    deflates.  Both ``B_k`` and the residual ``A_k = A - B_k`` are returned;
    ``residuals`` holds ``A_0, ..., A_k``.  A tripped gate stops the loop and
    sets ``failed_stage``.
    """
    A = as_symmetric(A)
    n = A.n
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    result = RankKResult(approximation=np.zeros((n, n)), residual=np.array(A.array))
    result.residuals.append(np.array(A.array))
    if k == 0:
        return result
    eps_s, delta_s = split_budget(budget, k)
    result.stage_budget = (eps_s, delta_s)
    cfg = PpiConfig(T=T, epsilon=eps_s, delta=delta_s, C=C)
    current = A
    B = np.zeros((n, n))
    for i in range(1, k + 1):
        v, trace = ppi(current, cfg, rng, gate=gate, ledger=result.ledger)
        result.traces.append(trace)
        if v is None:
            result.failed_stage = i
            return result
        scale = 1.0 / eps_s
        s_hat = float(np.linalg.norm(matvec(current, v))) + sample_laplace(scale, rng)
        if scale > 0:
            result.ledger.record("laplace", eps_s, 0.0, 1.0, scale, label=f"sigma-hat-{i}")
        update = s_hat * np.outer(v, v)
        B = _symmetrise(B + update)
        current = SymmetricMatrix(_symmetrise(current.array - update))
        result.vectors.append(v)
        result.sigma_hat.append(s_hat)
        result.residuals.append(np.array(current.array))
    result.approximation = B
    result.residual = np.array(current.array)
    return result


def deflation_interlacing_check(A, x, t, alpha, c0=DEFLATION_C0, *, require_psd=True):
    """Check ``lam_k <= lam'_{k-1} <= min(lam_{k-1}, lam_k + alpha lam_1)``.

    ``lam'`` are the eigenvalues of ``A - t x x^T``.  The admissibility
    conditions are ``||Ax|| >= (1 - alpha/c0) lam_1`` and ``t`` within a
    factor ``1 +- alpha/c0`` of ``||Ax||``; the bound is only claimed for
    positive semidefinite A: with an eigenvalue below ``-alpha lam_1`` even
    exact deflation violates the upper bound.  ``require_psd=False`` skips
    that filter so the violation can be observed.

    Returns:
        ``(ok, worst_margin)`` where a negative margin is a violation.

    Raises:
        PreconditionError: when any admissibility condition fails.
    """
    A = as_symmetric(A)
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise PreconditionError("x must be a unit vector")
    lam = np.sort(exact_factorization(A).eigenvalues)[::-1]
    lam1 = lam[0]
    if lam1 <= 0:
        raise PreconditionError("largest eigenvalue must be positive")
    scale = max(abs(lam1), abs(lam[-1]))
    if require_psd and lam[-1] < -1e-12 * scale:
        raise PreconditionError("matrix is not positive semidefinite")
    ax = float(np.linalg.norm(matvec(A, x)))
    slack = alpha / c0
    if ax < (1.0 - slack) * lam1:
        raise PreconditionError(f"||Ax|| = {ax:.6g} below (1 - alpha/C0) lam_1 = {(1 - slack) * lam1:.6g}")
    if not (1.0 - slack) * ax <= t <= (1.0 + slack) * ax:
        raise PreconditionError("t outside (1 +- alpha/C0) ||Ax||")
    deflated = SymmetricMatrix(_symmetrise(A.array - t * np.outer(x, x)))
    lam_p = np.sort(exact_factorization(deflated).eigenvalues)[::-1]
    tol = 1e-9 * scale
    margins = []
    for k in range(1, lam.size):  # pairs (lam_{k+1}, lam'_k) in 1-based terms
        lower = lam_p[k - 1] - lam[k]
        upper = min(lam[k - 1], lam[k] + alpha * lam1) - lam_p[k - 1]
        margins.extend((lower, upper))
    worst = min(margins) if margins else 0.0
    return worst >= -tol, worst


def coherence_growth_check(A, history, r=None):
    """Observed coherence of each residual against ``2 r mu(A) + 32 i ln n``.

    Args:
        history: residual matrices ``A_0 = A, A_1, ...`` (``RankKResult.residuals``)
            or a :class:`RankKResult`.
        r: rank of A; the oracle's numerical rank when omitted.
    """
    if isinstance(history, RankKResult):
        history = history.residuals
    A = as_symmetric(A)
    n = A.n
    F = exact_factorization(A)
    if r is None:
        r = max(F.rank(), 1)
    mu_a = coherence_mu(F)
    observed, bounds = [], []
    for i, Ai in enumerate(history):
        Fi = F if i == 0 else exact_factorization(SymmetricMatrix(_symmetrise(np.asarray(Ai))))
        observed.append(coherence_mu(Fi))
        bounds.append(2.0 * r * mu_a + GROWTH_CONST * i * math.log(n))
    return observed, bounds


def rayleigh_lower(A, x):
    """``(||Ax||, x^T A x)`` for a unit vector x."""
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise ValueError("x must be a unit vector")
    ax = matvec(as_symmetric(A), x)
    return float(np.linalg.norm(ax)), float(x @ ax)


def rayleigh_admissible(eigenvalues, ax_norm, alpha) -> bool:
    """Whether ``x^T A x >= (1 - 5 alpha) lam_1`` is guaranteed.

    Needs ``0 <= alpha <= 1/4``, ``||Ax|| >= (1 - alpha) lam_1`` with
    ``lam_1`` the largest eigenvalue, and no eigenvalue below
    ``-(3 + alpha) / 5 * lam_1``.  Without the last condition the bound
    fails, e.g. for eigenvalues (1, -0.7) and alpha = 0.01.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    lam1 = float(lam.max())
    if not (0 <= alpha <= 0.25 and lam1 > 0):
        return False
    if lam.min() < -(3.0 + alpha) / 5.0 * lam1:
        return False
    return ax_norm >= (1.0 - alpha) * lam1
