"""Monte-Carlo probe of the local sensitivity of matrix powers.

Perturbing one entry of M by ``E = e_s e_t^T`` changes ``M^q g`` by
``((M + E)^q - M^q) g``.  Its expected norm over Gaussian g is bounded by
``9 min(1, sqrt(k mu_k / n)) q sigma_1^(q-1)`` when ``sigma_1 >= 4q``,
``sigma_{k+1} <= sigma_1 / 2`` and ``q >= ln n + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coherence import mu_k
from .errors import OverflowRiskError
from .matrix import as_symmetric, exact_factorization

MAX_Q = 64
# Leave headroom below the largest double for the products formed on the way.
OVERFLOW_LOG = math.log(np.finfo(np.float64).max) - 10.0


@dataclass(frozen=True)
class ProbeConfig:
    q: int
    k: int
    s: int
    t: int
    trials: int = 200

    def __post_init__(self):
        if not 1 <= self.q <= MAX_Q:
            raise ValueError(f"q must lie in [1, {MAX_Q}], got {self.q}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def matrix_power(a, q):
    """``a**q`` by repeated squaring."""
    result = None
    base = np.array(a, dtype=np.float64)
    while q:
        if q & 1:
            result = base.copy() if result is None else result @ base
        q >>= 1
        if q:
            base = base @ base
    return result


def _check_overflow(a, q):
    # Spectral norm of M + E is at most ||M||_2 + 1; bound the growth of both powers.
    top = float(np.linalg.norm(a, 2)) + 1.0
    if q * math.log(max(top, 1.0)) > OVERFLOW_LOG:
        raise OverflowRiskError(f"sigma_1^q overflows double precision for q={q}; use a smaller q")


def power_gap_estimate(M, s, t, q, trials, rng):
    """Mean and standard error of ``||((M + e_s e_t^T)^q - M^q) g||`` over g ~ N(0, I).

    Returns:
        ``(mean, standard_error)``; the standard error is 0 for a single trial.
    """
    M = as_symmetric(M)
    n = M.n
    if not (0 <= s < n and 0 <= t < n):
        raise IndexError(f"entry ({s}, {t}) outside a {n} x {n} matrix")
    if not 1 <= q <= MAX_Q:
        raise ValueError(f"q must lie in [1, {MAX_Q}], got {q}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a = M.array
    _check_overflow(a, q)
    pert = np.array(a)
    pert[s, t] += 1.0
    gap = matrix_power(pert, q) - matrix_power(a, q)
    g = rng.standard_normal((n, trials))
    vals = np.linalg.norm(gap @ g, axis=0)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, se


def mu_k_power_bound(M, k, q, factorization=None) -> dict:
    """``9 min(1, sqrt(k mu_k / n)) q sigma_1^(q-1)`` with precondition flags.

    The bound is returned whether or not the preconditions hold; ``valid``
    is their conjunction.
    """
    M = as_symmetric(M)
    n = M.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    F = factorization if factorization is not None else exact_factorization(M)
    sig = F.sigma
    s1 = float(sig[0])
    s_next = float(sig[k]) if k < n else 0.0
    mk = mu_k(F, k)
    factor = min(1.0, math.sqrt(k * mk / n))
    flags = {
        "sigma1_ge_4q": s1 >= 4 * q,
        "gap": s_next <= s1 / 2.0,
        "q_ge_ln_n_plus_1": q >= math.log(n) + 1.0,
    }
    return {
        "bound": 9.0 * factor * q * s1 ** (q - 1),
        "mu_k": mk,
        "sigma1": s1,
        "sigma_k_plus_1": s_next,
        "preconditions": flags,
        "valid": all(flags.values()),
    }
