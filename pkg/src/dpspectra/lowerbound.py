"""Hard instances with prescribed coherence and the reconstruction attack.

For a database ``D`` in {0,1}^n with n/2 ones and a coherence level C, the
instance ``M_D`` stacks s = n/C copies of D on top of zero rows.  Its top
right singular vector is ``D / ||D||``, so an accurate top singular vector
reveals D after rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coherence import mu as coherence_mu
from .matrix import RectMatrix, dilate, exact_factorization
from .power import PpiConfig, choose_T, ppi

FIDELITY_RTOL = 1e-8
ALPHA_THRESHOLD = 1.0 / 1000.0


@dataclass(frozen=True)
class LowerBoundInstance:
    matrix: RectMatrix
    C: float
    s: int
    database: np.ndarray

    @property
    def n(self) -> int:
        return self.database.size

    @property
    def sigma1(self) -> float:
        return self.n / math.sqrt(2.0 * self.C)

    @property
    def direction(self) -> np.ndarray:
        """``D / ||D||_2``."""
        return self.database / math.sqrt(self.n / 2.0)


def gen_database(n, rng) -> np.ndarray:
    """Uniform 0/1 vector of length n with exactly n/2 ones."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    d = np.zeros(n, dtype=np.int64)
    d[rng.choice(n, size=n // 2, replace=False)] = 1
    return d


def gen_instance(n, C, database, *, verify=True) -> LowerBoundInstance:
    """Build ``M_D`` and, with ``verify``, confirm sigma_1 and mu via the oracle."""
    d = np.asarray(database, dtype=np.int64)
    if d.shape != (n,) or n % 2 or int(d.sum()) != n // 2 or not np.isin(d, (0, 1)).all():
        raise ValueError("database must be a 0/1 vector of length n (even) with n/2 ones")
    s_float = n / C
    s = int(round(s_float))
    if s < 1 or abs(s - s_float) > 1e-12:
        raise ValueError(f"n / C = {s_float} must be a positive integer")
    m = np.zeros((n, n))
    m[:s, :] = d
    inst = LowerBoundInstance(RectMatrix(m), float(C), s, d)
    if verify:
        F = exact_factorization(inst.matrix)
        sig, mu_val = float(F.sigma[0]), coherence_mu(F)
        if abs(sig - inst.sigma1) > FIDELITY_RTOL * inst.sigma1:
            raise AssertionError(f"sigma_1 = {sig}, expected {inst.sigma1}")
        if abs(mu_val - C) > FIDELITY_RTOL * C:
            raise AssertionError(f"mu = {mu_val}, expected {C}")
    return inst


def quality(inst: LowerBoundInstance, v) -> float:
    """``||M_D v||_2`` for a unit vector v, cross-checked against ``sigma_1 |<D/|D|, v>|``."""
    v = np.asarray(v, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ValueError("v must be a unit vector")
    val = float(np.linalg.norm(inst.matrix.array @ v))
    closed = inst.sigma1 * abs(float(inst.direction @ v))
    if abs(val - closed) > 1e-10 * max(inst.sigma1, 1.0):
        raise AssertionError(f"||Mv|| = {val} disagrees with sigma_1 <D, v> = {closed}")
    return val


def reconstruct(v) -> np.ndarray:
    """Round: coordinate i is 1 iff ``sqrt(n/2) v_i >= 1/2``."""
    v = np.asarray(v, dtype=np.float64)
    return (math.sqrt(v.size / 2.0) * v >= 0.5).astype(np.int64)


def hamming(a, b) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


def _right_half(x, n):
    # Top block of the dilation carries the left vector; bottom the right one.
    v = np.asarray(x[n:], dtype=np.float64)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return np.zeros(n)
    v = v / nrm
    # Public post-processing: D/|D| is nonnegative, so fix the global sign.
    return v if v.sum() >= 0 else -v


def attack_demo(n, C, epsilon, delta, trials, rng, *, T=None, coherence_bound=None) -> dict:
    """Private top singular vector of random ``M_D`` and the resulting reconstruction.

    Each trial draws D, builds ``M_D``, runs PPI on its dilation at
    ``(epsilon/2, delta/2)``, rounds the right block of the output and reports
    the achieved ``||M v||`` against sigma_1 together with the Hamming
    distance to D.  This shows the accuracy side of the trade-off; it does
    not test privacy.

    ``coherence_bound`` defaults to ``min(2n, 16 C ln(2n))`` and ``T`` to
    ``choose_T(n)`` (n bounds sigma_1 without looking at the data).
    """
    dim = 2 * n
    T = choose_T(n) if T is None else T
    gate_C = min(dim, 16.0 * C * math.log(dim)) if coherence_bound is None else coherence_bound
    cfg = PpiConfig(T=T, epsilon=epsilon / 2.0, delta=delta / 2.0, C=gate_C)
    rows = []
    for trial in range(trials):
        d = gen_database(n, rng)
        inst = gen_instance(n, C, d, verify=False)
        x, trace = ppi(dilate(inst.matrix), cfg, rng)
        if x is None:
            rows.append({"trial": trial, "failed": True, "fail_round": trace.stop_round})
            continue
        v = _right_half(x, n)
        q = quality(inst, v) if np.any(v) else 0.0
        corr = float(inst.direction @ v)
        recon = reconstruct(v)
        rows.append(
            {
                "trial": trial,
                "failed": False,
                "quality": q,
                "sigma1": inst.sigma1,
                "error": inst.sigma1 - q,
                "correlation": corr,
                "hamming": hamming(recon, d),
                "above_threshold": q >= (1.0 - ALPHA_THRESHOLD) * inst.sigma1,
            }
        )
    ok = [r for r in rows if not r["failed"]]
    summary = {"trials": trials, "failed": trials - len(ok)}
    if ok:
        hd = np.array([r["hamming"] for r in ok], dtype=float)
        err = np.array([r["error"] for r in ok])
        summary.update(
            {
                "hamming_quantiles": dict(zip(("min", "q25", "median", "q75", "max"), np.quantile(hd, [0, 0.25, 0.5, 0.75, 1]).tolist())),
                "error_quantiles": dict(zip(("min", "q25", "median", "q75", "max"), np.quantile(err, [0, 0.25, 0.5, 0.75, 1]).tolist())),
                "recovery_rate_median": 1.0 - float(np.median(hd)) / n,
                "above_threshold": int(sum(r["above_threshold"] for r in ok)),
            }
        )
    return {
        "n": n,
        "C": C,
        "sigma1": n / math.sqrt(2.0 * C),
        "ppi": {"T": T, "epsilon": cfg.epsilon, "delta": cfg.delta, "C": gate_C},
        "trials": rows,
        "summary": summary,
    }
