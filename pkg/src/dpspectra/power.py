"""Power iteration with injected perturbations, and its private variant."""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIterateError, DimensionError
from .matrix import as_symmetric, exact_factorization, matvec
from .privacy import NoiseLedger, PrivacyBudget, ppi_noise_scale, sample_laplace

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-300
UNIT_TOL = 1e-12


class ZeroNoise:
    def __init__(self, n):
        self.n = n

    def __call__(self, t, rng):
        return np.zeros(self.n)


class GaussianNoise:
    """i.i.d. N(0, sigma^2) coordinates each round."""

    def __init__(self, n, sigma):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.n = n
        self.sigma = sigma

    def __call__(self, t, rng):
        if self.sigma == 0:
            return np.zeros(self.n)
        return rng.normal(0.0, self.sigma, size=self.n)


class AdversarialScript:
    """Replays a fixed list of perturbations; round t gets ``vectors[t-1]``."""

    def __init__(self, vectors):
        self.vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        if not self.vectors:
            raise ValueError("script needs at least one vector")
        self.n = self.vectors[0].size

    def __call__(self, t, rng):
        if t > len(self.vectors):
            raise IndexError(f"script has {len(self.vectors)} rounds, asked for round {t}")
        return self.vectors[t - 1]


class Status(str, enum.Enum):
    CONVERGED = "converged"
    RAN_FULL = "ran_full_T"
    FAIL = "fail"


@dataclass
class IterationTrace:
    """Per-round audit trail.

    ``iterates[0]`` is the starting vector; ``iterates[t]`` is the
    normalised x_t.  ``inf_norms_sq[t-1]`` is ``||x_{t-1}||_inf^2`` as seen by
    the gate of round t and ``gate_passed[t-1]`` its outcome.
    """

    iterates: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    inf_norms_sq: list = field(default_factory=list)
    gate_passed: list = field(default_factory=list)
    status: Status | None = None
    stop_round: int | None = None

    @property
    def failed(self) -> bool:
        return self.status is Status.FAIL

    @property
    def rounds(self) -> int:
        return len(self.norms)

    def summary(self) -> dict:
        return {
            "status": self.status.value if self.status else None,
            "stop_round": self.stop_round,
            "rounds_run": self.rounds,
            "norms": list(self.norms),
            "inf_norms_sq": list(self.inf_norms_sq),
            "gate_passed": list(self.gate_passed),
        }


def _normalise(xp, t):
    nrm = float(np.linalg.norm(xp))
    if not nrm >= DEGENERATE_NORM:
        raise DegenerateIterateError(f"degenerate iterate in round {t} (norm {nrm:.3e})")
    return xp / nrm, nrm


def robust_power_iteration(A, T, beta, sigma_threshold, src, x0, rng=None):
    """Power iteration with an arbitrary perturbation added to each product.

    Round t forms ``x'_t = A x_{t-1} + g_t``.  If ``||x'_t|| >= (1 - beta) *
    sigma_threshold`` it stops and returns ``x_{t-1}``; otherwise it
    normalises and continues.  ``sigma_threshold=math.inf`` disables the
    stopping rule.

    Returns:
        ``(x, trace)``.
    """
    A = as_symmetric(A)
    x = np.asarray(x0, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionError(f"x0 has shape {x.shape}, expected ({A.n},)")
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise ValueError("x0 must be a unit vector")
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if not sigma_threshold > 0:
        raise ValueError("sigma_threshold must be positive")
    trace = IterationTrace(iterates=[x.copy()])
    stop = (1.0 - beta) * sigma_threshold
    for t in range(1, T + 1):
        xp = matvec(A, x) + src(t, rng)
        nrm = float(np.linalg.norm(xp))
        trace.norms.append(nrm)
        if nrm >= stop:
            trace.status, trace.stop_round = Status.CONVERGED, t
            return x, trace
        x, _ = _normalise(xp, t)
        trace.iterates.append(x)
    trace.status, trace.stop_round = Status.RAN_FULL, T
    return x, trace


@dataclass(frozen=True)
class PpiConfig:
    """Inputs of one private power iteration run.

    ``beta`` and ``gamma`` are carried for reporting only; PPI runs exactly
    T rounds.
    """

    T: int
    epsilon: float
    delta: float
    C: float
    beta: float = 0.1
    gamma: float = 0.5

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.C >= 1:
            raise ValueError("coherence bound C must be >= 1")
        PrivacyBudget(self.epsilon, self.delta)
        if not 0 < self.delta < 1:
            raise ValueError("PPI needs delta in (0, 1)")

    @property
    def sigma(self) -> float:
        return ppi_noise_scale(self.T, self.epsilon, self.delta)

    def round_budget(self) -> tuple[float, float]:
        """Per-round (epsilon, delta) implied by the noise scale.

        Each round is charged ``eps / sqrt(4 T ln(1/delta)) = 2 / sigma`` and
        ``delta / T``; the totals are what the ledger reports.
        """
        return 2.0 / self.sigma if self.sigma > 0 else math.inf, self.delta / self.T


def ppi(A, cfg: PpiConfig, rng, *, gate=True, ledger: NoiseLedger | None = None, x0=None):
    """Private power iteration.

    Draws ``x_0 ~ N(0, 1/n)^n`` (not normalised), then for each round checks
    the coherence gate ``||x_{t-1}||_inf^2 <= C/n`` before forming
    ``x'_t = A x_{t-1} + g_t`` with ``g_t ~ N(0, C sigma^2 / n)^n`` and
    normalising.  A tripped gate is a result, not an exception.

    Args:
        gate: disable only for non-private experiments.
        x0: fixed starting vector instead of a fresh Gaussian draw.

    Returns:
        ``(x_T, trace)``, or ``(None, trace)`` when the gate fails.
    """
    A = as_symmetric(A)
    n = A.n
    sigma = cfg.sigma
    coord_sd = sigma * math.sqrt(cfg.C / n)
    threshold = cfg.C / n
    if x0 is None:
        x = rng.normal(0.0, 1.0 / math.sqrt(n), size=n)
    else:
        x = np.array(x0, dtype=np.float64)
        if x.shape != (n,):
            raise DimensionError(f"x0 has shape {x.shape}, expected ({n},)")
    eps_round, delta_round = cfg.round_budget()
    trace = IterationTrace(iterates=[x.copy()])
    for t in range(1, cfg.T + 1):
        inf_sq = float(np.max(np.abs(x))) ** 2
        ok = inf_sq <= threshold
        trace.inf_norms_sq.append(inf_sq)
        trace.gate_passed.append(ok)
        if gate and not ok:
            trace.status, trace.stop_round = Status.FAIL, t
            return None, trace
        xp = matvec(A, x)
        if coord_sd > 0:
            xp = xp + rng.normal(0.0, coord_sd, size=n)
            if ledger is not None:
                ledger.record("gaussian", eps_round, delta_round, math.sqrt(threshold), coord_sd, label=f"ppi-round-{t}")
        x, nrm = _normalise(xp, t)
        trace.norms.append(nrm)
        trace.iterates.append(x)
    trace.status, trace.stop_round = Status.RAN_FULL, cfg.T
    return x, trace


def choose_T(sigma1_upper) -> int:
    """Round count ``ceil(4 ln sigma1_upper)``, at least 1."""
    if sigma1_upper < 1:
        warnings.warn(f"sigma1 bound {sigma1_upper} < 1; using T = 1", stacklevel=2)
        return 1
    # 1e-9 slack keeps e.g. 4 ln(e^2) = 8.000000000000002 at 8.
    return max(1, math.ceil(4.0 * math.log(sigma1_upper) - 1e-9))


def c_candidates(n: int) -> list[int]:
    """Coherence bounds tried by :func:`search_C`: 1, 2, 4, ..., 2**floor(log2 n)."""
    return [2**i for i in range(int(math.floor(math.log2(n))) + 1)]


@dataclass
class SearchResult:
    x: np.ndarray | None
    C: int | None
    scores: list
    traces: list
    ledger: NoiseLedger

    @property
    def failed(self) -> bool:
        return self.x is None


def search_C(A, T, budget: PrivacyBudget, rng, *, ledger: NoiseLedger | None = None, gate=True) -> SearchResult:
    """Run PPI for each candidate C and keep the best privately scored output.

    The budget is cut into ``2 m`` equal epsilon slices for m candidates:
    one per PPI run (with ``delta / m``) and one per quality score
    ``||A x|| + Lap(2 / eps_slice)``.  The score sensitivity is bounded by 1.
    All candidates share one starting vector (a data-independent draw), so
    in the zero-noise limit non-failing candidates tie and the smallest C
    wins.
    """
    A = as_symmetric(A)
    cands = c_candidates(A.n)
    m = len(cands)
    eps_slice = budget.epsilon / (2 * m)
    delta_slice = budget.delta / m
    ledger = ledger if ledger is not None else NoiseLedger()
    x0 = rng.normal(0.0, 1.0 / math.sqrt(A.n), size=A.n)
    best, best_score, best_C = None, -math.inf, None
    scores, traces = [], []
    for C in cands:
        cfg = PpiConfig(T=T, epsilon=eps_slice, delta=delta_slice, C=C)
        x, trace = ppi(A, cfg, rng, gate=gate, ledger=ledger, x0=x0)
        traces.append(trace)
        if x is None:
            scores.append(None)
            continue
        lap_scale = 2.0 / eps_slice
        score = float(np.linalg.norm(matvec(A, x))) + sample_laplace(lap_scale, rng)
        if lap_scale > 0:
            ledger.record("laplace", eps_slice, 0.0, 1.0, lap_scale, label=f"score-C{C}")
        scores.append(score)
        if score > best_score:
            best, best_score, best_C = x, score, C
    return SearchResult(best, best_C, scores, traces, ledger)


def sign_pattern(A, t, rng, cfg: PpiConfig | None = None, *, gate=True, factorization=None):
    """Signs of ``<u_i, x_t>`` for the oracle eigenvectors after t PPI rounds.

    With ``t = 0`` the signs of the starting vector are returned.  Returns
    ``None`` when the gate trips.
    """
    A = as_symmetric(A)
    n = A.n
    F = factorization if factorization is not None else exact_factorization(A)
    if t == 0:
        x = rng.normal(0.0, 1.0 / math.sqrt(n), size=n)
    else:
        if cfg is None:
            cfg = PpiConfig(T=t, epsilon=1.0, delta=1e-6, C=n)
        elif cfg.T != t:
            cfg = PpiConfig(T=t, epsilon=cfg.epsilon, delta=cfg.delta, C=cfg.C, beta=cfg.beta, gamma=cfg.gamma)
        x, _ = ppi(A, cfg, rng, gate=gate)
        if x is None:
            return None
    proj = F.left.T @ x
    return np.where(proj >= 0, 1, -1)
