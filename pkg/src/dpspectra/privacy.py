"""Noise mechanisms, composition rules and the private norm bound.

All logarithms in mechanism formulas are natural logarithms.  An epsilon of
``math.inf`` is accepted everywhere as the (non-private) zero-noise limit;
it makes every noise scale exactly zero.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .matrix import entry_l1_norm


class PrivacyWarning(UserWarning):
    """A mechanism was evaluated outside the range its guarantee covers."""


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_private(self) -> bool:
        return math.isfinite(self.epsilon)


def make_rng(seed, stream: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)``; distinct streams are independent."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def gaussian_sigma(c, epsilon, delta, *, strict: bool = True) -> float:
    """Noise scale ``4 c / eps * sqrt(ln(2 / delta))`` of the Gaussian mechanism.

    Args:
        c: l2 sensitivity.
        epsilon: privacy parameter.
        delta: privacy parameter.  The guarantee needs ``delta < 1/2``;
            with ``strict=False`` values in ``[1/2, 1)`` are evaluated and a
            :class:`PrivacyWarning` is issued instead of raising.
    """
    if c <= 0:
        raise ValueError("sensitivity must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if delta >= 0.5:
        if strict:
            raise ValueError(f"Gaussian mechanism requires delta < 1/2, got {delta}")
        warnings.warn(f"delta={delta} >= 1/2: no privacy guarantee", PrivacyWarning, stacklevel=2)
    return 4.0 * c / epsilon * math.sqrt(math.log(2.0 / delta))


def ppi_noise_scale(T, epsilon, delta) -> float:
    """Per-round scale ``2 / eps * sqrt(4 T ln(1/delta))`` used by PPI."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return 2.0 / epsilon * math.sqrt(4.0 * T * math.log(1.0 / delta))


def sample_gaussian_vector(sigma, d, rng) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if sigma == 0:
        return np.zeros(d)
    return rng.normal(0.0, sigma, size=d)


def sample_laplace(scale, rng) -> float:
    """One draw from Laplace(0, scale); ``scale == 0`` returns 0."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return 0.0
    return float(rng.laplace(0.0, scale))


def compose_basic(k, epsilon, delta) -> PrivacyBudget:
    """k-fold composition: ``(k eps, k delta)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return PrivacyBudget(k * epsilon, k * delta)


def compose_advanced(k, epsilon, delta, delta_prime) -> PrivacyBudget:
    """Advanced composition of k mechanisms, each (epsilon, delta)-DP.

    Returns ``(sqrt(2 k ln(1/delta')) eps + 2 k eps^2, k delta + delta')``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < epsilon < 1:
        raise ValueError("advanced composition needs epsilon in (0, 1)")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if not 0 < delta_prime < 1:
        raise ValueError("delta_prime must lie in (0, 1)")
    eps_total = math.sqrt(2.0 * k * math.log(1.0 / delta_prime)) * epsilon + 2.0 * k * epsilon**2
    return PrivacyBudget(eps_total, k * delta + delta_prime)


@dataclass(frozen=True)
class LedgerEntry:
    mechanism: str
    epsilon: float
    delta: float
    sensitivity: float
    scale: float
    label: str = ""


@dataclass
class NoiseLedger:
    """Append-only record of every noise draw that touched the data."""

    entries: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, mechanism, epsilon, delta, sensitivity, scale, label=""):
        entry = LedgerEntry(mechanism, float(epsilon), float(delta), float(sensitivity), float(scale), label)
        with self._lock:
            self.entries.append(entry)
        return entry

    def extend(self, other: "NoiseLedger"):
        with self._lock:
            self.entries.extend(other.entries)

    def __len__(self):
        return len(self.entries)

    def total_basic(self) -> tuple[float, float]:
        """Componentwise sum of all entries."""
        return (
            math.fsum(e.epsilon for e in self.entries),
            math.fsum(e.delta for e in self.entries),
        )

    def to_dict(self) -> dict:
        eps, delta = self.total_basic()
        return {
            "entries": [asdict(e) for e in self.entries],
            "total_basic": {"epsilon": eps, "delta": delta},
        }


def private_sigma1_upper(A, epsilon, rng, ledger: NoiseLedger | None = None) -> float:
    """Private upper bound on the top singular value.

    Releases ``||A||_1 + Lap(1/eps) + (10/eps) ln n``.  The entrywise l1 norm
    is 1-sensitive and dominates the spectral norm; the shift makes the
    release fall below ``||A||_1`` with probability at most ``n**-10 / 2``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a = np.asarray(A)
    n = max(a.shape)
    scale = 1.0 / epsilon
    noise = sample_laplace(scale, rng)
    if ledger is not None:
        ledger.record("laplace", epsilon, 0.0, 1.0, scale, label="sigma1-upper")
    return entry_l1_norm(a) + noise + 10.0 * scale * math.log(n)
