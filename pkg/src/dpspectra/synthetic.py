"""Random test matrices with prescribed spectra."""

from __future__ import annotations

import numpy as np

from .matrix import SymmetricMatrix


def random_orthogonal(n, rng) -> np.ndarray:
    """Haar-distributed n x n orthogonal matrix (QR of a Gaussian, signs fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def hadamard(n) -> np.ndarray:
    """Orthonormal Sylvester-Hadamard matrix; n must be a power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError("n must be a power of two")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(n)


def with_spectrum(eigenvalues, basis) -> SymmetricMatrix:
    """``Q diag(lam) Q^T`` for the leading columns of ``basis``, exactly symmetrised."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    q = np.asarray(basis, dtype=np.float64)[:, : lam.size]
    a = (q * lam) @ q.T
    return SymmetricMatrix((a + a.T) / 2.0)


def random_spectrum_matrix(eigenvalues, n, rng) -> SymmetricMatrix:
    """Random rotation of the given eigenvalues (padded with zeros to size n)."""
    return with_spectrum(eigenvalues, random_orthogonal(n, rng))


def gapped_symmetric(n, rng, ratio=0.9, scale=100.0) -> SymmetricMatrix:
    """Random symmetric matrix with ``|lam_2| / lam_1 <= ratio``.

    The top eigenvalue is ``scale``; the others are uniform in
    ``[-ratio, ratio] * scale`` with one of them pinned at ``ratio * scale``.
    """
    lam = rng.uniform(-ratio, ratio, size=n) * scale
    lam[0] = scale
    lam[1] = ratio * scale
    return random_spectrum_matrix(lam, n, rng)


def random_psd(n, rng, rank=None, scale=1.0) -> SymmetricMatrix:
    """Random PSD matrix with eigenvalues uniform in ``[0, scale]``."""
    rank = n if rank is None else rank
    lam = np.sort(rng.uniform(0.0, scale, size=rank))[::-1]
    return random_spectrum_matrix(lam, n, rng)
