"""Matrix containers, norms, dilation and the exact spectral oracle.

The oracle is a cyclic Jacobi method.  Rotations are scheduled in
round-robin (tournament) order so that each step rotates n/2 disjoint
index pairs at once; disjoint rotations commute, so a step is applied as a
handful of vectorised row/column updates.  One sweep visits every pair
exactly once, which is the same work as a textbook row-cyclic sweep.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DimensionError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
ORACLE_MAX_N = 4096
# Column cosines at this level are rounding noise for desk-scale inputs.
RECT_COSINE_TOL = 1e-14


def _as_finite_2d(data) -> np.ndarray:
    a = np.array(data, dtype=np.float64, copy=True)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError("matrix must have at least one row and column")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    a.setflags(write=False)
    return a


class SymmetricMatrix:
    """Immutable real symmetric n x n matrix.

    Symmetry is checked exactly (``a_ij == a_ji``).  A matrix built with
    :meth:`from_coordinates` also keeps its coordinate list, which
    :func:`matvec` uses instead of the dense array.
    """

    __slots__ = ("_a", "_coo")

    def __init__(self, data):
        a = _as_finite_2d(data)
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"symmetric matrix must be square, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
        self._a = a
        self._coo = None

    @classmethod
    def from_coordinates(cls, n, rows, cols, vals):
        """Build from a coordinate list holding both triangles.

        Duplicate coordinates are summed, as in most sparse formats.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionError("rows, cols and vals must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
            raise DimensionError("coordinate out of range")
        dense = np.zeros((n, n))
        np.add.at(dense, (rows, cols), vals)
        out = cls(dense)
        out._coo = (rows, cols, vals)
        return out

    @property
    def n(self) -> int:
        return self._a.shape[0]

    @property
    def shape(self):
        return self._a.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only dense view."""
        return self._a

    @property
    def is_sparse(self) -> bool:
        return self._coo is not None

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self):
        return f"SymmetricMatrix(n={self.n})"

    def __eq__(self, other):
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    __hash__ = None


class RectMatrix:
    """Immutable real m x n matrix with finite entries."""

    __slots__ = ("_a",)

    def __init__(self, data):
        self._a = _as_finite_2d(data)

    @property
    def shape(self):
        return self._a.shape

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self):
        m, n = self.shape
        return f"RectMatrix(m={m}, n={n})"


def as_symmetric(A) -> SymmetricMatrix:
    if isinstance(A, SymmetricMatrix):
        return A
    return SymmetricMatrix(A)


@dataclass(frozen=True)
class SpectralFactorization:
    """Singular triples ``A = sum_i sigma_i u_i v_i^T`` sorted by sigma.

    Columns of ``left``/``right`` are the vectors.  For a symmetric input
    ``eigenvalues`` holds the signed eigenvalue of each column and
    ``right[:, i] = sign(eigenvalue_i) * left[:, i]``.
    """

    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray
    eigenvalues: np.ndarray | None = None
    provenance: str = ""
    sweeps: int = 0
    off_diagonal: float = 0.0
    shape: tuple = field(default=())

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.sigma) @ self.right.T

    def rank(self, rel_tol: float = 1e-10) -> int:
        if self.sigma.size == 0 or self.sigma[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > rel_tol * self.sigma[0]))


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(A, SymmetricMatrix):
        if x.shape != (A.n,):
            raise DimensionError(f"vector of length {x.shape} does not match n={A.n}")
        if A._coo is not None:
            rows, cols, vals = A._coo
            return np.bincount(rows, weights=vals * x[cols], minlength=A.n)
        return A.array @ x
    a = np.asarray(A, dtype=np.float64)
    if a.ndim != 2 or x.shape != (a.shape[1],):
        raise DimensionError(f"cannot multiply {a.shape} by {x.shape}")
    return a @ x


@lru_cache(maxsize=64)
def _tournament(n: int):
    """Round-robin schedule: n-1 (or n) rounds of disjoint pairs (p < q)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a >= n or b >= n:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _rotation(app, aqq, apq):
    # Symmetric Schur 2x2: zero apq with J = [[c, s], [-s, c]].
    c = np.ones_like(apq)
    s = np.zeros_like(apq)
    nz = apq != 0.0
    if np.any(nz):
        tau = (aqq[nz] - app[nz]) / (2.0 * apq[nz])
        t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
        c[nz] = 1.0 / np.sqrt(1.0 + t * t)
        s[nz] = t * c[nz]
    return c, s


def _off_norm(a: np.ndarray) -> float:
    # Summed directly: ||a||_F^2 - ||diag||^2 cancels catastrophically.
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _input_digest(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive (first on ties).
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a symmetric array.

    Returns ``(eigenvalues, eigenvectors, sweeps, off)`` with eigenvalues in
    the order of the converged diagonal (unsorted).  Raises
    :class:`ConvergenceError` when the off-diagonal Frobenius mass is still
    above ``tol * ||a||_F`` after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    fro = float(np.linalg.norm(a))
    target = tol * fro
    off = _off_norm(a)
    sweeps = 0
    if n == 1 or off <= target:
        return np.diag(a).copy(), v, sweeps, off
    schedule = _tournament(n)
    while off > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal mass {off:.3e}, target {target:.3e})",
                residual=off,
            )
        for p, q in schedule:
            c, s = _rotation(a[p, p], a[q, q], a[p, q])
            cc, ss = c[:, None], s[:, None]
            rp, rq = a[p, :], a[q, :]
            a[p, :] = cc * rp - ss * rq
            a[q, :] = ss * rp + cc * rq
            cp, cq = a[:, p], a[:, q]
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        sweeps += 1
        off = _off_norm(a)
    return np.diag(a).copy(), v, sweeps, off


def _one_sided_jacobi(w: np.ndarray, tol: float, max_sweeps: int):
    """Hestenes one-sided Jacobi: orthogonalise the columns of ``w``."""
    w = np.array(w, dtype=np.float64, copy=True)
    n = w.shape[1]
    v = np.eye(n)
    schedule = _tournament(n) if n > 1 else ()
    sweeps = 0
    while True:
        worst = 0.0
        for p, q in schedule:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.where(scale > 0.0, np.abs(gamma) / scale, 0.0)
            worst = max(worst, float(rel.max(initial=0.0)))
            gamma = np.where(rel > tol, gamma, 0.0)
            c, s = _rotation(alpha, beta, gamma)
            w[:, p] = wp * c - wq * s
            w[:, q] = wp * s + wq * c
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        sweeps += 1
        if worst <= tol:
            return w, v, sweeps, worst
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"one-sided Jacobi did not converge in {max_sweeps} sweeps "
                f"(max column cosine {worst:.3e})",
                residual=worst,
            )


def _check_oracle_size(n):
    if n > ORACLE_MAX_N:
        raise DimensionError(f"oracle limited to n <= {ORACLE_MAX_N}, got {n}")


def exact_factorization(A, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Exact singular triples of a symmetric or rectangular matrix.

    Symmetric input goes through two-sided cyclic Jacobi; singular values
    are the absolute eigenvalues sorted nonincreasing with ties kept in
    diagonal order.  Rectangular input goes through one-sided Jacobi on the
    thinner side; left (or right) vectors belonging to zero singular values
    are an arbitrary orthonormal completion.
    """
    if isinstance(A, RectMatrix):
        return _rect_factorization(A.array, tol, max_sweeps)
    S = as_symmetric(A)
    _check_oracle_size(S.n)
    lam, vecs, sweeps, off = jacobi_eigh(S.array, tol, max_sweeps)
    order = np.argsort(-np.abs(lam), kind="stable")
    lam = lam[order]
    left = _fix_signs(vecs[:, order])
    signs = np.where(lam < 0.0, -1.0, 1.0)
    right = left * signs
    for arr in (lam, left, right):
        arr.setflags(write=False)
    sigma = np.abs(lam)
    sigma.setflags(write=False)
    return SpectralFactorization(
        sigma=sigma,
        left=left,
        right=right,
        eigenvalues=lam,
        provenance=f"jacobi-cyclic:{_input_digest(S.array)}",
        sweeps=sweeps,
        off_diagonal=off,
        shape=S.shape,
    )


def _complete_basis(q: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal columns ``q`` (dim x r) to a dim x dim basis."""
    r = q.shape[1]
    if r == dim:
        return q
    qq, _ = np.linalg.qr(np.hstack([q, np.eye(dim)]))
    extra = qq[:, r:dim]
    return np.hstack([q, _fix_signs(extra)])


def _rect_factorization(a: np.ndarray, tol, max_sweeps):
    m, n = a.shape
    _check_oracle_size(max(m, n))
    transpose = m < n
    w0 = a.T if transpose else a
    w, v, sweeps, worst = _one_sided_jacobi(w0, RECT_COSINE_TOL, max_sweeps)
    norms = np.linalg.norm(w, axis=0)
    order = np.argsort(-norms, kind="stable")
    sigma = norms[order]
    v = v[:, order]
    w = w[:, order]
    p = w.shape[1]
    null_cut = 1e-12 * sigma[0] if sigma.size and sigma[0] > 0 else 0.0
    r = int(np.count_nonzero(sigma > null_cut))
    u = np.zeros((w.shape[0], p))
    u[:, :r] = w[:, :r] / sigma[:r]
    u = _fix_signs_pair(u, v, r)
    u_full = _complete_basis(u[:, :r], w.shape[0])[:, :p]
    sigma = sigma.copy()
    sigma[r:] = 0.0
    left, right = (v, u_full) if transpose else (u_full, v)
    for arr in (sigma, left, right):
        arr.setflags(write=False)
    return SpectralFactorization(
        sigma=sigma,
        left=left,
        right=right,
        eigenvalues=None,
        provenance=f"jacobi-one-sided:{_input_digest(a)}",
        sweeps=sweeps,
        off_diagonal=worst,
        shape=(m, n),
    )


def _fix_signs_pair(u, v, r):
    # Flip (u_i, v_i) jointly so the largest entry of v_i is positive.
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v *= signs
    u[:, :r] *= signs[:r]
    return u


def dilate(A) -> SymmetricMatrix:
    """Symmetric dilation ``[[0, A], [A^T, 0]]`` of an m x n matrix."""
    a = np.asarray(A.array if isinstance(A, (RectMatrix, SymmetricMatrix)) else A, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError("dilate expects a 2-d matrix")
    m, n = a.shape
    b = np.zeros((m + n, m + n))
    b[:m, m:] = a
    b[m:, :m] = a.T
    return SymmetricMatrix(b)


def spectral_norm(A) -> float:
    """Largest singular value, via the exact oracle."""
    return float(exact_factorization(A).sigma[0])


def entry_l1_norm(A) -> float:
    """Sum of absolute entries; 1-sensitive under single-entry changes."""
    return float(np.abs(np.asarray(A)).sum())


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A)))
