"""Complex-matrix primitives: structured products, Hermitian eigentools, PD solves.

All matrices are dense complex ndarrays in double precision.  Inverses never
appear explicitly outside small test oracles; every MMSE inversion in the
package routes through :func:`solve_hermitian_pd`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# eigenvalues below RANK_TOL * lambda_max are treated as zero everywhere
RANK_TOL = 1e-12

# relative tolerance for "is this matrix Hermitian" checks
HERM_TOL = 1e-10


class NumericalError(RuntimeError):
    """A numerical precondition failed (singular system, non-PD matrix, ...)."""


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite, nonempty 2-D complex array."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or infinite entries")
    return a


def _check_hermitian(a: np.ndarray) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.conj().T) > HERM_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    # symmetrize away the (tolerated) asymmetry so LAPACK sees an exact input
    return (a + a.conj().T) / 2


def hadamard(a, b) -> np.ndarray:
    """Entrywise (Hadamard) product of two same-shaped matrices."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch for Hadamard product: {a.shape} vs {b.shape}")
    return a * b


def kronecker(a, b) -> np.ndarray:
    """Kronecker product with block (i, j) equal to a[i, j] * b."""
    return np.kron(as_matrix(a), as_matrix(b))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; column l is a[:, l] kron b[:, l]."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column-count mismatch for Khatri-Rao product: {a.shape[1]} vs {b.shape[1]}"
        )
    m, l = a.shape
    n = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(m * n, l)


def vec(a) -> np.ndarray:
    """Column-stacking vectorization, returned as a column vector."""
    return as_matrix(a).reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a length rows*cols vector to rows x cols."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def hermitian_evd(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues descending, eigenvector matrix).  The result is
    deterministic: eigenvalues are sorted descending with a stable order, and
    each eigenvector is phase-fixed so its first sizeable component is real
    positive.
    """
    a = _check_hermitian(as_matrix(a))
    w, v = np.linalg.eigh(a)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    # global phase fix per eigenvector: first component above the rank
    # tolerance becomes real positive
    mags = np.abs(v)
    for j in range(v.shape[1]):
        col = mags[:, j]
        idx = np.argmax(col > RANK_TOL * col.max())
        pivot = v[idx, j]
        if np.abs(pivot) > 0:
            v[:, j] *= np.conj(pivot) / np.abs(pivot)
    return w, v


def condition_number(a) -> float:
    """Ratio of largest to smallest eigenvalue of a Hermitian PSD matrix.

    Returns inf when the smallest eigenvalue falls below the rank tolerance.
    """
    a = _check_hermitian(as_matrix(a))
    w = np.linalg.eigvalsh(a)
    w_max = w[-1]
    if w_max <= 0:
        raise ValueError("condition number requested for a zero (or negative) matrix")
    w_min = w[0]
    if w_min <= RANK_TOL * w_max:
        return np.inf
    return float(w_max / w_min)


def trace_inverse_bounds(a) -> tuple[float, float]:
    """Bracket tr(inv(A)) for Hermitian PD A without inverting it.

    lower = sum_i 1/A[i,i]; upper = lower * (1 + kappa)^2 / (4 kappa) with
    kappa the condition number.  lower <= tr(inv(A)) <= upper.
    """
    a = _check_hermitian(as_matrix(a))
    w = np.linalg.eigvalsh(a)
    if w[0] <= RANK_TOL * max(w[-1], 0.0) or w[-1] <= 0:
        raise NumericalError(
            f"trace-inverse bounds need a PD matrix; smallest eigenvalue {w[0]:.3e}"
        )
    lower = float(np.sum(1.0 / np.real(np.diag(a))))
    kappa = w[-1] / w[0]
    upper = float(lower * (1 + kappa) ** 2 / (4 * kappa))
    return lower, upper


def solve_hermitian_pd(a, b) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A.

    Raises :class:`NumericalError` naming the smallest eigenvalue when A is
    singular (or indefinite) within tolerance.
    """
    a = _check_hermitian(as_matrix(a))
    b = np.asarray(b, dtype=np.complex128)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        w_min = float(np.linalg.eigvalsh(a)[0])
        raise NumericalError(
            f"system matrix is not positive definite; smallest eigenvalue {w_min:.6e}"
        ) from None
    return np.linalg.solve(a, b)


@dataclass(frozen=True)
class LowRankPsd:
    """Hermitian PSD matrix stored as scale * factor @ factor^H."""

    factor: np.ndarray  # d x r
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "factor", as_matrix(self.factor))
        if self.scale < 0:
            raise ValueError(f"scale must be nonnegative, got {self.scale}")

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    @property
    def rank_bound(self) -> int:
        return self.factor.shape[1]

    def to_dense(self) -> np.ndarray:
        return self.scale * (self.factor @ self.factor.conj().T)

    def trace(self) -> float:
        return float(self.scale * np.sum(np.abs(self.factor) ** 2))
