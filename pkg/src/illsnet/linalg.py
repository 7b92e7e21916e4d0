"""Dense minimum-norm least-squares kernel.

Every parameter fit and every linearised activation update in this package
reduces to one call of :func:`lstsq`. Matrices are plain 2-d ``float64``
numpy arrays in row-major semantic order; vectors are 1-d arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

# Singular values below RCOND * sigma_max are treated as zero. Keeps
# near-duplicate columns (e.g. saturated tanh units) from exploding
# coefficients while leaving well-posed systems untouched.
RCOND = 1e-10


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Minimum-Euclidean-norm minimiser of ||A x - b||_2.

    Attributes
    ----------
    coefficients : (cols,) array
        The minimum-norm solution vector.
    residual_norm : float
        ||A x - b||_2 at the solution, always >= 0.
    rank : int
        Number of singular values retained by the RCOND cutoff.
    """

    coefficients: np.ndarray
    residual_norm: float
    rank: int


def _check_matrix(a, name="A"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    return a


def _check_vector(x, name="b"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    return x


def lstsq(a, b) -> LeastSquaresSolution:
    """Solve min ||A x - b||_2, returning the minimum-norm solution.

    Uses an SVD-based solve so rank-deficient systems (duplicated or
    vanishing columns) get well-defined pseudo-inverse behaviour instead
    of arbitrary large coefficients.

    Parameters
    ----------
    a : (rows, cols) array_like
    b : (rows,) array_like

    Raises
    ------
    NonFiniteInput
        If any entry of ``a`` or ``b`` is NaN or infinite.
    DimensionMismatch
        If ``len(b) != rows``.
    """
    a = _check_matrix(a)
    b = _check_vector(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"A has {a.shape[0]} rows but b has length {b.shape[0]}"
        )
    coeffs, _, rank, _ = np.linalg.lstsq(a, b, rcond=RCOND)
    # lstsq only reports residuals for full-rank overdetermined systems;
    # compute the norm directly so it is always defined.
    residual_norm = float(np.linalg.norm(a @ coeffs - b))
    return LeastSquaresSolution(coefficients=coeffs, residual_norm=residual_norm, rank=int(rank))


def matvec(a, x) -> np.ndarray:
    """Matrix-vector product A @ x with dimension checking."""
    a = _check_matrix(a)
    x = _check_vector(x, name="x")
    if a.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            f"A has {a.shape[1]} columns but x has length {x.shape[0]}"
        )
    return a @ x


def transpose(a) -> np.ndarray:
    """Transpose of a matrix (returns a contiguous copy)."""
    a = _check_matrix(a)
    return np.ascontiguousarray(a.T)
