"""Gaussian prior covariance and its truncated-SVD reduction basis.

The covariance between pixels i and j is sigma^2 exp(-d^2 / (2 l^2)) with
d the Euclidean distance between pixel centres in pixel units. Because the
squared distance splits over the two axes, the full covariance is the
Kronecker product of one 1-D kernel with itself: its eigenpairs are
products of the 1-D eigenpairs, so the basis for a 128x128 grid never
requires the dense 16384^2 decomposition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .projector import ImageGrid


@dataclass(frozen=True)
class PriorSpec:
    """Parameters of the Gaussian covariance kernel."""

    sigma: float = 0.1
    corr_length: float = 1.5
    grid: ImageGrid = ImageGrid()

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if self.corr_length <= 0:
            raise ConfigurationError("corr_length must be positive")


@dataclass(frozen=True)
class ReducedBasis:
    """Projection matrix P = U_r S_r^(1/2) and the retained singular values.

    P P^T is the best rank-r approximation of the prior covariance and
    P^T P equals diag(singular_values).
    """

    r: int
    P: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        if self.P.shape[1] != self.r or self.singular_values.shape != (self.r,):
            raise ConfigurationError("inconsistent reduced basis shapes")

    @property
    def n_pixels(self):
        return self.P.shape[0]

    @property
    def rank_ratio(self):
        return self.r / self.n_pixels


def covariance_entry(spec, i, j):
    """Covariance between the pixels at flat indices i and j."""
    n = spec.grid.n
    if not (0 <= i < n * n and 0 <= j < n * n):
        raise IndexError("pixel index out of range")
    iy, ix = divmod(int(i), n)
    jy, jx = divmod(int(j), n)
    d2 = float((ix - jx) ** 2 + (iy - jy) ** 2)
    return spec.sigma**2 * np.exp(-d2 / (2.0 * spec.corr_length**2))


def dense_covariance(spec):
    """Full covariance matrix; intended for small grids and tests."""
    n = spec.grid.n
    k = kernel_1d(n, spec.corr_length)
    return spec.sigma**2 * np.kron(k, k)


def kernel_1d(n, corr_length):
    """The n x n one-axis Gaussian kernel matrix."""
    idx = np.arange(n)
    d2 = (idx[:, None] - idx[None, :]) ** 2
    return np.exp(-d2 / (2.0 * corr_length**2))


def _signed_eigh(k):
    """Eigendecomposition with deterministic sign: first sizeable entry
    of each eigenvector is positive; tiny negative eigenvalues from
    round-off are clipped at zero."""
    w, e = np.linalg.eigh(k)
    w = np.clip(w, 0.0, None)
    for col in range(e.shape[1]):
        v = e[:, col]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            e[:, col] = -v
    return w, e


def build_reduced_basis(spec, r):
    """Top-r basis of the prior covariance via the separable eigenproblem.

    2-D singular values are all products of 1-D eigenvalue pairs, sorted
    descending with ties broken by the (row-factor, column-factor) index
    pair so the basis is identical across runs.
    """
    n = spec.grid.n
    n_pixels = n * n
    if not (1 <= r <= n_pixels):
        raise ConfigurationError(f"rank r={r} outside [1, {n_pixels}]")

    w, e = _signed_eigh(kernel_1d(n, spec.corr_length))

    ai, bi = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    products = spec.sigma**2 * np.outer(w, w).ravel()
    order = np.lexsort((bi.ravel(), ai.ravel(), -products))[:r]

    s = products[order]
    a_sel = ai.ravel()[order]
    b_sel = bi.ravel()[order]

    # column (a, b) of P is sqrt(s) * (e_a outer e_b) flattened in the
    # image's y-major order
    p = np.empty((n_pixels, r))
    scale = np.sqrt(s)
    for col in range(r):
        np.multiply.outer(e[:, a_sel[col]], e[:, b_sel[col]], out=p[:, col].reshape(n, n))
        p[:, col] *= scale[col]
    return ReducedBasis(r=r, P=p, singular_values=s)
