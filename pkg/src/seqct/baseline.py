"""Reference reconstructions: per-slice quadratic-regularized least squares.

The dense-angle reference volume solved here stands in for a calibrated
full-sampling reconstruction and serves as the comparison target for all
sparse-angle experiments. The same solver at sparse angles gives the
per-slice independent baseline the sequential filter is measured against.
"""

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class SolveInfo:
    iterations: int
    relative_residual: float
    converged: bool


def default_alpha(proj, scale=1e-2):
    """Regularization weight from a row-sum bound on ||A^T A||.

    A has non-negative entries, so max(A^T (A 1)) equals the largest
    row sum of A^T A.
    """
    ones = np.ones(proj.cols)
    return scale * float(proj.adjoint(proj.forward(ones)).max())


def tikhonov_cgls(proj, y, alpha, max_iter=200, tol=1e-8, x0=None):
    """Conjugate gradients on (A^T A + alpha I) x = A^T y.

    Deterministic for fixed inputs. On non-convergence the last iterate is
    still returned, with a warning carrying the final residual.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    b = proj.adjoint(y)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(proj.cols), SolveInfo(0, 0.0, True)

    def apply(v):
        return proj.adjoint(proj.forward(v)) + alpha * v

    if x0 is None:
        x = np.zeros(proj.cols)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float, copy=True)
        r = b - apply(x)
    p = r.copy()
    rs = float(r @ r)

    relres = np.sqrt(rs) / bnorm
    it = 0
    while relres >= tol and it < max_iter:
        ap = apply(p)
        a = rs / float(p @ ap)
        x += a * p
        r -= a * ap
        rs_new = float(r @ r)
        p *= rs_new / rs
        p += r
        rs = rs_new
        relres = np.sqrt(rs) / bnorm
        it += 1

    converged = relres < tol
    if not converged:
        warnings.warn(
            f"regularized CG stopped at {max_iter} iterations, "
            f"relative residual {relres:.3e}",
            stacklevel=2,
        )
    return x, SolveInfo(it, relres, converged)


def sparse_baseline_volume(scans, cache, geom, grid, alpha=None, max_iter=200, tol=1e-8):
    """Independent per-slice regularized reconstruction of a scan."""
    n = grid.n
    vol = np.empty((len(scans.slices), n, n))
    for s in scans.slices:
        proj = cache.get(geom, grid, s.angle_set)
        a = default_alpha(proj) if alpha is None else alpha
        x, _ = tikhonov_cgls(proj, s.sinogram, a, max_iter=max_iter, tol=tol)
        vol[s.slice_index] = x.reshape(n, n)
    return vol


def reference_volume(scans, cache, geom, grid, alpha=None, max_iter=300, tol=1e-7,
                     warm_start=True):
    """Dense-angle reference volume, solved slice by slice.

    Consecutive slices are nearly identical, so each solve warm-starts
    from the previous slice's solution; results stay deterministic.
    """
    n = grid.n
    vol = np.empty((len(scans.slices), n, n))
    x_prev = None
    for s in scans.slices:
        proj = cache.get(geom, grid, s.angle_set)
        a = default_alpha(proj) if alpha is None else alpha
        x0 = x_prev if warm_start else None
        x, _ = tikhonov_cgls(proj, s.sinogram, a, max_iter=max_iter, tol=tol, x0=x0)
        vol[s.slice_index] = x.reshape(n, n)
        x_prev = x
    return vol
