"""Dimension-reduced sequential filter over the slice stack.

The reconstruction of slice k is x_k = x_k^p + P a_k, with P the prior
reduction basis and a_k the reduced correction coefficients. The forecast
from one slice to the next is the identity, so prediction only folds the
previous correction into the mean and inflates the covariance by the model
error q. All covariance algebra stays in the r-dimensional reduced space:
with B = P V (V a factor of the previous reduced covariance) the
prediction-covariance inverse acts on P through

    (C^p)^-1 P = q^-1 P - q^-1 B (B^T q^-1 B + I)^-1 B^T q^-1 P,

and the update solves for the new coefficients and covariance

    a   = phi (A P)^T R^-1 (y - A x^p)
    phi = ((A P)^T R^-1 (A P) + P^T (C^p)^-1 P + xi I)^-1,

where the ridge xi grows linearly with the number of angles of the slice
and keeps the solve well posed under severely sparse sampling.

``run_pipeline`` chains init/predict/update over a whole scan. In the
default Cholesky mode it propagates the inverse covariance directly
(phi^-1 from the previous update is reused in the Woodbury step), which is
algebraically identical to the factored route and avoids materializing V
each slice; the factored route remains available per step and under
``factorization="eigh"``.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, FilterBreakdownError
from .projector import MatrixCache

logger = logging.getLogger(__name__)

EIG_DROP_REL = 1e-12  # relative cutoff for discarding covariance eigenvalues


@dataclass(frozen=True)
class NoiseModel:
    """Scalar model-error and observation-error variances (Q = q I, R = r I)."""

    q_scalar: float = 1e-5
    r_scalar: float = 1e-6

    def __post_init__(self):
        if self.q_scalar <= 0 or self.r_scalar <= 0:
            raise ConfigurationError("noise variances must be positive")


@dataclass(frozen=True)
class RegularizerSchedule:
    """Ridge added before the covariance inverse, linear in the angle count."""

    slope: float = 0.1

    def __post_init__(self):
        if self.slope < 0:
            raise ConfigurationError("ridge slope must be non-negative")

    def ridge(self, n_angles):
        return self.slope * n_angles


class FilterState:
    """Running state after the update of slice k.

    The reduced covariance phi = V V^T is represented by its inverse
    ``info`` (the matrix the update inverted); V is materialized lazily
    from the Cholesky factor, or eagerly by eigen-factorization when
    ``factorization='eigh'``.
    """

    def __init__(self, k, x_pred, alpha, info, chol_lower=None, V=None):
        self.k = k
        self.x_pred = x_pred
        self.alpha = alpha
        self.info = info
        self._chol_lower = chol_lower
        self._V = V

    @property
    def V(self):
        if self._V is None:
            if self._chol_lower is None:
                raise FilterBreakdownError(self.k, "state has no covariance factor")
            # phi = K^-1 = L^-T L^-1, so V = L^-T
            inv_l, ok = sla.lapack.dtrtri(self._chol_lower, lower=1)
            if ok != 0:
                raise FilterBreakdownError(self.k, "triangular inversion failed")
            self._V = np.ascontiguousarray(inv_l.T)
        return self._V

    def phi(self):
        v = self.V
        return v @ v.T

    def reconstruction(self, basis):
        """Current slice estimate x_k = x_k^p + P a_k."""
        return self.x_pred + basis.P @ self.alpha


@dataclass
class Prediction:
    """Internals produced by the prediction step for one slice."""

    k: int
    x_pred: np.ndarray
    V: np.ndarray
    proj_cinv_p: np.ndarray  # P^T (C^p)^-1 P, the term entering phi^-1
    q: float
    _inner: np.ndarray | None = field(default=None, repr=False)

    def cinv_p(self, basis):
        """Materialize (C^p)^-1 P; intended for small problems and tests."""
        p = basis.P
        if self._inner is None:
            return p / self.q
        return (p - (p @ self.V) @ self._inner) / self.q


def _sym(a):
    return 0.5 * (a + a.T)


def _gram(a, scale=1.0):
    """scale * a^T a via a rank-k symmetric update."""
    c = sla.blas.dsyrk(scale, a, trans=1, lower=0)
    return c + np.triu(c, 1).T


def _spd_inverse(a, overwrite=False):
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    c, ok = sla.lapack.dpotrf(a, lower=1, overwrite_a=overwrite)
    if ok != 0:
        raise np.linalg.LinAlgError(f"leading minor {ok} not positive definite")
    inv, ok = sla.lapack.dpotri(c, lower=1, overwrite_c=True)
    if ok != 0:
        raise np.linalg.LinAlgError("potri failed")
    return inv + np.tril(inv, -1).T


def eigh_factor(phi, drop_rel=EIG_DROP_REL):
    """Symmetric factor of phi with negative eigenvalues clipped at zero
    and relatively tiny ones dropped; returns V with phi ~= V V^T."""
    w, u = np.linalg.eigh(_sym(phi))
    w = np.clip(w, 0.0, None)
    keep = w > drop_rel * (w.max() if w.size else 0.0)
    return u[:, keep] * np.sqrt(w[keep])


def project_sinogram(proj, basis):
    """A_k P, the projected forward operator for one angle set."""
    return proj.matrix @ basis.P


def init_first_slice(proj, y0, basis, noise, alpha_tik=None, ap=None):
    """Reduced-space regularized solve for the first slice.

    Solves c = ((A0 P)^T (A0 P) + alpha I)^-1 (A0 P)^T y0 and seeds the
    state with x_pred = P c, zero coefficients, and the posterior
    covariance factor matching the ridge.
    """
    if alpha_tik is None:
        alpha_tik = noise.r_scalar
    if alpha_tik < 0:
        raise ConfigurationError("alpha_tik must be non-negative")
    if ap is None:
        ap = project_sinogram(proj, basis)
    g = _gram(ap)
    g[np.diag_indices_from(g)] += alpha_tik
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(
            "reduced normal matrix is singular; the configuration is "
            "ill-posed (alpha_tik = 0 with rank-deficient data)"
        ) from exc
    c = sla.cho_solve((low, True), ap.T @ y0)
    x0 = basis.P @ c
    # posterior of the equivalent Bayesian problem: phi0 = r (G)^-1
    info = g / noise.r_scalar
    chol = low / np.sqrt(noise.r_scalar)
    return FilterState(
        k=0, x_pred=x0, alpha=np.zeros(basis.r), info=info, chol_lower=chol
    )


def predict(state, basis, noise):
    """Forecast to the next slice and project the prediction-covariance
    inverse into the reduced basis via the low-rank identity."""
    x_pred = state.x_pred + basis.P @ state.alpha
    v = state.V
    s = basis.singular_values
    q = noise.q_scalar

    g = s[:, None] * v  # P^T B, using P^T P = diag(s)
    w = v.T @ g
    w[np.diag_indices_from(w)] += q
    try:
        cw = sla.cho_factor(w, lower=True)
        inner = sla.cho_solve(cw, g.T)  # (B^T B + q I)^-1 B^T P
    except np.linalg.LinAlgError as exc:
        raise FilterBreakdownError(state.k + 1, f"prediction solve failed: {exc}")
    proj_cinv_p = (np.diag(s) - g @ inner) / q
    return Prediction(
        k=state.k + 1,
        x_pred=x_pred,
        V=v,
        proj_cinv_p=_sym(proj_cinv_p),
        q=q,
        _inner=inner,
    )


def update(pred, proj, y, basis, noise, reg, ap=None, h=None, factorization="chol"):
    """Measurement update of one slice in the reduced space.

    ``ap`` and ``h`` allow reusing the projected operator A_k P and its
    scaled Gram matrix when an angle set recurs.
    """
    if ap is None:
        ap = project_sinogram(proj, basis)
    if h is None:
        h = _gram(ap, 1.0 / noise.r_scalar)
    k = pred.k
    xi = reg.ridge(len(proj.angle_set.angles_deg))

    resid = y - proj.forward(pred.x_pred)
    rhs = (ap.T @ resid) / noise.r_scalar

    info = h + pred.proj_cinv_p
    info[np.diag_indices_from(info)] += xi

    chol = None
    v = None
    try:
        low = np.linalg.cholesky(info)
        alpha = sla.cho_solve((low, True), rhs)
        chol = low
    except np.linalg.LinAlgError:
        logger.warning(
            "slice %d: covariance solve broke down, falling back to "
            "eigenvalue-clipped pseudo-inversion",
            k,
        )
        w, u = np.linalg.eigh(_sym(info))
        good = w > EIG_DROP_REL * abs(w).max()
        phi = (u[:, good] / w[good]) @ u[:, good].T
        alpha = phi @ rhs
        v = eigh_factor(phi)
    if factorization == "eigh" and v is None:
        v = eigh_factor(_spd_inverse(info))
    if not np.all(np.isfinite(alpha)):
        raise FilterBreakdownError(k, "non-finite values in the covariance update")
    return FilterState(k=k, x_pred=pred.x_pred, alpha=alpha, info=info,
                       chol_lower=chol, V=v)


def _predict_info_fast(state, basis, noise):
    """P^T (C^p)^-1 P from the previous inverse covariance.

    With phi = info^-1, the Woodbury identity for C^p = P phi P^T + q I
    gives q^-1 S - q^-2 S (info + q^-1 S)^-1 S, all in the reduced space.
    Equivalent to predict(); avoids forming the covariance factor.
    """
    s = basis.singular_values
    q = noise.q_scalar
    d = state.info.copy()
    sq = s / q
    d[np.diag_indices_from(d)] += sq
    # _spd_inverse builds an exactly symmetric inverse; the row/column
    # scaling by the same vector keeps it symmetric.
    t = _spd_inverse(d, overwrite=True)
    t *= sq[:, None]
    t *= sq[None, :]
    np.negative(t, out=t)
    t[np.diag_indices_from(t)] += sq
    return t


@dataclass
class SliceTelemetry:
    slice_index: int
    wall_time: float
    residual_norm: float
    ridge: float
    n_angles: int


def run_pipeline(scan, geom, grid, basis, noise, reg, alpha_tik=None, cache=None,
                 factorization="chol", ap_cache_size=4):
    """Filter a whole scan; returns (volume, telemetry list).

    The projected operator A_k P and its Gram matrix are cached per
    distinct angle set (bounded LRU), which pays off for schedules that
    revisit angle sets.
    """
    if factorization not in ("chol", "eigh"):
        raise ConfigurationError("factorization must be 'chol' or 'eigh'")
    slices = scan.slices if hasattr(scan, "slices") else list(scan)
    if not slices:
        raise ConfigurationError("empty scan")
    if cache is None:
        cache = MatrixCache()

    n = grid.n
    vol = np.empty((len(slices), n, n))
    telemetry = []

    ap_cache = {}

    def projected(proj):
        key = proj.angle_set.quantized()
        if key not in ap_cache:
            if len(ap_cache) >= ap_cache_size:
                ap_cache.pop(next(iter(ap_cache)))
            ap = project_sinogram(proj, basis)
            ap_cache[key] = (ap, _gram(ap, 1.0 / noise.r_scalar))
        return ap_cache[key]

    state = None
    x_rec = None
    for s in slices:
        t0 = time.perf_counter()
        proj = cache.get(geom, grid, s.angle_set)
        ap, h = projected(proj)
        if state is None:
            state = init_first_slice(proj, s.sinogram, basis, noise,
                                     alpha_tik=alpha_tik, ap=ap)
            ridge = 0.0
        else:
            # identity forecast: the prediction mean is the previous
            # reconstruction, already in hand
            if factorization == "chol":
                pred = Prediction(
                    k=state.k + 1,
                    x_pred=x_rec,
                    V=None,
                    proj_cinv_p=_predict_info_fast(state, basis, noise),
                    q=noise.q_scalar,
                )
            else:
                pred = predict(state, basis, noise)
            state = update(pred, proj, s.sinogram, basis, noise, reg,
                           ap=ap, h=h, factorization=factorization)
            ridge = reg.ridge(len(s.angle_set.angles_deg))
        x_rec = state.reconstruction(basis)
        if not np.all(np.isfinite(x_rec)):
            raise FilterBreakdownError(s.slice_index, "non-finite reconstruction")
        vol[s.slice_index] = x_rec.reshape(n, n)
        telemetry.append(
            SliceTelemetry(
                slice_index=s.slice_index,
                wall_time=time.perf_counter() - t0,
                residual_norm=float(np.linalg.norm(s.sinogram - proj.forward(x_rec))),
                ridge=ridge,
                n_angles=len(s.angle_set.angles_deg),
            )
        )
    return vol, telemetry
