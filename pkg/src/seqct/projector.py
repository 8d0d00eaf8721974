"""Sparse fan-beam system matrices: build, apply, noise, caching.

A system matrix maps the flattened n*n image to one slice's sinogram.
Row ``i * n_detectors + j`` holds the exact pixel intersection lengths of
the ray from the source at ``angles[i]`` to the centre of detector pixel
``j``. Matrices are deterministic for identical inputs and are cached
keyed by the quantized angle set, since schedules revisit angle sets and
assembling a matrix is the expensive part of a run.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry
from ._siddon import siddon_csr
from .errors import GeometryError

FLOAT_EQ_TOL = 1e-9


@dataclass(frozen=True)
class ImageGrid:
    """Square reconstruction grid centred at the rotation centre.

    ``fov_radius`` marks the disk that reconstructions are trusted on;
    the matrix always covers the full square, masking is left to metrics
    and segmentation.
    """

    n: int = 128
    pixel_size: float = 4.0
    fov_radius: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise GeometryError("grid needs at least 2 pixels per side")
        if self.pixel_size <= 0:
            raise GeometryError("pixel_size must be positive")
        if self.fov_radius is None:
            object.__setattr__(self, "fov_radius", self.half_extent)
        elif self.fov_radius > self.half_extent * (1 + FLOAT_EQ_TOL):
            raise GeometryError("fov_radius larger than the grid half-extent")

    @property
    def half_extent(self):
        return self.n * self.pixel_size / 2.0

    @property
    def n_pixels(self):
        return self.n * self.n

    @property
    def origin(self):
        """Coordinate of the lower-left grid corner (x = y)."""
        return -self.half_extent

    def pixel_centers(self):
        """(n_pixels, 2) array of centre coordinates in flat index order."""
        c = self.origin + (np.arange(self.n) + 0.5) * self.pixel_size
        xx, yy = np.meshgrid(c, c)  # rows iterate y, columns x
        return np.column_stack([xx.ravel(), yy.ravel()])


class SparseProjection:
    """Row-compressed system matrix for one angle set."""

    def __init__(self, matrix, angle_set, grid=None):
        self.matrix = matrix.tocsr()
        self.angle_set = angle_set
        self.grid = grid
        self._transpose = None

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    @property
    def nnz(self):
        return self.matrix.nnz

    def forward(self, x):
        return forward(self, x)

    def adjoint(self, y):
        return adjoint(self, y)

    def transpose_csr(self):
        """Cached CSR transpose; speeds up repeated adjoint applications."""
        if self._transpose is None:
            self._transpose = self.matrix.T.tocsr()
        return self._transpose


def ray_endpoints(geom, grid, angles):
    """Source and detector endpoints for every ray of an angle set."""
    n_rays = len(angles.angles_deg) * geom.n_detectors
    src = np.empty((n_rays, 2))
    dst = np.empty((n_rays, 2))
    for i, ang in enumerate(angles.angles_deg):
        s, px = geometry.source_positions(geom, ang)
        lo = i * geom.n_detectors
        src[lo : lo + geom.n_detectors] = s
        dst[lo : lo + geom.n_detectors] = px
    return src, dst


def _check_geometry(geom, grid, src, dst):
    half = grid.half_extent
    inside = (np.abs(src[:, 0]) <= half) & (np.abs(src[:, 1]) <= half)
    if np.any(inside):
        raise GeometryError("a source position lies inside the image grid")
    circum = half * np.sqrt(2.0)
    if np.hypot(src[:, 0], src[:, 1]).min() <= circum:
        raise GeometryError("sources must stay outside the grid circumradius")
    if np.hypot(dst[:, 0], dst[:, 1]).min() <= circum:
        raise GeometryError("detector pixels must stay outside the grid circumradius")


def build_matrix(geom, grid, angles):
    """Assemble the sparse system matrix for one slice's angle set."""
    src, dst = ray_endpoints(geom, grid, angles)
    _check_geometry(geom, grid, src, dst)
    indptr, indices, data = siddon_csr(src, dst, grid.n, grid.origin, grid.pixel_size)
    mat = sp.csr_matrix((data, indices, indptr), shape=(src.shape[0], grid.n_pixels))
    return SparseProjection(mat, angles, grid)


def forward(proj, x):
    """Sinogram of an image vector, y = A x."""
    x = np.asarray(x).ravel()
    if x.size != proj.cols:
        raise ValueError(f"image has {x.size} entries, matrix expects {proj.cols}")
    return proj.matrix @ x


def adjoint(proj, y):
    """Backprojection of a sinogram vector, A^T y."""
    y = np.asarray(y).ravel()
    if y.size != proj.rows:
        raise ValueError(f"sinogram has {y.size} entries, matrix expects {proj.rows}")
    return proj.transpose_csr() @ y


def add_noise(y, noise_std, seed):
    """Add i.i.d. zero-mean Gaussian noise of the given standard deviation."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if noise_std == 0:
        return np.array(y, copy=True)
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, noise_std, size=np.shape(y))


class MatrixCache:
    """Thread-safe LRU cache of system matrices keyed by quantized angles."""

    def __init__(self, maxsize=8):
        self.maxsize = maxsize
        self._lock = threading.Lock()
        self._store = OrderedDict()
        self.hits = 0
        self.misses = 0

    def key(self, geom, grid, angles):
        return (geom, grid, angles.quantized())

    def get(self, geom, grid, angles):
        key = self.key(geom, grid, angles)
        with self._lock:
            if key in self._store:
                self.hits += 1
                self._store.move_to_end(key)
                return self._store[key]
        proj = build_matrix(geom, grid, angles)
        with self._lock:
            if key not in self._store:
                self.misses += 1
                self._store[key] = proj
                while len(self._store) > self.maxsize:
                    self._store.popitem(last=False)
            return self._store[key]
