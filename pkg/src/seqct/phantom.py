"""Synthetic log volumes: slowly varying slices, knots, wet sapwood ring.

The object is a disk of wood with concentric growth rings, a bright outer
sapwood ring whose intensity matches the knots (an intentional confound),
and cone-shaped knots growing outward from the pith across a range of
slices. Edges are anti-aliased over roughly one pixel so that the small
per-slice pith drift changes consecutive slices smoothly, which is the
premise that makes an identity slice-to-slice forecast sensible.

Phantom geometry is expressed in pixel units; attenuation values are in
the same arbitrary units the projector integrates over.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geom_mod
from . import projector
from .errors import ConfigurationError
from .projector import ImageGrid


@dataclass(frozen=True)
class KnotSpec:
    """One knot: a capsule from the pith outward, growing along slices."""

    start_slice: int
    end_slice: int
    azimuth_deg: float
    elevation_rate: float  # radial growth in pixels per slice
    base_radius: float  # capsule half-thickness in pixels

    def __post_init__(self):
        if self.start_slice >= self.end_slice:
            raise ConfigurationError("knot needs start_slice < end_slice")
        if self.elevation_rate <= 0 or self.base_radius <= 0:
            raise ConfigurationError("knot growth rate and radius must be positive")

    def tip_radius(self, k):
        """Radial extent at slice k (monotone along the slice axis)."""
        return self.elevation_rate * (k - self.start_slice + 1)

    def thickness(self, k, ramp=8.0, taper_out=True):
        """Capsule half-thickness, ramped in (and out unless the knot is
        truncated by the volume boundary) so consecutive slices stay close."""
        w_in = min(1.0, (k - self.start_slice + 1) / ramp)
        w_out = min(1.0, (self.end_slice - k + 1) / ramp) if taper_out else 1.0
        return self.base_radius * min(w_in, w_out)

    def max_radius(self):
        return self.tip_radius(self.end_slice) + self.base_radius


@dataclass(frozen=True)
class LogPhantom:
    """Full description of a synthetic log volume."""

    n_slices: int = 61
    grid: ImageGrid = ImageGrid()
    slice_spacing: float = 2.0
    background_level: float = 0.0
    wood_level: float = 0.20
    ring_contrast: float = 0.03
    sapwood_level: float = 0.40
    knot_level: float = 0.40
    knots: tuple = ()
    pith_drift: float = 0.1  # pixels per slice
    rng_seed: int = 1234
    log_radius: float | None = None  # pixels; default 0.78 * half grid
    sapwood_width: float = 6.0
    ring_period: float = 5.0
    drift_azimuth_deg: float = 30.0
    edge_width: float = 1.6  # anti-aliasing width in pixels
    ring_wobble: float = 0.25  # radians of ring phase drift along z
    ring_wobble_period: float = 40.0  # slices

    def __post_init__(self):
        if self.n_slices < 1:
            raise ConfigurationError("n_slices must be positive")
        if not (self.background_level < self.wood_level < self.knot_level):
            raise ConfigurationError(
                "need background_level < wood_level < knot_level"
            )
        if self.background_level != 0.0:
            raise ConfigurationError("background (air) level must be 0")
        if not (0.9 * self.knot_level <= self.sapwood_level <= 1.1 * self.knot_level):
            raise ConfigurationError(
                "sapwood_level must lie within 10% of knot_level"
            )
        if self.log_radius is None:
            object.__setattr__(self, "log_radius", 0.78 * self.grid.n / 2.0)
        for knot in self.knots:
            if knot.max_radius() > self.log_radius:
                raise ConfigurationError(
                    f"knot at azimuth {knot.azimuth_deg} extends beyond the log radius"
                )
            if knot.end_slice >= self.n_slices:
                raise ConfigurationError("knot extends past the last slice")


def default_knots(n_slices=61, log_radius=49.92):
    """Knot population used by the default phantom: spread in azimuth,
    overlapping slice windows, at least two alive in any late block.
    Sizes are tuned for the default 128 grid and scale with the log radius."""
    scale = log_radius / 49.92
    spans = [
        (2, 26, 20.0, 1.0, 3.2),
        (12, 40, 100.0, 0.9, 2.8),
        (25, 60, 170.0, 0.8, 3.4),
        (38, 60, 255.0, 0.8, 3.0),
        (46, 60, 320.0, 0.9, 3.6),
        (50, 60, 60.0, 0.9, 3.0),
    ]
    knots = []
    for start, end, az, rate, radius in spans:
        end = min(end, n_slices - 1)
        if start < end:
            knots.append(KnotSpec(start, end, az, rate * scale, radius * scale))
    return tuple(knots)


def default_phantom(n_slices=61, grid=None, **overrides):
    grid = grid if grid is not None else ImageGrid()
    log_radius = overrides.get("log_radius") or 0.78 * grid.n / 2.0
    return LogPhantom(
        n_slices=n_slices,
        grid=grid,
        knots=default_knots(n_slices, log_radius),
        **overrides,
    )


def _coverage(signed_dist, width):
    """Smooth 1-0 transition across a signed distance (negative inside)."""
    return np.clip(0.5 - signed_dist / width, 0.0, 1.0)


def _render_slice(ph, k):
    n = ph.grid.n
    c = np.arange(n) - (n - 1) / 2.0
    xx, yy = np.meshgrid(c, c)

    drift = math.radians(ph.drift_azimuth_deg)
    px = ph.pith_drift * k * math.cos(drift)
    py = ph.pith_drift * k * math.sin(drift)
    rx = xx - px
    ry = yy - py
    r = np.hypot(rx, ry)

    c_log = _coverage(r - ph.log_radius, ph.edge_width)
    c_heart = _coverage(r - (ph.log_radius - ph.sapwood_width), ph.edge_width)

    phase = ph.ring_wobble * math.sin(2.0 * math.pi * k / ph.ring_wobble_period)
    rings = ph.wood_level + ph.ring_contrast * np.sin(
        2.0 * math.pi * r / ph.ring_period + phase
    )

    img = c_heart * rings + (c_log - c_heart) * ph.sapwood_level
    labels = np.zeros((n, n), dtype=np.uint8)

    for knot in ph.knots:
        if not (knot.start_slice <= k <= knot.end_slice):
            continue
        az = math.radians(knot.azimuth_deg)
        ux, uy = math.cos(az), math.sin(az)
        tip = knot.tip_radius(k)
        along = np.clip(rx * ux + ry * uy, 0.0, tip)
        dist = np.hypot(rx - along * ux, ry - along * uy)
        taper_out = knot.end_slice < ph.n_slices - 1
        ck = _coverage(dist - knot.thickness(k, taper_out=taper_out), ph.edge_width)
        ck *= c_heart
        img = img * (1.0 - ck) + ph.knot_level * ck
        labels |= (ck > 0.5).astype(np.uint8)

    np.clip(img, 0.0, ph.knot_level, out=img)
    return img, labels


def generate(ph):
    """Render the attenuation volume and the binary knot-label volume.

    The sapwood ring is deliberately not labelled: it shares the knots'
    intensity and acts as a segmentation confound.
    """
    n = ph.grid.n
    vol = np.empty((ph.n_slices, n, n))
    labels = np.empty((ph.n_slices, n, n), dtype=np.uint8)
    for k in range(ph.n_slices):
        vol[k], labels[k] = _render_slice(ph, k)
    return vol, labels


@dataclass
class SliceScan:
    """One slice's acquisition: the angle set and its noisy sinogram."""

    slice_index: int
    angle_set: geom_mod.SliceAngleSet
    sinogram: np.ndarray


@dataclass
class ScanResult:
    slices: list
    noise_std: float

    @property
    def r_scalar(self):
        """Observation noise variance; floored when the scan is noiseless."""
        return max(self.noise_std**2, 1e-6)

    def __len__(self):
        return len(self.slices)


def simulate_scan(vol, geom, grid, sched, noise_std=None, seed=0, cache=None):
    """Scan a volume slice by slice under a rotation schedule.

    ``noise_std=None`` selects the default noise level, 1% of the peak of
    the first slice's clean sinogram; pass 0 for a noiseless scan. Noise
    draws are reproducible: slice k uses the stream seeded by (seed, k).
    """
    if cache is None:
        cache = projector.MatrixCache()
    n_slices = vol.shape[0]
    angle_sets = geom_mod.materialize_schedule(sched, n_slices)

    slices = []
    std = None if noise_std is None else float(noise_std)
    for k in range(n_slices):
        proj = cache.get(geom, grid, angle_sets[k])
        clean = proj.forward(vol[k].ravel())
        if std is None:
            std = 0.01 * float(np.abs(clean).max())
        y = projector.add_noise(clean, std, seed=[seed, k])
        slices.append(SliceScan(k, angle_sets[k], y))
    return ScanResult(slices=slices, noise_std=std)
