"""Fan-beam acquisition geometry and per-slice source-angle schedules.

The scanner is described by a rotating source/detector assembly: an X-ray
point source on a circle of radius ``source_radius`` and a flat line
detector on the opposite side at distance ``detector_radius`` from the
centre of rotation. Lateral shifts and a small detector tilt reproduce a
real offset-detector installation. A schedule decides how the equi-spaced
source ring is rotated from one slice to the next.

Angles are degrees everywhere; lengths use the (unitless) scanner units of
the geometry parameters. All types are immutable after construction.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SCHEMES = ("fixed", "one_degree", "quarter_delta", "random_uniform")

# Cache keys quantize angles to 1e-6 degree so float round-off cannot
# cause a miss for schedules that revisit an angle set.
ANGLE_QUANTUM = 1e-6


@dataclass(frozen=True)
class FanBeamGeometry:
    """Physical description of the fan-beam scanner."""

    source_radius: float = 859.46
    detector_radius: float = 705.37
    detector_width: float = 1154.2
    source_shift: float = 232.86
    detector_shift: float = -24.65
    detector_tilt: float = 0.16
    n_detectors: int = 768

    def __post_init__(self):
        if self.source_radius <= 0 or self.detector_radius <= 0:
            raise ConfigurationError("source and detector radii must be positive")
        if self.n_detectors < 1:
            raise ConfigurationError("n_detectors must be at least 1")
        if self.detector_width <= 0:
            raise ConfigurationError("detector_width must be positive")


@dataclass(frozen=True)
class SliceAngleSet:
    """Source angles used for one slice, in generation order."""

    slice_index: int
    angles_deg: tuple

    def __post_init__(self):
        if self.slice_index < 0:
            raise ConfigurationError("slice_index must be non-negative")
        wrapped = [a % 360.0 for a in self.angles_deg]
        object.__setattr__(self, "angles_deg", tuple(wrapped))
        key = self.quantized()
        if len(set(key)) != len(key):
            raise ConfigurationError("angles must be pairwise distinct modulo 360")

    def __len__(self):
        return len(self.angles_deg)

    def quantized(self):
        """Sorted integer key for matrix caching (1e-6 degree quanta)."""
        return tuple(sorted(round(a / ANGLE_QUANTUM) for a in self.angles_deg))


@dataclass(frozen=True)
class RotationSchedule:
    """How the source ring is rotated from slice to slice.

    ``quarter_delta`` advances by the integer closest to a quarter of the
    source spacing that does not divide the spacing (ties broken downward);
    ``quarter_delta_override`` replaces that rule with a fixed increment.
    ``random_uniform`` draws integer increments uniformly from [1, 359],
    rejecting draws that would revisit an angle set before the visited
    angles (on a 1-degree grid) cover the full circle.
    """

    scheme: str
    n_sources: int
    rng_seed: int = 0
    quarter_delta_override: int | None = None
    start_angle: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(
                f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}"
            )
        if self.n_sources < 1:
            raise ConfigurationError("n_sources must be positive")

    @property
    def delta(self):
        """Angular spacing between consecutive sources."""
        return 360.0 / self.n_sources

    def base_angles(self):
        return tuple(
            (self.start_angle + i * self.delta) % 360.0 for i in range(self.n_sources)
        )


def rotation_matrix(angle_deg):
    """2x2 counterclockwise rotation."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def source_positions(geom, angle_deg):
    """Source point and detector pixel centres for one assembly angle.

    The assembly is rotated by ``angle_deg``, shifts are applied in the
    rotated frame, and finally the detector line is tilted about its own
    centre. At angle 0 with zero shifts the source sits at
    (0, source_radius) and the detector centre at (0, -detector_radius).

    Returns ``(source, pixels)`` with ``source`` shape (2,) and ``pixels``
    shape (n_detectors, 2), in image coordinates centred at the rotation
    centre.
    """
    a = math.radians(angle_deg)
    u = np.array([-math.sin(a), math.cos(a)])  # radial direction to source
    t = np.array([math.cos(a), math.sin(a)])  # tangential direction

    source = geom.source_radius * u + geom.source_shift * t

    center = -geom.detector_radius * u + geom.detector_shift * t
    tilt = math.radians(angle_deg + geom.detector_tilt)
    d = np.array([math.cos(tilt), math.sin(tilt)])
    pitch = geom.detector_width / geom.n_detectors
    offsets = (np.arange(geom.n_detectors) - (geom.n_detectors - 1) / 2.0) * pitch
    pixels = center[None, :] + offsets[:, None] * d[None, :]
    return source, pixels


def rotate_angles(angles, offset_deg):
    """Rotate a whole angle set rigidly, wrapping into [0, 360)."""
    return tuple((a + offset_deg) % 360.0 for a in angles)


def quarter_delta_increment(delta):
    """Closest integer to delta/4 that is not a divisor of delta.

    Requires an integer source spacing; ties between equally close
    candidates are broken downward.
    """
    d = int(round(delta))
    if abs(delta - d) > 1e-9:
        raise ConfigurationError(
            "quarter_delta needs 360/n_sources to be an integer; "
            "set quarter_delta_override for other source counts"
        )
    target = d / 4.0
    best = None
    for m in range(1, d):
        if d % m == 0:
            continue
        key = (abs(m - target), m)
        if best is None or key < best:
            best = key
    if best is None:
        raise ConfigurationError(f"no valid quarter-delta increment for delta={d}")
    return best[1]


def _random_increments(sched, upto_slice):
    """Increments for slices 1..upto_slice of a random_uniform schedule.

    Reproducible from the seed: the sequence of accepted draws depends only
    on ``rng_seed`` and the base angle set. A draw is rejected when it
    would revisit an already-seen angle set while the union of visited
    angles (1-degree bins) does not yet cover the circle.
    """
    rng = np.random.default_rng(sched.rng_seed)
    base = sched.base_angles()

    def set_key(rot):
        return tuple(sorted(round(((a + rot) % 360.0) / ANGLE_QUANTUM) for a in base))

    covered = set()
    visited = {set_key(0.0)}
    for a in base:
        covered.add(int(a % 360.0))

    incs = []
    rot = 0.0
    for _ in range(upto_slice):
        for _attempt in range(100000):
            inc = int(rng.integers(1, 360))
            key = set_key(rot + inc)
            if len(covered) >= 360 or key not in visited:
                break
        else:  # pragma: no cover - bounded by 359 distinct sets
            raise ConfigurationError("random schedule could not find a fresh angle set")
        rot += inc
        visited.add(set_key(rot))
        for a in base:
            covered.add(int((a + rot) % 360.0))
        incs.append(inc)
    return incs


def angles_for_slice(sched, k):
    """Angle set for slice ``k`` under the given schedule."""
    if k < 0:
        raise ConfigurationError("slice index must be non-negative")
    base = sched.base_angles()
    if sched.scheme == "fixed":
        rot = 0.0
    elif sched.scheme == "one_degree":
        rot = float(k)
    elif sched.scheme == "quarter_delta":
        if sched.quarter_delta_override is not None:
            inc = int(sched.quarter_delta_override)
        else:
            inc = quarter_delta_increment(sched.delta)
        rot = float(k * inc)
    else:  # random_uniform
        rot = float(sum(_random_increments(sched, k)))
    return SliceAngleSet(slice_index=k, angles_deg=rotate_angles(base, rot))


def materialize_schedule(sched, n_slices):
    """All angle sets of a run, computed once (random draws are cumulative)."""
    if sched.scheme == "random_uniform":
        incs = _random_increments(sched, n_slices - 1)
        base = sched.base_angles()
        rot = 0.0
        sets = [SliceAngleSet(0, base)]
        for k, inc in enumerate(incs, start=1):
            rot += inc
            sets.append(SliceAngleSet(k, rotate_angles(base, rot)))
        return sets
    return [angles_for_slice(sched, k) for k in range(n_slices)]
