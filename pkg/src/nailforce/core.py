"""Shared domain types, coordinate conventions and the dataset container.

Coordinate convention (per finger): x is the lift direction, z is the
surface-normal (grip) direction, y completes a right-handed frame.  The
y sign is convention-relative.  Forces are in N, torques in N*mm,
curvatures in 1/m, lengths in mm, time in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CANONICAL_IMAGE_SIZE = (111, 105)  # aligned nail canvas, (height, width)

TARGET_COMPONENTS = ("fx", "fy", "fz", "tx", "ty", "tz", "c1", "c2")

# Inclusive component ranges of the recorded data.
TARGET_RANGES = {
    "fx": (-0.9, 4.0),
    "fy": (-2.0, 0.8),
    "fz": (0.0, 15.0),
    "tx": (-22.0, 26.0),
    "ty": (-30.0, 14.0),
    "tz": (-35.0, 27.0),
    "c1": (0.0, 200.0),
    "c2": (0.0, 200.0),
}

VALID_WEIGHTS_G = (165, 330, 660)

CHANNEL_NAMES = {"red": 0, "green": 1, "blue": 2}


class NailforceError(Exception):
    """Base class for all library errors."""


class InvalidInputError(NailforceError):
    pass


class ConfigError(NailforceError):
    pass


class NoSignalError(NailforceError):
    pass


class CannotCenterError(NailforceError):
    pass


class AlignmentFailedError(NailforceError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class IllConditionedError(NailforceError):
    pass


class NoConsistentContactError(NailforceError):
    pass


class SchemeInfeasibleError(NailforceError):
    pass


class TrainingFailedError(NailforceError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class NumericalError(NailforceError):
    pass


class StageError(NailforceError):
    """Pipeline-stage failure wrapper carrying the stage tag."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageFrame:
    """H x W x C intensity grid with values in [0, 1], row-major."""

    data: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise InvalidInputError(f"image data must be HxW or HxWxC, got shape {a.shape}")
        if a.shape[2] not in (1, 3):
            raise InvalidInputError(f"channels must be 1 or 3, got {a.shape[2]}")
        if a.size and (a.min() < -1e-12 or a.max() > 1.0 + 1e-12):
            raise InvalidInputError("intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(np.clip(a, 0.0, 1.0)))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def channel(self, index):
        return self.data[:, :, index]


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N*mm) 3-vectors in sensor coordinates."""

    f: np.ndarray
    tau: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64).reshape(3)
        tau = np.asarray(self.tau, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(tau))):
            raise InvalidInputError("wrench components must be finite")
        object.__setattr__(self, "f", _freeze(f))
        object.__setattr__(self, "tau", _freeze(tau))

    def as_vector(self):
        return np.concatenate([self.f, self.tau])


@dataclass(frozen=True)
class SurfaceSpec:
    """Contact-surface geometry z = h(x, y) (mm) plus its curvature labels.

    shape is one of "flat", "sphere", "cylinder", "prism".  Spheres and
    cylinders are convex toward +z with the apex at the origin; radius
    r = 1000 / c mm for curvature c > 0.  Cylinders are flat along
    `axis` ("x" or "y").  Prisms are ridges along y with half-angle
    `angle_deg` and carry c1 = c2 = 0.
    """

    id: int
    c1: float
    c2: float
    material: str = "sandpaper"
    shape: str = "flat"
    axis: str = "y"
    angle_deg: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.c1 <= 200.0 and 0.0 <= self.c2 <= 200.0):
            raise InvalidInputError("curvatures must lie in [0, 200] 1/m")
        if self.material not in ("sandpaper", "silk"):
            raise InvalidInputError(f"unknown material {self.material!r}")
        if self.shape not in ("flat", "sphere", "cylinder", "prism"):
            raise InvalidInputError(f"unknown shape {self.shape!r}")

    @property
    def radius_mm(self):
        """Radius of the curved direction, infinite for flat shapes."""
        c = max(self.c1, self.c2)
        return math.inf if c == 0.0 else 1000.0 / c

    def height(self, x, y):
        """Surface height z (mm) at sensor-plane coordinates (x, y) mm."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.shape == "flat":
            return np.zeros(np.broadcast(x, y).shape)[()]
        if self.shape == "sphere":
            r = self.radius_mm
            rho2 = np.minimum(x * x + y * y, r * r)
            return np.sqrt(r * r - rho2) - r
        if self.shape == "cylinder":
            r = self.radius_mm
            t = y if self.axis == "x" else x
            t2 = np.minimum(t * t, r * r)
            return np.sqrt(r * r - t2) - r
        # prism: ridge along y
        return -np.abs(x) * math.tan(math.radians(self.angle_deg))

    def height_gradient(self, x, y):
        """(dz/dx, dz/dy) at (x, y); subgradient 0 on the prism ridge."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        zero = np.zeros(np.broadcast(x, y).shape)
        if self.shape == "flat":
            return zero[()], zero[()]
        if self.shape == "sphere":
            r = self.radius_mm
            denom = np.sqrt(np.maximum(r * r - x * x - y * y, 1e-9))
            return (-x / denom)[()], (-y / denom)[()]
        if self.shape == "cylinder":
            r = self.radius_mm
            if self.axis == "x":
                denom = np.sqrt(np.maximum(r * r - y * y, 1e-9))
                return zero[()], (-y / denom)[()]
            denom = np.sqrt(np.maximum(r * r - x * x, 1e-9))
            return (-x / denom)[()], zero[()]
        slope = math.tan(math.radians(self.angle_deg))
        return (-np.sign(x) * slope)[()], zero[()]


def surface_catalog():
    """The twelve experiment surfaces, keyed by id.

    1-4 spherical (c = 12.5, 25, 50, 100), 5-8 cylindrical (one curved
    direction, c in {25, 100}), 9-10 triangular prisms, 11 flat
    sandpaper, 12 flat silk.
    """
    cat = {}
    for sid, c in zip((1, 2, 3, 4), (12.5, 25.0, 50.0, 100.0)):
        cat[sid] = SurfaceSpec(id=sid, c1=c, c2=c, shape="sphere")
    cyl = [(5, 25.0, 0.0, "y"), (6, 0.0, 25.0, "x"), (7, 100.0, 0.0, "y"), (8, 0.0, 100.0, "x")]
    for sid, c1, c2, axis in cyl:
        cat[sid] = SurfaceSpec(id=sid, c1=c1, c2=c2, shape="cylinder", axis=axis)
    cat[9] = SurfaceSpec(id=9, c1=0.0, c2=0.0, shape="prism", angle_deg=30.0)
    cat[10] = SurfaceSpec(id=10, c1=0.0, c2=0.0, shape="prism", angle_deg=45.0)
    cat[11] = SurfaceSpec(id=11, c1=0.0, c2=0.0, shape="flat", material="sandpaper")
    cat[12] = SurfaceSpec(id=12, c1=0.0, c2=0.0, shape="flat", material="silk")
    return cat


@dataclass(frozen=True)
class TargetVector:
    """Regression label, ordered (fx, fy, fz, tx, ty, tz, c1, c2)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(8)
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def from_components(cls, fx=0.0, fy=0.0, fz=0.0, tx=0.0, ty=0.0, tz=0.0, c1=0.0, c2=0.0):
        return cls(np.array([fx, fy, fz, tx, ty, tz, c1, c2]))

    @property
    def f(self):
        return self.values[:3]

    @property
    def tau(self):
        return self.values[3:6]

    @property
    def curvatures(self):
        return self.values[6:8]

    def component(self, name):
        return float(self.values[TARGET_COMPONENTS.index(name)])


def validate_ranges(t):
    """Return the names of components outside the recorded data ranges.

    Advisory only; accepts a TargetVector or a length-8 array.
    """
    v = t.values if isinstance(t, TargetVector) else np.asarray(t, dtype=np.float64).reshape(8)
    flags = []
    for i, name in enumerate(TARGET_COMPONENTS):
        lo, hi = TARGET_RANGES[name]
        if not (lo <= v[i] <= hi):
            flags.append(name)
    return flags


def flatten_image(frame, channel_policy="green"):
    """Flatten a frame to a 1-D feature vector, row-major.

    channel_policy selects one channel ("red"/"green"/"blue" or an int
    index) or "all" for every channel interleaved row-major.
    """
    if frame.data.size == 0:
        raise InvalidInputError("cannot flatten an empty frame")
    if channel_policy == "all":
        return frame.data.reshape(-1).copy()
    if isinstance(channel_policy, str):
        if channel_policy not in CHANNEL_NAMES:
            raise InvalidInputError(f"unknown channel policy {channel_policy!r}")
        idx = CHANNEL_NAMES[channel_policy]
    else:
        idx = int(channel_policy)
    if idx >= frame.channels:
        raise InvalidInputError(
            f"channel {channel_policy!r} requires {idx + 1} channels, frame has {frame.channels}"
        )
    return frame.data[:, :, idx].reshape(-1).copy()


def unflatten_image(vector, height, width, channels=1, timestamp=0.0):
    """Inverse of flatten_image for a known shape."""
    v = np.asarray(vector, dtype=np.float64)
    if v.size != height * width * channels:
        raise InvalidInputError("vector length does not match the requested shape")
    return ImageFrame(v.reshape(height, width, channels), timestamp=timestamp)


@dataclass
class Trial:
    """One grasp-and-lift episode for a single finger.

    frames/wrenches carry their own strictly increasing timestamps;
    led_video/led_force are 0/1 sequences parallel to them.
    marker_angle_series is degrees per frame; metadata holds auxiliary
    (e.g. generator ground-truth) key-value pairs.
    """

    participant: int
    finger: str
    weight_g: int
    surface: SurfaceSpec
    frames: list
    wrenches: list
    marker_angle_series: np.ndarray = None
    reference_marker_angle: float = 0.0
    led_video: np.ndarray = None
    led_force: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.finger not in ("index", "thumb"):
            raise InvalidInputError(f"finger must be 'index' or 'thumb', got {self.finger!r}")
        if self.weight_g not in VALID_WEIGHTS_G:
            raise InvalidInputError(f"weight must be one of {VALID_WEIGHTS_G} g")
        ft = self.frame_times()
        wt = self.wrench_times()
        if len(ft) > 1 and not np.all(np.diff(ft) > 0):
            raise InvalidInputError("frame timestamps must be strictly increasing")
        if len(wt) > 1 and not np.all(np.diff(wt) > 0):
            raise InvalidInputError("wrench timestamps must be strictly increasing")
        if self.marker_angle_series is None:
            self.marker_angle_series = np.zeros(len(self.frames))
        self.marker_angle_series = np.asarray(self.marker_angle_series, dtype=np.float64)

    def frame_times(self):
        return np.array([f.timestamp for f in self.frames])

    def wrench_times(self):
        return np.array([w.timestamp for w in self.wrenches])

    def wrench_matrix(self):
        """(n, 6) array of (fx, fy, fz, tx, ty, tz) rows."""
        if not self.wrenches:
            return np.zeros((0, 6))
        return np.stack([w.as_vector() for w in self.wrenches])


SPLIT_TAGS = ("train", "validation", "test")


@dataclass
class Dataset:
    """A collection of trials with an exhaustive, disjoint split labelling."""

    trials: list
    split_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        for idx, tag in self.split_labels.items():
            if tag not in SPLIT_TAGS:
                raise InvalidInputError(f"unknown split tag {tag!r} for trial {idx}")

    def indices(self, tag):
        return sorted(i for i, t in self.split_labels.items() if t == tag)

    def subset(self, tag):
        return [self.trials[i] for i in self.indices(tag)]

    def check_partition(self):
        """Raise unless split tags partition the trial indices exactly."""
        labelled = set(self.split_labels)
        if labelled != set(range(len(self.trials))):
            raise InvalidInputError("split labels must cover every trial exactly once")
