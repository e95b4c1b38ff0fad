"""3D positions and targets, reduced to the scalar inputs of the movement-time models.

Angles come out in degrees, linear distances in meters and depth change in
centimeters, which are the units the models consume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DegenerateGeometry

# Norms below this are treated as zero-length vectors.
DEGENERATE_NORM = 1e-12
UNIT_NORM_TOL = 1e-9

SHAPES = ("sphere", "disk", "rect")


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Vec3.{name} must be finite, got {value!r}")

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scale(self, k: float) -> Vec3:
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: Vec3) -> Vec3:
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> Vec3:
        n = self.norm()
        if n < DEGENERATE_NORM:
            raise DegenerateGeometry("cannot normalize a zero-length vector")
        return self.scale(1.0 / n)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    @classmethod
    def of(cls, seq) -> Vec3:
        x, y, z = seq
        return cls(float(x), float(y), float(z))


@dataclass(frozen=True)
class TargetGeometry:
    """A target's center and its size as a diameter (meters).

    For ``rect`` targets with ``width``/``height`` set, the smaller side is
    used as the effective diameter.
    """

    center: Vec3
    extent: float
    shape: str = "sphere"
    width: Optional[float] = None
    height: Optional[float] = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown target shape {self.shape!r}")
        if not self.extent > 0:
            raise ValueError(f"target extent must be > 0, got {self.extent!r}")
        for side in (self.width, self.height):
            if side is not None and not side > 0:
                raise ValueError("rect width/height must be > 0")

    @property
    def effective_extent(self) -> float:
        if self.shape == "rect":
            sides = [s for s in (self.width, self.height) if s is not None]
            if sides:
                return min(sides)
        return self.extent


@dataclass(frozen=True)
class MovementSpec:
    """One movement from ``start`` to ``target``, seen from ``origin``.

    ``origin`` is where the controller, hand or eye was when the trial's home
    button was pressed. ``depth_axis`` defaults to the origin-to-start
    direction.
    """

    origin: Vec3
    start: Vec3
    target: TargetGeometry
    depth_axis: Optional[Vec3] = field(default=None)

    def __post_init__(self):
        if (self.target.center - self.origin).norm() < DEGENERATE_NORM:
            raise DegenerateGeometry("origin coincides with the target center")
        if self.depth_axis is not None:
            n = self.depth_axis.norm()
            if abs(n - 1.0) > UNIT_NORM_TOL:
                raise ValueError(f"depth_axis must be a unit vector (norm={n})")

    def resolved_depth_axis(self) -> Vec3:
        if self.depth_axis is not None:
            return self.depth_axis
        return (self.start - self.origin).normalized()


def _angle_between(u: Vec3, v: Vec3) -> float:
    if u.norm() < DEGENERATE_NORM or v.norm() < DEGENERATE_NORM:
        raise DegenerateGeometry("angle undefined for a zero-length vector")
    # atan2 form stays accurate near 0 and 180 degrees, unlike acos
    return math.degrees(math.atan2(u.cross(v).norm(), u.dot(v)))


def angular_distance(spec: MovementSpec) -> float:
    """Angle in degrees between the start point and the target center, about the origin."""
    return _angle_between(spec.start - spec.origin, spec.target.center - spec.origin)


def angular_width(spec: MovementSpec) -> float:
    """Angle in degrees subtended by the target's diameter at the origin."""
    d = (spec.target.center - spec.origin).norm()
    if d < DEGENERATE_NORM:
        raise DegenerateGeometry("target distance from origin is zero")
    return math.degrees(2.0 * math.atan((spec.target.effective_extent / 2.0) / d))


def linear_distance(spec: MovementSpec) -> float:
    return (spec.target.center - spec.start).norm()


def depth_change(spec: MovementSpec) -> float:
    """Absolute displacement along the depth axis, in centimeters."""
    axis = spec.resolved_depth_axis()
    return abs((spec.target.center - spec.start).dot(axis)) * 100.0
