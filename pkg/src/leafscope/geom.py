"""Frames, vectors and rotations shared across the pipeline.

Conventions
-----------
* The LiDAR origin is the world origin.
* Axes: ``x`` forward (LiDAR boresight), ``y`` left, ``z`` up (right-handed).
* Azimuth is measured from ``+x`` toward ``+y``; elevation from the ``xy``
  plane toward ``+z``.
* Mirror commands are a (pitch, yaw) pair in degrees. Yaw is a rotation about
  the world ``z`` axis (positive turns toward ``+y``). Pitch is a rotation
  about the horizontal axis transverse to the yawed normal (positive raises
  the normal). The pair is applied intrinsically, yaw then pitch, with no
  roll: a two-axis mirror only has these two degrees of freedom.

Vectors are plain ``numpy`` float64 arrays of shape ``(3,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBisector, DegenerateRotation, GimbalDegenerate, ValidationError

Vec3 = np.ndarray

ANTIPARALLEL_TOL = 1e-9
GIMBAL_TOL = 1e-6
UNIT_TOL = 1e-12

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])


def vec3(x, y=None, z=None) -> Vec3:
    """Build a float64 3-vector from three scalars or one 3-sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=np.float64).reshape(3).copy()
    else:
        v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"non-finite vector component in {v!r}")
    return v


def norm(v: Vec3) -> float:
    return float(np.linalg.norm(v))


def normalize(v: Vec3) -> Vec3:
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError(f"cannot normalize {v!r}")
    return np.asarray(v, dtype=np.float64) / n


def is_unit(v: Vec3, tol: float = UNIT_TOL) -> bool:
    return abs(np.linalg.norm(v) - 1.0) <= tol


def angle_between(u: Vec3, v: Vec3) -> float:
    """Angle in radians between two nonzero vectors.

    Uses atan2 of the cross and dot products, which stays accurate near 0 and pi.
    """
    return float(math.atan2(np.linalg.norm(np.cross(u, v)), float(np.dot(u, v))))


def azimuth_elevation(v: Vec3) -> tuple[float, float]:
    """Return (azimuth, elevation) of ``v`` in radians."""
    horiz = math.hypot(v[0], v[1])
    return math.atan2(v[1], v[0]), math.atan2(v[2], horiz)


def direction(azimuth: float, elevation: float) -> Vec3:
    """Unit vector for an (azimuth, elevation) pair given in radians."""
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), math.sin(elevation)])


@dataclass(frozen=True)
class RigPose:
    """Positions of the optical components in the LiDAR frame (meters)."""

    camera_position: Vec3
    mirror_position: Vec3
    mirror_default_normal: Vec3
    lidar_origin: Vec3 = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("camera_position", "mirror_position", "mirror_default_normal", "lidar_origin"):
            object.__setattr__(self, name, vec3(getattr(self, name)))
        if np.any(self.lidar_origin != 0.0):
            raise ValidationError("the LiDAR origin is the world origin", field="lidar_origin")
        if np.array_equal(self.camera_position, self.mirror_position):
            raise ValidationError("camera and mirror must not coincide", field="camera_position")
        if not is_unit(self.mirror_default_normal, 1e-9):
            raise ValidationError("must be unit length", field="mirror_default_normal")
        object.__setattr__(self, "mirror_default_normal", normalize(self.mirror_default_normal))

    @classmethod
    def default(cls) -> "RigPose":
        """Bench layout: camera looks sideways into a 45 degree fold mirror.

        The mirror sits just above the LiDAR; with a zero command the camera's
        line of sight leaves the mirror along ``+x``.
        """
        return cls(
            camera_position=np.array([0.05, 0.10, 0.12]),
            mirror_position=np.array([0.05, 0.0, 0.12]),
            mirror_default_normal=normalize(np.array([1.0, 1.0, 0.0])),
        )


@dataclass(frozen=True)
class EulerPair:
    pitch: float  # degrees
    yaw: float  # degrees

    def __post_init__(self):
        if not (math.isfinite(self.pitch) and math.isfinite(self.yaw)):
            raise ValidationError("Euler angles must be finite")


@dataclass(frozen=True)
class Rotation:
    """Axis-angle rotation. ``axis`` is unit length, ``angle`` in radians."""

    axis: Vec3
    angle: float

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(Z_AXIS.copy(), 0.0)

    def matrix(self) -> np.ndarray:
        # Rodrigues
        k = self.axis
        K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
        s, c = math.sin(self.angle), math.cos(self.angle)
        return np.eye(3) + s * K + (1.0 - c) * (K @ K)

    def apply(self, v: Vec3) -> Vec3:
        k = self.axis
        s, c = math.sin(self.angle), math.cos(self.angle)
        return v * c + np.cross(k, v) * s + k * float(np.dot(k, v)) * (1.0 - c)

    def inverse(self) -> "Rotation":
        return Rotation(self.axis, -self.angle)


def bisector(u: Vec3, v: Vec3) -> Vec3:
    """Unit vector making equal angles with unit vectors ``u`` and ``v``."""
    s = np.asarray(u, dtype=np.float64) + np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(s)
    if n <= ANTIPARALLEL_TOL:
        raise DegenerateBisector(f"vectors are anti-parallel: {u!r}, {v!r}")
    return s / n


def rotation_between(src: Vec3, dst: Vec3) -> Rotation:
    """Minimal-angle rotation taking unit vector ``src`` onto unit vector ``dst``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if np.linalg.norm(src + dst) <= ANTIPARALLEL_TOL:
        raise DegenerateRotation("rotation between anti-parallel vectors is not unique")
    axis = np.cross(src, dst)
    sin_a = np.linalg.norm(axis)
    cos_a = float(np.clip(np.dot(src, dst), -1.0, 1.0))
    if sin_a == 0.0:
        return Rotation.identity()
    # atan2 is better conditioned than acos for small angles.
    return Rotation(axis / sin_a, math.atan2(sin_a, cos_a))


def euler_to_normal(reference: Vec3, euler: EulerPair) -> Vec3:
    """Rotate ``reference`` by a (pitch, yaw) command and return the new normal."""
    az, el = azimuth_elevation(reference)
    return direction(az + math.radians(euler.yaw), el + math.radians(euler.pitch))


def rotation_to_euler(rotation: Rotation, reference: Vec3) -> EulerPair:
    """Express the effect of ``rotation`` on ``reference`` as a (pitch, yaw) pair.

    ``rotation`` is expected to come from ``rotation_between(reference, n)``;
    any roll about the normal is irrelevant to a flat mirror and is dropped.
    """
    reference = np.asarray(reference, dtype=np.float64)
    rotated = rotation.apply(reference)
    for v, what in ((reference, "reference normal"), (rotated, "rotated normal")):
        if angle_between(v, Z_AXIS) < GIMBAL_TOL or angle_between(v, -Z_AXIS) < GIMBAL_TOL:
            raise GimbalDegenerate(f"{what} is vertical; yaw is undefined")
    az0, el0 = azimuth_elevation(reference)
    az1, el1 = azimuth_elevation(rotated)
    yaw = math.remainder(az1 - az0, 2.0 * math.pi)
    return EulerPair(pitch=math.degrees(el1 - el0), yaw=math.degrees(yaw))


def reflect(incident: Vec3, normal: Vec3) -> Vec3:
    """Mirror reflection of direction ``incident`` off a surface with unit ``normal``."""
    incident = np.asarray(incident, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    return incident - 2.0 * float(np.dot(incident, normal)) * normal
