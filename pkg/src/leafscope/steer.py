"""Fast-steering-mirror pointing.

The mirror normal that sends the camera's line of sight to a target is the
bisector of the mirror->camera and mirror->target directions. The normal is
turned into a (pitch, yaw) command relative to the mirror's rest normal and
checked against the travel envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import DegenerateBisector, DegenerateGeometry, GimbalDegenerate
from .geom import EulerPair, RigPose, Vec3

ENVELOPE_DEG = 39.0


@dataclass(frozen=True)
class SteeringLimits:
    """Travel envelope. ``referent`` is "normal" (mechanical tilt of the
    mirror normal) or "beam" (deviation of the reflected line of sight)."""

    max_deviation: float = ENVELOPE_DEG
    referent: str = "normal"

    def __post_init__(self):
        if self.referent not in ("normal", "beam"):
            raise ValueError(f"unknown envelope referent {self.referent!r}")
        if not 0.0 < self.max_deviation <= 90.0:
            raise ValueError("max_deviation must lie in (0, 90] degrees")


@dataclass(frozen=True)
class MirrorCommand:
    pitch: float
    yaw: float
    in_envelope: bool
    pointing_residual: float  # degrees
    deviation: float  # degrees, measured per the limits' referent


def camera_ray(rig: RigPose) -> Vec3:
    """Unit direction of the camera's line of sight arriving at the mirror."""
    return geom.normalize(rig.mirror_position - rig.camera_position)


def boresight(rig: RigPose) -> Vec3:
    """Line of sight leaving the mirror at rest."""
    return geom.reflect(camera_ray(rig), rig.mirror_default_normal)


def mirror_normal_for_target(rig: RigPose, target: Vec3) -> Vec3:
    target = np.asarray(target, dtype=np.float64)
    if np.array_equal(target, rig.mirror_position):
        raise DegenerateGeometry("target coincides with the mirror")
    to_camera = geom.normalize(rig.camera_position - rig.mirror_position)
    to_target = geom.normalize(target - rig.mirror_position)
    try:
        return geom.bisector(to_camera, to_target)
    except DegenerateBisector as exc:
        raise DegenerateGeometry("camera and target lie on opposite sides of the mirror, collinear") from exc


def _residual_deg(rig: RigPose, normal: Vec3, target: Vec3) -> float:
    out = geom.reflect(camera_ray(rig), normal)
    want = np.asarray(target, dtype=np.float64) - rig.mirror_position
    return math.degrees(geom.angle_between(out, want))


def command_from_normal(
    rig: RigPose, normal: Vec3, limits: SteeringLimits = SteeringLimits(), target: Vec3 | None = None
) -> MirrorCommand:
    """Euler command for ``normal`` plus envelope and ray-trace self-check.

    The residual is the angle between the ray traced off the normal rebuilt
    from (pitch, yaw) and the intended direction: ``target`` when given,
    otherwise the ray reflected off ``normal`` itself.
    """
    normal = geom.normalize(np.asarray(normal, dtype=np.float64))
    d0 = rig.mirror_default_normal
    try:
        euler = geom.rotation_to_euler(geom.rotation_between(d0, normal), d0)
    except GimbalDegenerate:
        # vertical normal: yaw is meaningless, report the pure tilt
        euler = EulerPair(pitch=math.copysign(90.0, normal[2]) - math.degrees(geom.azimuth_elevation(d0)[1]), yaw=0.0)

    if limits.referent == "normal":
        deviation = math.degrees(geom.angle_between(d0, normal))
    else:
        cam = camera_ray(rig)
        deviation = math.degrees(geom.angle_between(geom.reflect(cam, d0), geom.reflect(cam, normal)))
    # tiny slack so an exact-boundary request is not lost to rounding
    in_env = deviation <= limits.max_deviation + 1e-9

    rebuilt = geom.euler_to_normal(d0, euler)
    if target is None:
        target = rig.mirror_position + geom.reflect(camera_ray(rig), normal)
    residual = _residual_deg(rig, rebuilt, target)
    return MirrorCommand(euler.pitch, euler.yaw, in_env, residual, deviation)


def command_for_target(rig: RigPose, target: Vec3, limits: SteeringLimits = SteeringLimits()) -> MirrorCommand:
    normal = mirror_normal_for_target(rig, target)
    return command_from_normal(rig, normal, limits, target=target)


def focus_path_length(rig: RigPose, target: Vec3) -> float:
    """Folded optical path camera -> mirror -> target, in meters."""
    target = np.asarray(target, dtype=np.float64)
    return float(
        np.linalg.norm(rig.camera_position - rig.mirror_position) + np.linalg.norm(rig.mirror_position - target)
    )
