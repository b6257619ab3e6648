"""Synthetic lab scene and a 32-beam spinning LiDAR simulator.

The scene is a box-shaped room (diffuse walls, floor, ceiling) containing
leaf sensors and reflective clutter. Every surface is an axis-aligned planar
patch. ``render_frame`` ray-casts one full revolution and assigns each first
hit an intensity drawn from its material's band:

==========  ===================  =====================================
material    default band         notes
==========  ===================  =====================================
diffuse     [5, 80]              walls, floor, out-of-gate tape
clutter     [200, 255]           only a ``density`` fraction of hits;
                                 the rest look diffuse
retro       [230, 255]           only when the sensor's range is inside
                                 [retro_min_range, retro_max_range]
==========  ===================  =====================================

Scene files are YAML with top-level keys ``rig``, ``lidar``, ``sensors``,
``clutter``, ``seed`` and optionally ``background`` and ``encoding``; see the
README for the full schema.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import IoError, ParseError, ValidationError
from .geom import RigPose, Vec3, vec3

DIFFUSE, CLUTTER, RETRO = 0, 1, 2
MATERIAL_NAMES = ("diffuse", "clutter", "retro")
AXIS_NAMES = "xyz"


@dataclass(frozen=True)
class StateEncoding:
    """How a sensor's physiological state in [0, 1] maps onto its spectral peak.

    ``amplitude`` mode scales the peak height linearly over ``amplitude_range``
    at a fixed ``reference_peak``; ``shift`` mode moves the peak linearly over
    ``wavelength_range`` at a fixed ``reference_amplitude``.
    """

    mode: str = "amplitude"
    amplitude_range: tuple[float, float] = (0.2, 1.0)
    wavelength_range: tuple[float, float] = (635.0, 675.0)
    reference_peak: float = 655.0
    reference_amplitude: float = 0.8

    def __post_init__(self):
        if self.mode not in ("amplitude", "shift"):
            raise ValidationError(f"unknown encoding mode {self.mode!r}", field="encoding.mode")
        lo, hi = self.amplitude_range
        if not 0.0 < lo < hi <= 1.0:
            raise ValidationError("need 0 < lo < hi <= 1", field="encoding.amplitude_range")
        wlo, whi = self.wavelength_range
        if not 600.0 <= wlo < whi <= 700.0:
            raise ValidationError("need 600 <= lo < hi <= 700", field="encoding.wavelength_range")

    def encode(self, state: float) -> tuple[float, float]:
        """State -> (peak wavelength nm, peak amplitude)."""
        if self.mode == "amplitude":
            lo, hi = self.amplitude_range
            return self.reference_peak, lo + state * (hi - lo)
        lo, hi = self.wavelength_range
        return lo + state * (hi - lo), self.reference_amplitude

    def decode(self, peak: float, amplitude: float) -> float:
        """Inverse of :meth:`encode`, clamped to [0, 1]."""
        if self.mode == "amplitude":
            lo, hi = self.amplitude_range
            s = (amplitude - lo) / (hi - lo)
        else:
            lo, hi = self.wavelength_range
            s = (peak - lo) / (hi - lo)
        return min(1.0, max(0.0, s))


@dataclass(frozen=True)
class PlantSensor:
    position: Vec3
    tape_extent: float = 0.10
    peak_wavelength: float = 655.0
    peak_amplitude: float = 0.8
    peak_fwhm: float = 20.0
    state_score: float = 0.75
    baseline: float = 0.0
    facing: int | None = None  # normal axis of the tape patch; None = dominant axis of position

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))
        if not 600.0 <= self.peak_wavelength <= 700.0:
            raise ValidationError("must lie in [600, 700] nm", field="peak_wavelength")
        if not 0.0 < self.tape_extent <= 0.2:
            raise ValidationError("must lie in (0, 0.2] m", field="tape_extent")
        # Zero amplitude is allowed so that a dead sensor can be modelled.
        if not 0.0 <= self.peak_amplitude <= 1.0:
            raise ValidationError("must lie in [0, 1]", field="peak_amplitude")
        if not self.peak_fwhm > 0.0:
            raise ValidationError("must be > 0", field="peak_fwhm")
        if not 0.0 <= self.state_score <= 1.0:
            raise ValidationError("must lie in [0, 1]", field="state_score")
        if not 0.0 <= self.baseline <= 1.0:
            raise ValidationError("must lie in [0, 1]", field="baseline")

    @property
    def range(self) -> float:
        return float(np.linalg.norm(self.position))

    @property
    def normal_axis(self) -> int:
        if self.facing is not None:
            return self.facing
        return int(np.argmax(np.abs(self.position)))


@dataclass(frozen=True)
class ClutterPatch:
    """Glass or metal: a patch that sometimes returns retro-level intensity."""

    center: Vec3
    size: tuple[float, float]
    axis: int = 0
    density: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        w, h = self.size
        if not (w > 0 and h > 0):
            raise ValidationError("patch size must be positive", field="clutter.size")
        if self.axis not in (0, 1, 2):
            raise ValidationError("axis must be x, y or z", field="clutter.axis")
        if not 0.0 <= self.density <= 1.0:
            raise ValidationError("must lie in [0, 1]", field="clutter.density")


@dataclass(frozen=True)
class Background:
    """Diffuse room box around the rig; ``enabled=False`` leaves free space."""

    enabled: bool = True
    floor_z: float = -1.2
    ceiling_z: float = 2.5
    half_width: float = 6.0

    def __post_init__(self):
        if self.enabled and not (self.floor_z < 0.0 < self.ceiling_z and self.half_width > 0.0):
            raise ValidationError("room must enclose the LiDAR", field="background")


@dataclass(frozen=True)
class LidarModel:
    n_beams: int = 32
    vertical_fov: tuple[float, float] = (10.67, -30.67)  # upper, lower (deg)
    azimuth_step: float = 0.4
    max_range: float = 100.0
    min_range: float = 0.1
    retro_min_range: float = 0.8
    retro_max_range: float = 2.0
    intensity_noise_sd: float = 2.0
    range_noise_sd: float = 0.002
    diffuse_band: tuple[float, float] = (5.0, 80.0)
    clutter_band: tuple[float, float] = (200.0, 255.0)
    retro_band: tuple[float, float] = (230.0, 255.0)

    def __post_init__(self):
        if self.n_beams != 32:
            raise ValidationError("the scanner has exactly 32 beams", field="lidar.n_beams")
        upper, lower = self.vertical_fov
        if not -90.0 < lower < upper < 90.0:
            raise ValidationError("need -90 < lower < upper < 90", field="lidar.vertical_fov")
        if not 0.0 < self.azimuth_step <= 10.0:
            raise ValidationError("must lie in (0, 10] deg", field="lidar.azimuth_step")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValidationError("need 0 <= min_range < max_range", field="lidar.min_range")
        if not self.retro_min_range < self.retro_max_range <= self.max_range:
            raise ValidationError(
                "need retro_min_range < retro_max_range <= max_range", field="lidar.retro_min_range"
            )
        if self.intensity_noise_sd < 0 or self.range_noise_sd < 0:
            raise ValidationError("noise must be non-negative", field="lidar")
        for name in ("diffuse_band", "clutter_band", "retro_band"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 255.0:
                raise ValidationError("need 0 <= lo <= hi <= 255", field=f"lidar.{name}")

    @property
    def elevations(self) -> np.ndarray:
        """Beam elevations in degrees, ring 0 lowest."""
        upper, lower = self.vertical_fov
        return np.linspace(lower, upper, self.n_beams)

    @property
    def azimuths(self) -> np.ndarray:
        n = int(round(360.0 / self.azimuth_step))
        return np.arange(n) * (360.0 / n)


@dataclass(frozen=True)
class SceneDescription:
    sensors: tuple[PlantSensor, ...] = ()
    clutter: tuple[ClutterPatch, ...] = ()
    background: Background = field(default_factory=Background)
    lidar: LidarModel = field(default_factory=LidarModel)
    rig: RigPose = field(default_factory=RigPose.default)
    encoding: StateEncoding = field(default_factory=StateEncoding)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "clutter", tuple(self.clutter))

    def to_dict(self) -> dict:
        """Plain-Python form matching the scene-file schema."""

        def fl(v):
            return [float(c) for c in v]

        return {
            "seed": int(self.rng_seed),
            "rig": {
                "camera_position": fl(self.rig.camera_position),
                "mirror_position": fl(self.rig.mirror_position),
                "mirror_default_normal": fl(self.rig.mirror_default_normal),
            },
            "lidar": {
                "n_beams": self.lidar.n_beams,
                "vertical_fov": fl(self.lidar.vertical_fov),
                "azimuth_step": float(self.lidar.azimuth_step),
                "max_range": float(self.lidar.max_range),
                "min_range": float(self.lidar.min_range),
                "retro_min_range": float(self.lidar.retro_min_range),
                "retro_max_range": float(self.lidar.retro_max_range),
                "intensity_noise_sd": float(self.lidar.intensity_noise_sd),
                "range_noise_sd": float(self.lidar.range_noise_sd),
                "bands": {
                    "diffuse": fl(self.lidar.diffuse_band),
                    "clutter": fl(self.lidar.clutter_band),
                    "retro": fl(self.lidar.retro_band),
                },
            },
            "background": {
                "enabled": bool(self.background.enabled),
                "floor_z": float(self.background.floor_z),
                "ceiling_z": float(self.background.ceiling_z),
                "half_width": float(self.background.half_width),
            },
            "encoding": {
                "mode": self.encoding.mode,
                "amplitude_range": fl(self.encoding.amplitude_range),
                "wavelength_range": fl(self.encoding.wavelength_range),
                "reference_peak": float(self.encoding.reference_peak),
                "reference_amplitude": float(self.encoding.reference_amplitude),
            },
            "sensors": [
                {
                    "position": fl(s.position),
                    "tape_extent": float(s.tape_extent),
                    "peak_wavelength": float(s.peak_wavelength),
                    "peak_amplitude": float(s.peak_amplitude),
                    "peak_fwhm": float(s.peak_fwhm),
                    "state": float(s.state_score),
                    "baseline": float(s.baseline),
                    **({"facing": AXIS_NAMES[s.facing]} if s.facing is not None else {}),
                }
                for s in self.sensors
            ],
            "clutter": [
                {
                    "center": fl(c.center),
                    "size": fl(c.size),
                    "axis": AXIS_NAMES[c.axis],
                    "density": float(c.density),
                }
                for c in self.clutter
            ],
        }


# ---------------------------------------------------------------------------
# scene files


def _node_lines(node, path=(), out=None) -> dict:
    """Map every key path in a composed YAML tree to its 1-based source line."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _node_lines(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _node_lines(v, path + (i,), out)
    return out


class _Reader:
    """Typed field access with line-aware error messages."""

    def __init__(self, path, lines):
        self.path = path
        self.lines = lines

    def fail(self, keypath, message):
        line = None
        for n in range(len(keypath), -1, -1):
            if keypath[:n] in self.lines:
                line = self.lines[keypath[:n]]
                break
        dotted = ".".join(str(k) for k in keypath) or None
        raise ParseError(message, path=self.path, line=line, field=dotted)

    def mapping(self, data, keypath, allowed):
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.fail(keypath, "expected a mapping")
        unknown = set(data) - set(allowed)
        if unknown:
            k = sorted(map(str, unknown))[0]
            self.fail(keypath + (k,), f"unknown key {k!r}")
        return data

    def number(self, data, key, keypath, default=None):
        if key not in data:
            if default is None:
                self.fail(keypath + (key,), "missing required field")
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(keypath + (key,), f"expected a finite number, got {v!r}")
        return float(v)

    def vector(self, data, key, keypath, n=3, default=None):
        if key not in data:
            if default is None:
                self.fail(keypath + (key,), "missing required field")
            return default
        v = data[key]
        if (
            not isinstance(v, list)
            or len(v) != n
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)
        ):
            self.fail(keypath + (key,), f"expected a list of {n} numbers, got {v!r}")
        return tuple(float(c) for c in v)

    def axis(self, data, key, keypath, default=None):
        if key not in data:
            return default
        v = data[key]
        if v not in ("x", "y", "z"):
            self.fail(keypath + (key,), f"expected one of x, y, z, got {v!r}")
        return AXIS_NAMES.index(v)


def _build(tree: dict, reader: _Reader) -> SceneDescription:
    top = reader.mapping(
        tree, (), {"seed", "rig", "lidar", "background", "encoding", "sensors", "clutter"}
    )
    seed = top.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        reader.fail(("seed",), f"expected a non-negative integer, got {seed!r}")

    d = reader.mapping(
        top.get("rig"), ("rig",), {"camera_position", "mirror_position", "mirror_default_normal"}
    )
    dflt = RigPose.default()
    rig = RigPose(
        camera_position=reader.vector(d, "camera_position", ("rig",), default=tuple(dflt.camera_position)),
        mirror_position=reader.vector(d, "mirror_position", ("rig",), default=tuple(dflt.mirror_position)),
        mirror_default_normal=reader.vector(
            d, "mirror_default_normal", ("rig",), default=tuple(dflt.mirror_default_normal)
        ),
    )

    lm = LidarModel()
    d = reader.mapping(
        top.get("lidar"),
        ("lidar",),
        {
            "n_beams", "vertical_fov", "azimuth_step", "max_range", "min_range",
            "retro_min_range", "retro_max_range", "intensity_noise_sd", "range_noise_sd", "bands",
        },
    )
    bands = reader.mapping(d.get("bands"), ("lidar", "bands"), {"diffuse", "clutter", "retro"})
    n_beams = d.get("n_beams", 32)
    if isinstance(n_beams, bool) or not isinstance(n_beams, int):
        reader.fail(("lidar", "n_beams"), "expected an integer")
    kp = ("lidar",)
    lidar = LidarModel(
        n_beams=n_beams,
        vertical_fov=reader.vector(d, "vertical_fov", kp, n=2, default=lm.vertical_fov),
        azimuth_step=reader.number(d, "azimuth_step", kp, lm.azimuth_step),
        max_range=reader.number(d, "max_range", kp, lm.max_range),
        min_range=reader.number(d, "min_range", kp, lm.min_range),
        retro_min_range=reader.number(d, "retro_min_range", kp, lm.retro_min_range),
        retro_max_range=reader.number(d, "retro_max_range", kp, lm.retro_max_range),
        intensity_noise_sd=reader.number(d, "intensity_noise_sd", kp, lm.intensity_noise_sd),
        range_noise_sd=reader.number(d, "range_noise_sd", kp, lm.range_noise_sd),
        diffuse_band=reader.vector(bands, "diffuse", kp + ("bands",), n=2, default=lm.diffuse_band),
        clutter_band=reader.vector(bands, "clutter", kp + ("bands",), n=2, default=lm.clutter_band),
        retro_band=reader.vector(bands, "retro", kp + ("bands",), n=2, default=lm.retro_band),
    )

    bg0 = Background()
    d = reader.mapping(
        top.get("background"), ("background",), {"enabled", "floor_z", "ceiling_z", "half_width"}
    )
    enabled = d.get("enabled", True)
    if not isinstance(enabled, bool):
        reader.fail(("background", "enabled"), "expected true or false")
    kp = ("background",)
    background = Background(
        enabled=enabled,
        floor_z=reader.number(d, "floor_z", kp, bg0.floor_z),
        ceiling_z=reader.number(d, "ceiling_z", kp, bg0.ceiling_z),
        half_width=reader.number(d, "half_width", kp, bg0.half_width),
    )

    e0 = StateEncoding()
    d = reader.mapping(
        top.get("encoding"),
        ("encoding",),
        {"mode", "amplitude_range", "wavelength_range", "reference_peak", "reference_amplitude"},
    )
    kp = ("encoding",)
    encoding = StateEncoding(
        mode=d.get("mode", e0.mode),
        amplitude_range=reader.vector(d, "amplitude_range", kp, n=2, default=e0.amplitude_range),
        wavelength_range=reader.vector(d, "wavelength_range", kp, n=2, default=e0.wavelength_range),
        reference_peak=reader.number(d, "reference_peak", kp, e0.reference_peak),
        reference_amplitude=reader.number(d, "reference_amplitude", kp, e0.reference_amplitude),
    )

    raw_sensors = top.get("sensors") or []
    if not isinstance(raw_sensors, list):
        reader.fail(("sensors",), "expected a list")
    sensors = []
    s0 = PlantSensor(position=(1.0, 0.0, 0.0))
    for i, raw in enumerate(raw_sensors):
        kp = ("sensors", i)
        d = reader.mapping(
            raw,
            kp,
            {"position", "tape_extent", "peak_wavelength", "peak_amplitude", "peak_fwhm",
             "state", "baseline", "facing"},
        )
        state = reader.number(d, "state", kp, s0.state_score)
        if not 0.0 <= state <= 1.0:
            reader.fail(kp + ("state",), "must lie in [0, 1]")
        peak, amp = encoding.encode(state)
        try:
            sensors.append(
                PlantSensor(
                    position=reader.vector(d, "position", kp),
                    tape_extent=reader.number(d, "tape_extent", kp, s0.tape_extent),
                    peak_wavelength=reader.number(d, "peak_wavelength", kp, peak),
                    peak_amplitude=reader.number(d, "peak_amplitude", kp, amp),
                    peak_fwhm=reader.number(d, "peak_fwhm", kp, s0.peak_fwhm),
                    state_score=state,
                    baseline=reader.number(d, "baseline", kp, s0.baseline),
                    facing=reader.axis(d, "facing", kp),
                )
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), field=f"sensors[{i}]") from exc

    raw_clutter = top.get("clutter") or []
    if not isinstance(raw_clutter, list):
        reader.fail(("clutter",), "expected a list")
    clutter = []
    for i, raw in enumerate(raw_clutter):
        kp = ("clutter", i)
        d = reader.mapping(raw, kp, {"center", "size", "axis", "density"})
        try:
            clutter.append(
                ClutterPatch(
                    center=reader.vector(d, "center", kp),
                    size=reader.vector(d, "size", kp, n=2),
                    axis=reader.axis(d, "axis", kp, default=0),
                    density=reader.number(d, "density", kp, 0.1),
                )
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), field=f"clutter[{i}]") from exc

    return SceneDescription(
        sensors=tuple(sensors),
        clutter=tuple(clutter),
        background=background,
        lidar=lidar,
        rig=rig,
        encoding=encoding,
        rng_seed=seed,
    )


def parse_scene(text: str, path=None) -> SceneDescription:
    """Parse scene YAML text. ``path`` is only used in error messages."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        tree = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ParseError(str(exc.problem or exc), path=path, line=line) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc), path=path) from exc
    lines = _node_lines(node) if node is not None else {}
    return _build(tree if tree is not None else {}, _Reader(path, lines))


def load_scene(path) -> SceneDescription:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read scene file {path}: {exc}") from exc
    return parse_scene(text, path=path)


def dump_scene(scene: SceneDescription) -> str:
    return yaml.safe_dump(scene.to_dict(), sort_keys=False, default_flow_style=None)


def save_scene(scene: SceneDescription, path) -> None:
    try:
        Path(path).write_text(dump_scene(scene))
    except OSError as exc:
        raise IoError(f"cannot write scene file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# rendering


@dataclass(frozen=True)
class LidarFrame:
    """One revolution of single returns, in firing order (azimuth-major).

    ``material`` and ``surface`` are simulator ground truth; a real driver
    would not provide them.
    """

    positions: np.ndarray  # (n, 3)
    ranges: np.ndarray  # (n,)
    intensities: np.ndarray  # (n,) uint8
    rings: np.ndarray  # (n,)
    azimuths: np.ndarray  # (n,) degrees
    material: np.ndarray  # (n,)
    surface: np.ndarray  # (n,) index into surface_names
    surface_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.ranges)
        for name in ("positions", "intensities", "rings", "azimuths", "material", "surface"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"length mismatch in {name}")
        if n:
            if not np.all(self.ranges > 0):
                raise ValidationError("every return must have positive range")
            if self.rings.min() < 0 or self.rings.max() > 31:
                raise ValidationError("ring index outside [0, 31]")

    def __len__(self):
        return len(self.ranges)

    @classmethod
    def empty(cls) -> "LidarFrame":
        return cls(
            positions=np.zeros((0, 3)),
            ranges=np.zeros(0),
            intensities=np.zeros(0, dtype=np.uint8),
            rings=np.zeros(0, dtype=np.int64),
            azimuths=np.zeros(0),
            material=np.zeros(0, dtype=np.int64),
            surface=np.zeros(0, dtype=np.int64),
        )


@dataclass(frozen=True)
class _Patch:
    center: np.ndarray
    axis: int
    half: tuple[float, float]
    material: int
    name: str
    retro_active: bool = False
    density: float = 0.0


@functools.lru_cache(maxsize=8)
def _ray_table(n_beams, vertical_fov, azimuth_step):
    lm = LidarModel(n_beams=n_beams, vertical_fov=vertical_fov, azimuth_step=azimuth_step)
    el = np.radians(lm.elevations)
    az_deg = lm.azimuths
    az = np.radians(az_deg)
    # firing order: every ring at one azimuth, then the next azimuth
    A, E = np.meshgrid(az, el, indexing="ij")
    dirs = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1).reshape(-1, 3)
    rings = np.broadcast_to(np.arange(n_beams), A.shape).reshape(-1)
    azs = np.broadcast_to(az_deg[:, None], A.shape).reshape(-1)
    dirs.setflags(write=False)
    return dirs, np.ascontiguousarray(rings), np.ascontiguousarray(azs)


def _patches(scene: SceneDescription) -> list[_Patch]:
    lidar = scene.lidar
    out = []
    for i, s in enumerate(scene.sensors):
        h = s.tape_extent / 2.0
        # slack keeps a sensor placed exactly on a gate edge from rounding out
        active = lidar.retro_min_range - 1e-9 <= s.range <= lidar.retro_max_range + 1e-9
        out.append(_Patch(s.position, s.normal_axis, (h, h), RETRO, f"sensor{i}", retro_active=active))
    for i, c in enumerate(scene.clutter):
        out.append(
            _Patch(c.center, c.axis, (c.size[0] / 2, c.size[1] / 2), CLUTTER, f"clutter{i}", density=c.density)
        )
    bg = scene.background
    if bg.enabled:
        big = 1e6
        w = bg.half_width
        for name, axis, coord in (
            ("floor", 2, bg.floor_z),
            ("ceiling", 2, bg.ceiling_z),
            ("wall+x", 0, w),
            ("wall-x", 0, -w),
            ("wall+y", 1, w),
            ("wall-y", 1, -w),
        ):
            c = np.zeros(3)
            c[axis] = coord
            out.append(_Patch(c, axis, (big, big), DIFFUSE, name))
    return out


def _intersect(dirs: np.ndarray, p: _Patch) -> np.ndarray:
    """Ray parameter of the hit on patch ``p`` for rays from the origin (inf on miss)."""
    a = p.axis
    u, v = [k for k in range(3) if k != a]
    da = dirs[:, a]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = p.center[a] / da
        hit = dirs * t[:, None]
    ok = (
        (t > 0)
        & np.isfinite(t)
        & (np.abs(hit[:, u] - p.center[u]) <= p.half[0])
        & (np.abs(hit[:, v] - p.center[v]) <= p.half[1])
    )
    return np.where(ok, t, np.inf)


def render_frame(scene: SceneDescription, seed: int | None = None) -> LidarFrame:
    """Ray-cast one revolution; a pure function of ``(scene, seed)``.

    ``seed`` defaults to the scene's own ``rng_seed``.
    """
    if seed is None:
        seed = scene.rng_seed
    lidar = scene.lidar
    patches = _patches(scene)
    if not patches:
        return LidarFrame.empty()
    dirs, rings, azs = _ray_table(lidar.n_beams, tuple(lidar.vertical_fov), lidar.azimuth_step)

    t_all = np.stack([_intersect(dirs, p) for p in patches], axis=1)
    which = np.argmin(t_all, axis=1)  # ties go to the earlier patch
    t = t_all[np.arange(len(dirs)), which]
    keep = np.isfinite(t) & (t >= lidar.min_range) & (t <= lidar.max_range)
    idx = np.nonzero(keep)[0]
    n = len(idx)
    if n == 0:
        return LidarFrame.empty()
    which = which[idx]

    rng = np.random.default_rng(seed)
    u_band = rng.random(n)
    u_spur = rng.random(n)
    i_noise = rng.standard_normal(n)
    r_noise = rng.standard_normal(n)

    material = np.array([p.material for p in patches])[which]
    lo = np.empty(n)
    hi = np.empty(n)
    dlo, dhi = lidar.diffuse_band
    lo[:], hi[:] = dlo, dhi
    for k, p in enumerate(patches):
        sel = which == k
        if p.material == RETRO and p.retro_active:
            lo[sel], hi[sel] = lidar.retro_band
        elif p.material == CLUTTER:
            spur = sel & (u_spur < p.density)
            lo[spur], hi[spur] = lidar.clutter_band
    raw = lo + u_band * (hi - lo) + lidar.intensity_noise_sd * i_noise
    intensities = np.rint(np.clip(raw, 0.0, 255.0)).astype(np.uint8)

    ranges = t[idx] + lidar.range_noise_sd * r_noise
    ranges = np.maximum(ranges, 1e-6)
    positions = dirs[idx] * ranges[:, None]

    return LidarFrame(
        positions=positions,
        ranges=ranges,
        intensities=intensities,
        rings=rings[idx],
        azimuths=azs[idx],
        material=material,
        surface=which,
        surface_names=tuple(p.name for p in patches),
    )


def write_frame_csv(frame: LidarFrame, path) -> None:
    header = "x,y,z,range,intensity,ring,azimuth,material,surface"
    names = frame.surface_names
    try:
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            for i in range(len(frame)):
                x, y, z = frame.positions[i]
                fh.write(
                    f"{x:.6f},{y:.6f},{z:.6f},{frame.ranges[i]:.6f},{int(frame.intensities[i])},"
                    f"{int(frame.rings[i])},{frame.azimuths[i]:.4f},"
                    f"{MATERIAL_NAMES[frame.material[i]]},{names[frame.surface[i]]}\n"
                )
    except OSError as exc:
        raise IoError(f"cannot write frame file {path}: {exc}") from exc
