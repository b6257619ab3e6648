"""End-to-end interrogation run: frame -> isolation -> steering -> focus -> spectral.

Stages exchange immutable messages over ordered channels. Steering and focus
run one target at a time, since there is one mirror and one lens; the
spectral stage is pure and may fan out over a thread pool. The record list is
owned by the coordinator alone.

Per-target problems never abort a run. They become skip records whose
``skip_reason`` is one of ``SKIP_REASONS``.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import focus as focus_mod
from . import isolate, spectral, steer
from .errors import (
    ConfigError,
    DegenerateGeometry,
    InsufficientSignal,
    IoError,
    ParseError,
    SaturatedSweep,
    ValidationError,
)
from .focus import FocusCalibration, FocusCommand
from .geom import RigPose
from .isolate import ClusterReport, DbscanParams, IntensityBand, IsolationParams
from .scene import LidarFrame, SceneDescription, load_scene, render_frame
from .spectral import PAPER_WHEEL, FilterBand, QeCurve
from .steer import MirrorCommand, SteeringLimits

SKIP_REASONS = (
    "out_of_range_gate",
    "out_of_envelope",
    "degenerate_geometry",
    "no_sensor_in_view",
    "insufficient_signal",
    "saturated_sweep",
)

REPORT_HEADER = (
    "target_id",
    "centroid_x",
    "centroid_y",
    "centroid_z",
    "mean_range",
    "pitch_deg",
    "yaw_deg",
    "in_envelope",
    "focus_power",
    "defocus_error",
    "band_1",
    "band_2",
    "band_3",
    "band_4",
    "band_5",
    "band_6",
    "estimated_peak",
    "estimated_amplitude",
    "state_score",
    "skip_reason",
)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SpectralSettings:
    wheel: tuple[FilterBand, ...] = PAPER_WHEEL
    qe: QeCurve = QeCurve()
    exposure: float = 0.15
    noise_sd: float = 0.0
    sensor_fwhm: float = 20.0
    baseline: float = 0.0
    view_radius: float = 0.10


@dataclass(frozen=True)
class PipelineConfig:
    scene: SceneDescription
    isolation: IsolationParams = IsolationParams()
    rig: RigPose | None = None  # None: use the scene's rig
    limits: SteeringLimits = SteeringLimits()
    calibration: FocusCalibration = field(default_factory=FocusCalibration.ideal)
    defocus_tolerance: float = 0.05
    focus_distance: str = "mean_range"  # or "folded"
    spectral: SpectralSettings = SpectralSettings()
    seed: int | None = None  # None: use the scene's seed
    output: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.focus_distance not in ("mean_range", "folded"):
            raise ConfigError(f"focus.distance must be 'mean_range' or 'folded', got {self.focus_distance!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.defocus_tolerance < 0:
            raise ConfigError("focus.tolerance must be >= 0")

    @property
    def rig_pose(self) -> RigPose:
        return self.rig if self.rig is not None else self.scene.rig

    @property
    def run_seed(self) -> int:
        return self.scene.rng_seed if self.seed is None else self.seed


def _pair(v, name):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{name}: expected a pair of numbers, got {v!r}")
    return float(v[0]), float(v[1])


def _check_keys(d, allowed, where):
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")
    return d


def config_from_dict(raw: dict, base_dir: Path = Path(".")) -> PipelineConfig:
    """Build a config from parsed YAML; relative paths resolve against ``base_dir``."""
    try:
        top = _check_keys(
            raw,
            {"scene", "seed", "output", "isolation", "rig", "steering", "focus", "spectral", "workers"},
            "config",
        )
        if "scene" not in top:
            raise ConfigError("config: 'scene' is required")
        scene_path = base_dir / top["scene"]
        if not scene_path.exists():
            raise ConfigError(f"scene file not found: {scene_path}")
        scene = load_scene(scene_path)

        d = _check_keys(
            top.get("isolation"), {"band", "eps", "min_pts", "max_extent", "range_gate", "grid_index"}, "isolation"
        )
        i0 = IsolationParams()
        iso = IsolationParams(
            band=IntensityBand(*_pair(d["band"], "isolation.band")) if "band" in d else i0.band,
            dbscan=DbscanParams(
                eps=float(d.get("eps", i0.dbscan.eps)), min_pts=int(d.get("min_pts", i0.dbscan.min_pts))
            ),
            max_extent=float(d.get("max_extent", i0.max_extent)),
            range_gate=_pair(d["range_gate"], "isolation.range_gate") if "range_gate" in d else i0.range_gate,
            grid_index=bool(d.get("grid_index", False)),
        )

        rig = None
        if top.get("rig") is not None:
            d = _check_keys(top["rig"], {"camera_position", "mirror_position", "mirror_default_normal"}, "rig")
            base = scene.rig
            rig = RigPose(
                camera_position=d.get("camera_position", base.camera_position),
                mirror_position=d.get("mirror_position", base.mirror_position),
                mirror_default_normal=d.get("mirror_default_normal", base.mirror_default_normal),
            )

        d = _check_keys(top.get("steering"), {"max_deviation", "referent"}, "steering")
        limits = SteeringLimits(
            max_deviation=float(d.get("max_deviation", steer.ENVELOPE_DEG)), referent=d.get("referent", "normal")
        )

        d = _check_keys(
            top.get("focus"), {"calibration", "power_at_infinity", "power_limits", "tolerance", "distance"}, "focus"
        )
        p_inf = float(d.get("power_at_infinity", 0.0))
        plim = _pair(d["power_limits"], "focus.power_limits") if "power_limits" in d else (-2.0, 3.0)
        if d.get("calibration"):
            cal_path = base_dir / d["calibration"]
            if not cal_path.exists():
                raise ConfigError(f"calibration file not found: {cal_path}")
            cal = focus_mod.load_calibration(cal_path, p_inf, plim)
        else:
            cal = FocusCalibration.ideal(p_inf, power_limits=plim)

        d = _check_keys(
            top.get("spectral"),
            {"wheel", "band_fwhm", "qe", "exposure", "noise_sd", "sensor_fwhm", "baseline", "view_radius"},
            "spectral",
        )
        s0 = SpectralSettings()
        wheel = s0.wheel
        if "wheel" in d:
            fw = float(d.get("band_fwhm", 10.0))
            wheel = tuple(FilterBand(float(c), fw) for c in d["wheel"])
            if len(wheel) != 6:
                raise ConfigError("spectral.wheel must list 6 band centers")
        qe = s0.qe
        if "qe" in d:
            q = _check_keys(d["qe"], {"lo", "hi"}, "spectral.qe")
            qe = QeCurve(_pair(q.get("lo", qe.lo), "qe.lo"), _pair(q.get("hi", qe.hi), "qe.hi"))
        spec_settings = SpectralSettings(
            wheel=wheel,
            qe=qe,
            exposure=float(d.get("exposure", s0.exposure)),
            noise_sd=float(d.get("noise_sd", s0.noise_sd)),
            sensor_fwhm=float(d.get("sensor_fwhm", s0.sensor_fwhm)),
            baseline=float(d.get("baseline", s0.baseline)),
            view_radius=float(d.get("view_radius", s0.view_radius)),
        )
        if not spec_settings.exposure > 0 or spec_settings.noise_sd < 0:
            raise ConfigError("spectral: need exposure > 0 and noise_sd >= 0")

        seed = top.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
        f = top.get("focus") or {}
        return PipelineConfig(
            scene=scene,
            isolation=iso,
            rig=rig,
            limits=limits,
            calibration=cal,
            defocus_tolerance=float(f.get("tolerance", 0.05)),
            focus_distance=f.get("distance", "mean_range"),
            spectral=spec_settings,
            seed=seed,
            output=base_dir / top["output"] if top.get("output") else None,
            workers=int(top.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (ParseError, ValidationError, IoError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw or {}, base_dir=path.parent)


# ---------------------------------------------------------------------------
# stage graph


@dataclass(frozen=True)
class Stage:
    name: str
    consumes: type | None
    produces: type | None
    hardware: str  # the physical device this stage stands in for


@dataclass(frozen=True)
class Channel:
    source: str
    sink: str
    message: type


@dataclass(frozen=True)
class StageGraph:
    stages: tuple[Stage, ...]
    channels: tuple[Channel, ...]

    def stage(self, name: str) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def order(self) -> list[str]:
        """Topological order of stage names (Kahn's algorithm)."""
        indeg = {s.name: 0 for s in self.stages}
        for c in self.channels:
            indeg[c.sink] += 1
        ready = deque(n for n, k in indeg.items() if k == 0)
        out = []
        while ready:
            n = ready.popleft()
            out.append(n)
            for c in self.channels:
                if c.source == n:
                    indeg[c.sink] -= 1
                    if indeg[c.sink] == 0:
                        ready.append(c.sink)
        if len(out) != len(self.stages):
            raise ValueError("stage graph has a cycle")
        return out


def stage_graph() -> StageGraph:
    stages = (
        Stage("frame_source", None, LidarFrame, "LiDAR"),
        Stage("isolation", LidarFrame, ClusterReport, "-"),
        Stage("steering", ClusterReport, MirrorCommand, "fast steering mirror"),
        Stage("focus", MirrorCommand, FocusCommand, "liquid lens"),
        Stage("spectral", FocusCommand, spectral.SpectralSweep, "camera + filter wheel"),
    )
    channels = (
        Channel("frame_source", "isolation", LidarFrame),
        Channel("isolation", "steering", ClusterReport),
        Channel("steering", "focus", MirrorCommand),
        Channel("focus", "spectral", FocusCommand),
    )
    return StageGraph(stages, channels)


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class InterrogationRecord:
    target_id: int
    centroid: tuple[float, float, float]
    mean_range: float
    pitch: float | None = None
    yaw: float | None = None
    in_envelope: bool | None = None
    focus_power: float | None = None
    defocus_error: float | None = None
    band_intensities: tuple[float, ...] | None = None
    estimated_peak: float | None = None
    estimated_amplitude: float | None = None
    state_score: float | None = None
    skip_reason: str | None = None

    @property
    def is_full(self) -> bool:
        return self.skip_reason is None


@dataclass(frozen=True)
class _Msg:
    """What travels along a channel: the target plus the stage's payload."""

    target: ClusterReport
    payload: Any
    command: MirrorCommand | None = None


def _base_record(rep: ClusterReport) -> InterrogationRecord:
    return InterrogationRecord(
        target_id=rep.id, centroid=tuple(float(c) for c in rep.centroid), mean_range=float(rep.mean_range)
    )


def _sensor_in_view(scene: SceneDescription, aim: np.ndarray, radius: float):
    best, best_d = None, math.inf
    for s in scene.sensors:
        d = float(np.linalg.norm(s.position - aim))
        if d <= max(radius, s.tape_extent) and d < best_d:
            best, best_d = s, d
    return best


def _spectral_stage(cfg: PipelineConfig, msg: _Msg) -> InterrogationRecord:
    rep, fcmd, mcmd = msg.target, msg.payload, msg.command
    rec = replace(
        _base_record(rep),
        pitch=mcmd.pitch,
        yaw=mcmd.yaw,
        in_envelope=mcmd.in_envelope,
        focus_power=fcmd.power,
        defocus_error=focus_mod.defocus_error(cfg.calibration, fcmd.power, fcmd.target_distance),
    )
    sensor = _sensor_in_view(cfg.scene, rep.centroid, cfg.spectral.view_radius)
    if sensor is None:
        return replace(rec, skip_reason="no_sensor_in_view")
    st = cfg.spectral
    seed = np.random.SeedSequence([cfg.run_seed, rep.id]).generate_state(1)[0]
    sw = spectral.sweep(sensor, st.wheel, st.qe, st.exposure, st.noise_sd, int(seed))
    rec = replace(rec, band_intensities=tuple(float(v) for v in sw.intensities))
    try:
        peak, amp = spectral.estimate_peak(sw.readings, st.qe, st.exposure, st.sensor_fwhm, st.baseline)
    except SaturatedSweep:
        return replace(rec, skip_reason="saturated_sweep")
    except InsufficientSignal:
        return replace(rec, skip_reason="insufficient_signal")
    return replace(
        rec,
        estimated_peak=peak,
        estimated_amplitude=amp,
        state_score=spectral.state_score(peak, amp, cfg.scene.encoding),
    )


def run_pipeline(config: PipelineConfig, frame: LidarFrame | None = None) -> list[InterrogationRecord]:
    """Interrogate every sensor-like cluster in one frame.

    ``frame`` may be supplied to bypass the simulator; otherwise one is
    rendered from the config's scene and seed. Records come back ordered by
    target id.
    """
    rig = config.rig_pose
    records: dict[int, InterrogationRecord] = {}

    # frame_source -> isolation
    if frame is None:
        frame = render_frame(config.scene, config.run_seed)
    reports = isolate.detect(frame, config.isolation)

    # isolation -> steering; tape-sized clusters only
    to_steer: deque[_Msg] = deque()
    for rep in reports:
        if rep.reject_reason == "extent":
            continue
        if rep.reject_reason == "out_of_range_gate":
            records[rep.id] = replace(_base_record(rep), skip_reason="out_of_range_gate")
            continue
        to_steer.append(_Msg(rep, rep))

    # steering -> focus
    to_focus: deque[_Msg] = deque()
    while to_steer:
        msg = to_steer.popleft()
        rep = msg.target
        try:
            cmd = steer.command_for_target(rig, rep.centroid, config.limits)
        except DegenerateGeometry:
            records[rep.id] = replace(_base_record(rep), skip_reason="degenerate_geometry")
            continue
        if not cmd.in_envelope:
            records[rep.id] = replace(
                _base_record(rep), pitch=cmd.pitch, yaw=cmd.yaw, in_envelope=False, skip_reason="out_of_envelope"
            )
            continue
        to_focus.append(_Msg(rep, cmd, cmd))

    # focus -> spectral
    to_spectral: list[_Msg] = []
    while to_focus:
        msg = to_focus.popleft()
        rep = msg.target
        if config.focus_distance == "folded":
            dist = steer.focus_path_length(rig, rep.centroid)
        else:
            dist = rep.mean_range
        fcmd = focus_mod.focus_command(config.calibration, dist, config.defocus_tolerance)
        to_spectral.append(_Msg(rep, fcmd, msg.command))

    if config.workers > 1 and len(to_spectral) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            done = list(pool.map(lambda m: _spectral_stage(config, m), to_spectral))
    else:
        done = [_spectral_stage(config, m) for m in to_spectral]
    for rec in done:
        records[rec.target_id] = rec

    return [records[k] for k in sorted(records)]


# ---------------------------------------------------------------------------
# report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def record_row(rec: InterrogationRecord) -> list[str]:
    bands = list(rec.band_intensities) if rec.band_intensities is not None else [None] * 6
    values = [
        rec.target_id,
        *rec.centroid,
        rec.mean_range,
        rec.pitch,
        rec.yaw,
        rec.in_envelope,
        rec.focus_power,
        rec.defocus_error,
        *bands,
        rec.estimated_peak,
        rec.estimated_amplitude,
        rec.state_score,
    ]
    return [_fmt(v) for v in values] + [rec.skip_reason or ""]


def write_report(records, path) -> None:
    """CSV with ``REPORT_HEADER``; floats at 6 significant digits, LF line ends."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for rec in records:
                w.writerow(record_row(rec))
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def read_report(path) -> list[InterrogationRecord]:
    def num(s):
        return float(s) if s != "" else None

    out = []
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != REPORT_HEADER:
        raise ParseError("unexpected report header", path=path, line=1)
    for row in rows[1:]:
        r = dict(zip(REPORT_HEADER, row))
        bands = [num(r[f"band_{k}"]) for k in range(1, 7)]
        out.append(
            InterrogationRecord(
                target_id=int(r["target_id"]),
                centroid=(float(r["centroid_x"]), float(r["centroid_y"]), float(r["centroid_z"])),
                mean_range=float(r["mean_range"]),
                pitch=num(r["pitch_deg"]),
                yaw=num(r["yaw_deg"]),
                in_envelope=None if r["in_envelope"] == "" else r["in_envelope"] == "true",
                focus_power=num(r["focus_power"]),
                defocus_error=num(r["defocus_error"]),
                band_intensities=None if bands[0] is None else tuple(bands),
                estimated_peak=num(r["estimated_peak"]),
                estimated_amplitude=num(r["estimated_amplitude"]),
                state_score=num(r["state_score"]),
                skip_reason=r["skip_reason"] or None,
            )
        )
    return out


def run_and_report(config: PipelineConfig, output=None) -> list[InterrogationRecord]:
    records = run_pipeline(config)
    path = output if output is not None else config.output
    if path is not None:
        write_report(records, path)
    return records

