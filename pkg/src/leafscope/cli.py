"""``leafscope`` command line.

Exit codes: 0 success, 2 bad config/scene/arguments, 3 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import focus as focus_mod
from . import isolate, pipeline, scene, spectral, steer
from .errors import ConfigError, IoError, LeafscopeError, ParseError, ValidationError

EXIT_CONFIG = 2
EXIT_IO = 3


def _iso_params(args) -> isolate.IsolationParams:
    return isolate.IsolationParams(
        band=isolate.IntensityBand(*args.band),
        dbscan=isolate.DbscanParams(args.eps, args.min_pts),
        max_extent=args.max_extent,
        range_gate=tuple(args.range_gate),
    )


def cmd_run(args) -> int:
    cfg = pipeline.load_config(args.config)
    records = pipeline.run_and_report(cfg, args.out)
    for r in records:
        if r.is_full:
            print(
                f"target {r.target_id}: range {r.mean_range:.3f} m  pitch {r.pitch:+.2f}  yaw {r.yaw:+.2f}  "
                f"power {r.focus_power:.3f} D  peak {r.estimated_peak:.1f} nm  state {r.state_score:.3f}"
            )
        else:
            print(f"target {r.target_id}: skipped ({r.skip_reason})")
    out = args.out or cfg.output
    if out is not None:
        print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_simulate(args) -> int:
    sc = scene.load_scene(args.scene)
    frame = scene.render_frame(sc, args.seed)
    scene.write_frame_csv(frame, args.out)
    print(f"wrote {len(frame)} returns to {args.out}")
    return 0


def cmd_detect(args) -> int:
    sc = scene.load_scene(args.scene)
    frame = scene.render_frame(sc, args.seed)
    reports = isolate.detect(frame, _iso_params(args))
    for r in reports:
        x, y, z = r.centroid
        print(
            f"{r.id} centroid=({x:.4f}, {y:.4f}, {z:.4f}) mean_range={r.mean_range:.4f} "
            f"points={r.point_count} valid={str(r.valid).lower()}"
        )
    if args.csv:
        try:
            with open(args.csv, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["id", "centroid_x", "centroid_y", "centroid_z", "mean_range", "point_count", "extent", "valid"])
                for r in reports:
                    w.writerow(
                        [r.id, *(f"{c:.6g}" for c in r.centroid), f"{r.mean_range:.6g}", r.point_count,
                         f"{r.extent:.6g}", str(r.valid).lower()]
                    )
        except OSError as exc:
            raise IoError(f"cannot write {args.csv}: {exc}") from exc
    return 0


def cmd_steer(args) -> int:
    rig = scene.load_scene(args.scene).rig if args.scene else steer.RigPose.default()
    limits = steer.SteeringLimits(args.limit, args.referent)
    cmd = steer.command_for_target(rig, np.array(args.target, dtype=float), limits)
    print(f"pitch={cmd.pitch:.6f}")
    print(f"yaw={cmd.yaw:.6f}")
    print(f"in_envelope={str(cmd.in_envelope).lower()}")
    print(f"deviation={cmd.deviation:.6f}")
    print(f"pointing_residual={cmd.pointing_residual:.3e}")
    return 0


def cmd_focus(args) -> int:
    if args.calibration:
        cal = focus_mod.load_calibration(args.calibration, args.power_at_infinity)
    else:
        cal = focus_mod.FocusCalibration.ideal(args.power_at_infinity)
    for d in args.distance:
        print(f"{d:g} m -> {focus_mod.required_power(cal, d):.6f} D")
    return 0


def cmd_interrogate(args) -> int:
    sc = scene.load_scene(args.scene)
    if not 0 <= args.sensor_id < len(sc.sensors):
        raise ConfigError(f"scene has {len(sc.sensors)} sensors; no sensor id {args.sensor_id}")
    sensor = sc.sensors[args.sensor_id]
    sw = spectral.interrogate(
        sensor, sc.encoding, exposure=args.exposure, noise_sd=args.noise_sd, seed=args.seed
    )
    for r in sw.readings:
        flag = " (saturated)" if r.saturated else ""
        print(f"{r.band.center:g} nm: {r.intensity:.6f}{flag}")
    print(f"estimated_peak={sw.estimated_peak:.3f}")
    print(f"estimated_amplitude={sw.estimated_amplitude:.4f}")
    print(f"state_score={sw.state_score:.4f}")
    if args.csv:
        try:
            with open(args.csv, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["band_nm", "intensity", "saturated"])
                for r in sw.readings:
                    w.writerow([f"{r.band.center:g}", f"{r.intensity:.6g}", str(r.saturated).lower()])
                w.writerow([])
                w.writerow(["estimated_peak", "estimated_amplitude", "state_score"])
                w.writerow([f"{sw.estimated_peak:.6g}", f"{sw.estimated_amplitude:.6g}", f"{sw.state_score:.6g}"])
        except OSError as exc:
            raise IoError(f"cannot write {args.csv}: {exc}") from exc
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leafscope", description="Simulated LiDAR-guided leaf-sensor interrogation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run the full pipeline from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="report CSV (overrides the config's output)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="render one LiDAR frame to CSV")
    s.add_argument("--scene", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("detect", help="isolate retroreflector clusters in a simulated frame")
    s.add_argument("--scene", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--csv")
    d = isolate.IsolationParams()
    s.add_argument("--band", type=float, nargs=2, default=(d.band.lo, d.band.hi), metavar=("LO", "HI"))
    s.add_argument("--eps", type=float, default=d.dbscan.eps)
    s.add_argument("--min-pts", type=int, default=d.dbscan.min_pts)
    s.add_argument("--max-extent", type=float, default=d.max_extent)
    s.add_argument("--range-gate", type=float, nargs=2, default=d.range_gate, metavar=("LO", "HI"))
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("steer", help="mirror command for a target point")
    s.add_argument("--scene", help="take the rig pose from this scene (default rig otherwise)")
    s.add_argument("--target", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    s.add_argument("--limit", type=float, default=steer.ENVELOPE_DEG)
    s.add_argument("--referent", choices=("normal", "beam"), default="normal")
    s.set_defaults(func=cmd_steer)

    s = sub.add_parser("focus", help="lens power for one or more distances")
    s.add_argument("--distance", type=float, nargs="+", required=True)
    s.add_argument("--calibration")
    s.add_argument("--power-at-infinity", type=float, default=0.0)
    s.set_defaults(func=cmd_focus)

    s = sub.add_parser("interrogate", help="filter sweep and state estimate for one scene sensor")
    s.add_argument("--scene", required=True)
    s.add_argument("--sensor-id", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exposure", type=float, default=0.15)
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_interrogate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IoError as exc:
        print(f"leafscope: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ParseError, ValidationError) as exc:
        print(f"leafscope: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LeafscopeError as exc:
        print(f"leafscope: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
