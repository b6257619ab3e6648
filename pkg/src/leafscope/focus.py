"""Liquid-lens autofocus from a distance -> optical power calibration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import IoError, NonPositiveDistance, ParseError, ValidationError


@dataclass(frozen=True)
class FocusCalibration:
    """Measured (distance m, power D) pairs plus the lens' limits.

    Powers must fall strictly as distance grows, and the table has to cover
    at least 0.5-5.0 m.
    """

    distances: np.ndarray
    powers: np.ndarray
    power_at_infinity: float = 0.0
    power_limits: tuple[float, float] = (-2.0, 3.0)

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64).copy()
        p = np.asarray(self.powers, dtype=np.float64).copy()
        d.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "powers", p)
        if d.ndim != 1 or d.shape != p.shape or len(d) < 2:
            raise ValidationError("need at least two (distance, power) samples", field="samples")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(p))):
            raise ValidationError("samples must be finite", field="samples")
        if d[0] <= 0:
            raise ValidationError("distances must be positive", field="samples")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("distances must be strictly increasing", field="samples")
        if np.any(np.diff(p) >= 0):
            raise ValidationError("power must strictly decrease with distance", field="samples")
        if d[0] > 0.5 or d[-1] < 5.0:
            raise ValidationError("samples must span at least [0.5, 5.0] m", field="samples")
        lo, hi = self.power_limits
        if not lo < hi:
            raise ValidationError("need lo < hi", field="power_limits")
        if p.min() < lo or p.max() > hi:
            raise ValidationError("sample powers exceed the lens limits", field="samples")

    @classmethod
    def ideal(
        cls,
        power_at_infinity: float = 0.0,
        spacing: float = 0.25,
        span: tuple[float, float] = (0.5, 5.0),
        power_limits: tuple[float, float] = (-2.0, 3.0),
    ) -> "FocusCalibration":
        """Thin-lens table ``P(d) = P_inf + 1/d`` sampled every ``spacing`` meters."""
        n = int(round((span[1] - span[0]) / spacing)) + 1
        d = np.linspace(span[0], span[1], n)
        return cls(d, power_at_infinity + 1.0 / d, power_at_infinity, power_limits)


@dataclass(frozen=True)
class FocusCommand:
    power: float
    target_distance: float
    defocus_tolerance: float = 0.05

    def in_focus(self, true_power: float) -> bool:
        return abs(self.power - true_power) <= self.defocus_tolerance


def load_calibration(
    path, power_at_infinity: float = 0.0, power_limits: tuple[float, float] = (-2.0, 3.0)
) -> FocusCalibration:
    """Read a two-column ``distance_m, power_D`` table (comma or whitespace separated).

    Blank lines and ``#`` comments are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read calibration {path}: {exc}") from exc
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ParseError("expected two columns: distance_m, power_D", path=path, line=lineno)
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"not a number: {line!r}", path=path, line=lineno) from exc
    if not rows:
        raise ParseError("calibration file has no samples", path=path)
    arr = np.array(rows)
    return FocusCalibration(arr[:, 0], arr[:, 1], power_at_infinity, power_limits)


def save_calibration(cal: FocusCalibration, path) -> None:
    lines = ["# distance_m, power_D"]
    lines += [f"{d!r}, {p!r}" for d, p in zip(cal.distances.tolist(), cal.powers.tolist())]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write calibration {path}: {exc}") from exc


def required_power(cal: FocusCalibration, distance: float) -> float:
    """Lens power that focuses at ``distance``.

    Inside the table: linear interpolation in vergence (1/distance), which is
    exact for a thin lens and stays monotone. Outside it: the thin-lens law,
    bounded by the nearest table entry so the curve never turns upward, then
    clamped to the lens limits.
    """
    if not distance > 0:
        raise NonPositiveDistance(distance)
    d, p = cal.distances, cal.powers
    if distance < d[0]:
        power = max(p[0], cal.power_at_infinity + 1.0 / distance)
    elif distance > d[-1]:
        power = min(p[-1], cal.power_at_infinity + 1.0 / distance)
    else:
        # np.interp needs ascending abscissae; 1/d descends
        power = float(np.interp(1.0 / distance, (1.0 / d)[::-1], p[::-1]))
    lo, hi = cal.power_limits
    return float(min(hi, max(lo, power)))


def defocus_error(cal: FocusCalibration, set_power: float, true_distance: float) -> float:
    return abs(set_power - required_power(cal, true_distance))


def focus_command(cal: FocusCalibration, distance: float, tolerance: float = 0.05) -> FocusCommand:
    return FocusCommand(required_power(cal, distance), float(distance), tolerance)


def track_focus(
    cal: FocusCalibration, distance_stream: Iterable[float], tolerance: float = 0.05
) -> list[FocusCommand]:
    """One command per incoming distance, in arrival order."""
    out = []
    for i, d in enumerate(distance_stream):
        if not d > 0:
            raise NonPositiveDistance(d, index=i)
        out.append(focus_command(cal, d, tolerance))
    return out

