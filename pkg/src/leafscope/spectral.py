"""Filter-wheel radiometry and spectral-peak recovery.

A reading through one filter is

    exposure * integral R(lam) * T(lam) * QE(lam) dlam

where the sensor reflectance ``R`` is a flat baseline plus a Gaussian peak,
the filter transmission ``T`` is a Gaussian of the band's FWHM, and ``QE``
is linear in wavelength. The integral runs over ``center +/- 5 FWHM`` of the
filter on a 0.1 nm grid.

Because Gaussian * Gaussian is a Gaussian and a linear QE averages to its
value at the product's centroid, a reading has the closed form

    exposure * tp * a * QE(mu) * C * ws * wf / W * exp(-4 ln2 (c - cb)^2 / W^2)

with ``W^2 = ws^2 + wf^2``, ``C = sqrt(pi / (4 ln 2))`` and
``mu = (cb ws^2 + c wf^2) / W^2``. :func:`estimate_peak` divides the
readings by everything except ``a * exp(...)`` and fits what remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientSignal, SaturatedSweep, ValidationError
from .scene import PlantSensor, StateEncoding

FOUR_LN2 = 4.0 * math.log(2.0)
GAUSS_AREA = math.sqrt(math.pi / FOUR_LN2)  # integral of exp(-4ln2 x^2) per unit FWHM
GRID_STEP = 0.1
HALF_WINDOW_FWHM = 5.0
PEAK_CLAMP = (620.0, 690.0)


@dataclass(frozen=True)
class FilterBand:
    center: float
    fwhm: float = 10.0
    transmission_peak: float = 1.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValidationError("fwhm must be > 0", field="band.fwhm")
        if not 400.0 <= self.center <= 1000.0:
            raise ValidationError("center must lie in [400, 1000] nm", field="band.center")
        if not 0.0 < self.transmission_peak <= 1.0:
            raise ValidationError("transmission_peak must lie in (0, 1]", field="band.transmission_peak")


PAPER_WHEEL = tuple(FilterBand(c, 10.0) for c in (630.0, 640.0, 650.0, 660.0, 670.0, 680.0))


@dataclass(frozen=True)
class QeCurve:
    """Straight line through two (wavelength, QE) anchors, clipped to [0, 1]."""

    lo: tuple[float, float] = (630.0, 0.60)
    hi: tuple[float, float] = (680.0, 0.50)

    def __post_init__(self):
        if not self.lo[0] < self.hi[0]:
            raise ValidationError("anchor wavelengths must increase", field="qe")
        if not (0.0 <= self.lo[1] <= 1.0 and 0.0 <= self.hi[1] <= 1.0):
            raise ValidationError("QE must lie in [0, 1]", field="qe")

    @property
    def slope(self) -> float:
        return (self.hi[1] - self.lo[1]) / (self.hi[0] - self.lo[0])

    def __call__(self, lam):
        return np.clip(self.lo[1] + self.slope * (np.asarray(lam, dtype=np.float64) - self.lo[0]), 0.0, 1.0)


@dataclass(frozen=True)
class Reading:
    band: FilterBand
    intensity: float
    saturated: bool


@dataclass(frozen=True)
class SpectralSweep:
    readings: tuple[Reading, ...]
    exposure: float
    estimated_peak: float | None = None
    estimated_amplitude: float | None = None
    state_score: float | None = None

    def __post_init__(self):
        if len(self.readings) != 6:
            raise ValidationError("a sweep has exactly 6 readings")
        centers = [r.band.center for r in self.readings]
        if len(set(centers)) != 6:
            raise ValidationError("band centers must be distinct")

    @property
    def intensities(self) -> np.ndarray:
        return np.array([r.intensity for r in self.readings])


def reflectance(sensor: PlantSensor, lam):
    lam = np.asarray(lam, dtype=np.float64)
    g = np.exp(-FOUR_LN2 * (lam - sensor.peak_wavelength) ** 2 / sensor.peak_fwhm**2)
    return sensor.baseline + sensor.peak_amplitude * g


def transmission(band: FilterBand, lam):
    lam = np.asarray(lam, dtype=np.float64)
    return band.transmission_peak * np.exp(-FOUR_LN2 * (lam - band.center) ** 2 / band.fwhm**2)


def band_signal(sensor: PlantSensor, band: FilterBand, qe: QeCurve, step: float = GRID_STEP) -> float:
    """Noiseless, unclamped integral R*T*QE over the band window (trapezoid rule)."""
    half = HALF_WINDOW_FWHM * band.fwhm
    n = int(round(2.0 * half / step))
    lam = np.linspace(band.center - half, band.center + half, n + 1)
    y = reflectance(sensor, lam) * transmission(band, lam) * qe(lam)
    return float(np.trapezoid(y, lam))


def _reading(band: FilterBand, raw: float) -> Reading:
    sat = raw > 1.0
    return Reading(band, float(min(1.0, max(0.0, raw))), bool(sat))


def simulate_reading(
    sensor: PlantSensor,
    band: FilterBand,
    qe: QeCurve = QeCurve(),
    exposure: float = 0.15,
    noise_sd: float = 0.0,
    seed: int | None = 0,
) -> Reading:
    """One filtered exposure, normalised so that 1.0 is full well.

    Only clipping at the top sets ``saturated``; a reading clipped at zero is
    simply dark.
    """
    if not exposure > 0:
        raise ValidationError("exposure must be > 0", field="exposure")
    raw = exposure * band_signal(sensor, band, qe)
    if noise_sd > 0:
        raw += noise_sd * np.random.default_rng(seed).standard_normal()
    return _reading(band, raw)


def sweep(
    sensor: PlantSensor,
    wheel: Sequence[FilterBand] = PAPER_WHEEL,
    qe: QeCurve = QeCurve(),
    exposure: float = 0.15,
    noise_sd: float = 0.0,
    seed: int | None = 0,
) -> SpectralSweep:
    """Step the wheel through its six filters in order.

    Noise for all six readings comes from one generator seeded by ``seed``.
    """
    if len(wheel) != 6:
        raise ValidationError(f"filter wheel holds 6 bands, got {len(wheel)}", field="wheel")
    if not exposure > 0:
        raise ValidationError("exposure must be > 0", field="exposure")
    noise = np.random.default_rng(seed).standard_normal(6) * noise_sd
    readings = tuple(
        _reading(b, exposure * band_signal(sensor, b, qe) + (noise[i] if noise_sd > 0 else 0.0))
        for i, b in enumerate(wheel)
    )
    return SpectralSweep(readings, exposure)


def _gain(band: FilterBand, qe: QeCurve, exposure: float, fwhm: float, center: float) -> tuple[float, float]:
    """(per-unit-amplitude gain at the band center, squared effective width)."""
    w2 = fwhm**2 + band.fwhm**2
    mu = (band.center * fwhm**2 + center * band.fwhm**2) / w2
    g = exposure * band.transmission_peak * float(qe(mu)) * GAUSS_AREA * fwhm * band.fwhm / math.sqrt(w2)
    return g, w2


def _fit(x, y, w2, center0, amp0, max_iter=100, tol=1e-9):
    """Damped Gauss-Newton for y ~ a * exp(-4ln2 (c - x)^2 / w2) over (c, a)."""
    c, a = center0, amp0

    def resid(c, a):
        return y - a * np.exp(-FOUR_LN2 * (c - x) ** 2 / w2)

    r = resid(c, a)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        e = np.exp(-FOUR_LN2 * (c - x) ** 2 / w2)
        J = np.column_stack([a * e * (-2.0 * FOUR_LN2 * (c - x) / w2), e])
        A = J.T @ J
        g = J.T @ r
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-12), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            c_new, a_new = c + step[0], max(0.0, a + step[1])
            r_new = resid(c_new, a_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost or lam > 1e12:
                break
            lam *= 10.0
        moved = abs(c_new - c) + abs(a_new - a)
        c, a, r, cost = c_new, a_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-12)
        if moved < tol:
            break
    return c, a


def estimate_peak(
    readings: Sequence[Reading],
    qe: QeCurve = QeCurve(),
    exposure: float = 0.15,
    sensor_fwhm: float = 20.0,
    baseline: float = 0.0,
    passes: int = 3,
) -> tuple[float, float]:
    """Recover (peak wavelength nm, peak amplitude) from a sweep.

    The peak's FWHM is held at ``sensor_fwhm``; only center and height are
    fitted. The known ``baseline`` contribution is subtracted first. The
    QE correction depends on the center estimate, so the fit is repeated
    ``passes`` times, each time correcting with the previous center.
    """
    readings = list(readings)
    n_sat = sum(r.saturated for r in readings)
    if n_sat > 3:
        raise SaturatedSweep(f"{n_sat} of {len(readings)} readings saturated")
    usable = [r for r in readings if not r.saturated and r.intensity > 0.0]
    if len(usable) < 3:
        raise InsufficientSignal(f"only {len(usable)} usable readings, need 3")

    x = np.array([r.band.center for r in usable])
    raw = np.array([r.intensity for r in usable])
    base = np.array(
        [
            exposure * baseline * r.band.transmission_peak * float(qe(r.band.center)) * GAUSS_AREA * r.band.fwhm
            for r in usable
        ]
    )
    raw = raw - base

    center = float(x[np.argmax(raw)])
    amp = None
    for _ in range(passes):
        gains, w2 = zip(*(_gain(r.band, qe, exposure, sensor_fwhm, center) for r in usable))
        y = raw / np.array(gains)
        if amp is None:
            amp = max(float(y.max()), 1e-6)
        center, amp = _fit(x, y, np.array(w2), center, amp)
        center = min(PEAK_CLAMP[1], max(PEAK_CLAMP[0], center))
    return float(center), float(max(0.0, amp))


def state_score(peak: float, amplitude: float, encoding: StateEncoding = StateEncoding()) -> float:
    """Map a recovered (peak, amplitude) back to the sensor state in [0, 1]."""
    return encoding.decode(peak, amplitude)


def interrogate(
    sensor: PlantSensor,
    encoding: StateEncoding = StateEncoding(),
    wheel: Sequence[FilterBand] = PAPER_WHEEL,
    qe: QeCurve = QeCurve(),
    exposure: float = 0.15,
    noise_sd: float = 0.0,
    seed: int | None = 0,
    sensor_fwhm: float | None = None,
) -> SpectralSweep:
    """Sweep, fit and score one sensor. ``sensor_fwhm`` defaults to the sensor's own."""
    s = sweep(sensor, wheel, qe, exposure, noise_sd, seed)
    fwhm = sensor.peak_fwhm if sensor_fwhm is None else sensor_fwhm
    peak, amp = estimate_peak(s.readings, qe, exposure, fwhm, sensor.baseline)
    return SpectralSweep(s.readings, exposure, peak, amp, state_score(peak, amp, encoding))
