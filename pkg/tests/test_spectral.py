import math

import numpy as np
import pytest

from leafscope.errors import InsufficientSignal, SaturatedSweep, ValidationError
from leafscope.scene import PlantSensor, StateEncoding
from leafscope.spectral import (
    PAPER_WHEEL,
    FilterBand,
    QeCurve,
    Reading,
    estimate_peak,
    interrogate,
    reflectance,
    simulate_reading,
    state_score,
    sweep,
)

from oracles import fine_reading

QE = QeCurve()
SHIFT = StateEncoding(mode="shift")


def sensor_at(peak, amp=0.8, **kw):
    return PlantSensor(position=(1.5, 0, 0), peak_wavelength=peak, peak_amplitude=amp, **kw)


class TestModel:
    def test_reflectance_peaks_at_center(self):
        s = sensor_at(655.0)
        lam = np.linspace(600, 700, 1001)
        assert lam[np.argmax(reflectance(s, lam))] == 655.0
        assert math.isclose(float(reflectance(s, 665.0)), 0.4)  # half max one half-width out

    def test_dead_sensor_reads_zero(self):
        r = simulate_reading(sensor_at(655.0, amp=0.0), FilterBand(655.0))
        assert r.intensity == 0.0 and not r.saturated

    def test_qe_anchors_and_clip(self):
        assert math.isclose(float(QE(630)), 0.6) and math.isclose(float(QE(680)), 0.5)
        assert float(QeCurve((630, 0.9), (640, 1.0))(700)) == 1.0
        assert np.all(np.diff(QE(np.linspace(600, 720, 50))) < 0)

    @pytest.mark.parametrize("center", [630.0, 655.0, 680.0])
    def test_matches_fine_quadrature(self, center):
        s = sensor_at(648.0, amp=0.6, baseline=0.05)
        band = FilterBand(center, 12.0, 0.9)
        ref = fine_reading(s, band, QE.lo, QE.hi, 0.15)
        assert abs(simulate_reading(s, band, QE, 0.15).intensity - ref) < 1e-4

    def test_exposure_is_linear(self):
        s = sensor_at(660.0)
        a = simulate_reading(s, FilterBand(660.0), exposure=0.05).intensity
        b = simulate_reading(s, FilterBand(660.0), exposure=0.10).intensity
        assert math.isclose(b, 2 * a, rel_tol=1e-12)

    def test_saturation_flag(self):
        r = simulate_reading(sensor_at(655.0, amp=1.0), FilterBand(655.0), exposure=5.0)
        assert r.intensity == 1.0 and r.saturated

    def test_negative_noise_clips_without_flag(self):
        dead = sensor_at(655.0, amp=0.0)
        rs = [simulate_reading(dead, FilterBand(655.0), noise_sd=0.5, seed=k) for k in range(20)]
        assert any(x.intensity == 0.0 for x in rs)
        assert all(0.0 <= x.intensity <= 1.0 for x in rs)
        assert not any(x.saturated for x in rs if x.intensity == 0.0)

    def test_bad_exposure(self):
        with pytest.raises(ValidationError):
            simulate_reading(sensor_at(655.0), FilterBand(655.0), exposure=0.0)

    def test_red_sensor_beats_gray_card(self):
        red = sweep(sensor_at(655.0)).intensities
        gray = sweep(sensor_at(655.0, amp=0.0, baseline=0.3)).intensities
        # normalise to total signal: the sensor is concentrated near its peak
        assert (red[2] + red[3]) / red.sum() > (gray[2] + gray[3]) / gray.sum()


class TestSweep:
    def test_peak_bands_dominate(self):
        s = sweep(sensor_at(655.0))
        top2 = sorted(np.argsort(s.intensities)[-2:])
        assert [PAPER_WHEEL[i].center for i in top2] == [650.0, 660.0]

    def test_deterministic(self):
        a = sweep(sensor_at(648.0), noise_sd=0.01, seed=9)
        b = sweep(sensor_at(648.0), noise_sd=0.01, seed=9)
        assert a.intensities.tobytes() == b.intensities.tobytes()

    def test_needs_six_bands(self):
        with pytest.raises(ValidationError):
            sweep(sensor_at(655.0), wheel=PAPER_WHEEL[:5])


class TestEstimate:
    def test_symmetric_readings_centered(self):
        peak, amp = estimate_peak(sweep(sensor_at(655.0)).readings)
        assert abs(peak - 655.0) < 1e-6 and abs(amp - 0.8) < 1e-6

    def test_off_grid_peak(self):
        peak, _ = estimate_peak(sweep(sensor_at(663.0)).readings)
        assert abs(peak - 663.0) < 0.5

    @pytest.mark.parametrize("peak", [635.0, 642.7, 671.3, 675.0])
    def test_noiseless_recovery(self, peak):
        est, amp = estimate_peak(sweep(sensor_at(peak, amp=0.55)).readings)
        assert abs(est - peak) < 1e-6 and abs(amp - 0.55) < 1e-6

    def test_all_dark(self):
        readings = [Reading(b, 0.0, False) for b in PAPER_WHEEL]
        with pytest.raises(InsufficientSignal):
            estimate_peak(readings)

    def test_saturated(self):
        readings = [Reading(b, 1.0, True) for b in PAPER_WHEEL]
        with pytest.raises(SaturatedSweep):
            estimate_peak(readings)

    def test_noise_mostly_within_5nm(self):
        rng = np.random.default_rng(31)
        errs = []
        for k in range(200):
            p = rng.uniform(635, 675)
            est, _ = estimate_peak(sweep(sensor_at(p), noise_sd=0.01, seed=k).readings)
            errs.append(abs(est - p))
        assert np.mean(np.array(errs) < 5.0) >= 0.95


class TestState:
    def test_amplitude_round_trip(self):
        enc = StateEncoding()
        peak, amp = enc.encode(0.7)
        sw = interrogate(sensor_at(peak, amp=amp), enc)
        assert abs(sw.state_score - 0.7) < 0.02

    def test_shift_midpoint(self):
        peak, amp = SHIFT.encode(0.5)
        assert peak == 655.0
        assert abs(interrogate(sensor_at(peak, amp=amp), SHIFT).state_score - 0.5) < 1e-6

    def test_endpoints_and_clamp(self):
        enc = StateEncoding()
        assert state_score(655.0, 0.2, enc) == 0.0
        assert state_score(655.0, 1.0, enc) == 1.0
        assert state_score(655.0, 1.3, enc) == 1.0
        assert state_score(700.0, 0.8, SHIFT) == 1.0
