import math

import numpy as np
import pytest

from leafscope.errors import IoError, NonPositiveDistance, ParseError, ValidationError
from leafscope.focus import (
    FocusCalibration,
    defocus_error,
    focus_command,
    load_calibration,
    required_power,
    save_calibration,
    track_focus,
)

IDEAL = FocusCalibration.ideal()


class TestRequiredPower:
    @pytest.mark.parametrize("d,p", [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0), (5.0, 0.2)])
    def test_ideal_law_at_samples(self, d, p):
        assert math.isclose(required_power(IDEAL, d), p, abs_tol=1e-15)

    def test_power_at_infinity_offset(self):
        cal = FocusCalibration.ideal(power_at_infinity=-0.4)
        assert math.isclose(required_power(cal, 2.0), 0.1, abs_tol=1e-15)

    def test_exact_at_every_sample(self):
        cal = FocusCalibration([0.4, 0.9, 1.7, 3.0, 6.0], [2.7, 1.3, 0.6, 0.2, -0.1])
        for d, p in zip(cal.distances, cal.powers):
            assert required_power(cal, d) == p

    def test_bracketed_by_neighbours(self):
        cal = FocusCalibration([0.4, 0.9, 1.7, 3.0, 6.0], [2.7, 1.3, 0.6, 0.2, -0.1])
        rng = np.random.default_rng(21)
        for d in rng.uniform(0.4, 6.0, 1000):
            k = int(np.searchsorted(cal.distances, d))
            k = min(max(k, 1), len(cal.distances) - 1)
            p = required_power(cal, d)
            assert cal.powers[k] - 1e-12 <= p <= cal.powers[k - 1] + 1e-12

    def test_ideal_law_between_samples(self):
        for d in np.linspace(0.8, 5.0, 400):
            assert abs(required_power(IDEAL, d) - 1.0 / d) < 1e-3

    def test_monotone_everywhere(self):
        d = np.geomspace(1e-3, 1e3, 5000)
        p = np.array([required_power(IDEAL, x) for x in d])
        assert np.all(np.diff(p) <= 0)
        lo, hi = IDEAL.power_limits
        assert p.min() >= lo and p.max() <= hi

    def test_strict_inside_table(self):
        d = np.linspace(0.5, 5.0, 999)
        p = np.array([required_power(IDEAL, x) for x in d])
        assert np.all(np.diff(p) < 0)

    def test_clamped_near_lens(self):
        assert required_power(IDEAL, 0.1) == IDEAL.power_limits[1]

    @pytest.mark.parametrize("d", [0.0, -1.0, float("nan")])
    def test_non_positive_distance(self, d):
        with pytest.raises(NonPositiveDistance):
            required_power(IDEAL, d)


class TestDefocus:
    def test_zero_when_matched(self):
        for d in (0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0):
            assert defocus_error(IDEAL, required_power(IDEAL, d), d) <= 1e-12

    def test_half_diopter_misset(self):
        # focused for 2 m, target actually at 1 m
        assert math.isclose(defocus_error(IDEAL, required_power(IDEAL, 2.0), 1.0), 0.5, abs_tol=1e-12)

    def test_command_tolerance(self):
        cmd = focus_command(IDEAL, 1.25, tolerance=0.1)
        assert cmd.in_focus(0.75) and not cmd.in_focus(0.65)


class TestTrack:
    def test_constant_stream(self):
        cmds = track_focus(IDEAL, [1.3] * 5)
        assert len({c.power for c in cmds}) == 1

    def test_receding_target(self):
        cmds = track_focus(IDEAL, np.linspace(0.6, 4.5, 40))
        assert np.all(np.diff([c.power for c in cmds]) < 0)

    def test_empty(self):
        assert track_focus(IDEAL, []) == []

    def test_bad_sample_index(self):
        with pytest.raises(NonPositiveDistance) as exc:
            track_focus(IDEAL, [1.0, 1.2, 0.0, 1.5])
        assert exc.value.index == 2


class TestCalibrationTable:
    def test_rejects_non_monotone(self):
        with pytest.raises(ValidationError):
            FocusCalibration([0.5, 1.0, 5.0], [2.0, 2.1, 0.2])

    def test_rejects_short_span(self):
        with pytest.raises(ValidationError, match="span"):
            FocusCalibration([0.5, 1.0, 4.0], [2.0, 1.0, 0.25])

    def test_rejects_out_of_limits(self):
        with pytest.raises(ValidationError):
            FocusCalibration([0.3, 1.0, 5.0], [3.3, 1.0, 0.2])

    def test_round_trip(self, tmp_path):
        p = tmp_path / "cal.csv"
        save_calibration(IDEAL, p)
        again = load_calibration(p)
        np.testing.assert_array_equal(again.distances, IDEAL.distances)
        np.testing.assert_array_equal(again.powers, IDEAL.powers)

    def test_whitespace_and_comments(self, tmp_path):
        p = tmp_path / "cal.txt"
        p.write_text("# measured on the bench\n0.5 2.0\n\n1.0\t1.0  # mid\n5.0 0.2\n")
        cal = load_calibration(p)
        assert cal.distances.tolist() == [0.5, 1.0, 5.0]

    def test_bad_row_reports_line(self, tmp_path):
        p = tmp_path / "cal.csv"
        p.write_text("0.5, 2.0\n1.0, one\n5.0, 0.2\n")
        with pytest.raises(ParseError) as exc:
            load_calibration(p)
        assert exc.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_calibration(tmp_path / "nope.csv")
