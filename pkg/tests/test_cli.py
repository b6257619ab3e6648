import pytest

from leafscope.cli import main
from leafscope.focus import FocusCalibration, save_calibration
from leafscope.scene import PlantSensor, SceneDescription, save_scene


@pytest.fixture
def scene_file(tmp_path):
    p = tmp_path / "scene.yaml"
    save_scene(SceneDescription(sensors=(PlantSensor(position=(1.5, 0, 0)),), rng_seed=3), p)
    return p


def test_simulate(scene_file, tmp_path, capsys):
    out = tmp_path / "frame.csv"
    assert main(["simulate", "--scene", str(scene_file), "--out", str(out)]) == 0
    assert out.read_text().startswith("x,y,z")
    assert "returns" in capsys.readouterr().out


def test_detect(scene_file, tmp_path, capsys):
    out = tmp_path / "clusters.csv"
    assert main(["detect", "--scene", str(scene_file), "--seed", "1", "--csv", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].endswith("true")
    assert "valid=true" in capsys.readouterr().out


def test_steer(capsys):
    assert main(["steer", "--target", "1.55", "0", "0.12"]) == 0
    out = capsys.readouterr().out
    assert "pitch=0.000000" in out and "in_envelope=true" in out


def test_steer_outside(capsys):
    assert main(["steer", "--target", "-0.2", "1.5", "0.12"]) == 0
    assert "in_envelope=false" in capsys.readouterr().out


def test_focus(tmp_path, capsys):
    assert main(["focus", "--distance", "1", "2"]) == 0
    assert capsys.readouterr().out.splitlines() == ["1 m -> 1.000000 D", "2 m -> 0.500000 D"]
    cal = tmp_path / "cal.csv"
    save_calibration(FocusCalibration.ideal(0.25), cal)
    assert main(["focus", "--distance", "2", "--calibration", str(cal), "--power-at-infinity", "0.25"]) == 0
    assert "0.750000 D" in capsys.readouterr().out


def test_interrogate(scene_file, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["interrogate", "--scene", str(scene_file), "--sensor-id", "0", "--csv", str(out)]) == 0
    text = capsys.readouterr().out
    assert "estimated_peak=655.000" in text
    assert out.read_text().splitlines()[0] == "band_nm,intensity,saturated"


def test_interrogate_bad_id(scene_file):
    assert main(["interrogate", "--scene", str(scene_file), "--sensor-id", "4"]) == 2


def test_run(scene_file, tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("scene: scene.yaml\nseed: 0\n")
    out = tmp_path / "report.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 2
    assert "target 0" in capsys.readouterr().out


def test_bad_scene_exit_code(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text("sensors:\n  - position: [1, 0\n")
    assert main(["simulate", "--scene", str(p), "--out", str(tmp_path / "f.csv")]) == 2


def test_unwritable_output_exit_code(scene_file, tmp_path):
    assert main(["simulate", "--scene", str(scene_file), "--out", str(tmp_path / "no" / "dir" / "f.csv")]) == 3


def test_missing_config_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2
