import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from leafscope.scene import PlantSensor, SceneDescription  # noqa: E402

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance criterion's outcome, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  [{number}] {title}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[", 1)[1].split("]", 1)[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def one_sensor_scene():
    def make(distance=1.5, azimuth_deg=0.0, z=0.0, **kw):
        a = math.radians(azimuth_deg)
        pos = (distance * math.cos(a), distance * math.sin(a), z)
        return SceneDescription(sensors=(PlantSensor(position=pos, **kw),))

    return make

