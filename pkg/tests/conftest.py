import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neuragen.audio_io import AudioClip  # noqa: E402

SR = 16000

_criteria = {}


def pytest_runtest_logreport(report):
    marker = _criterion_of.get(report.nodeid)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        prev = _criteria.get(marker, "PASS")
        order = ["PASS", "SKIP", "FAIL"]
        _criteria[marker] = max(prev, status, key=order.index)


_criterion_of = {}
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _criterion_of[item.nodeid] = m.args[0]
            doc = (item.function.__doc__ or "").strip().splitlines()
            if doc:
                _titles.setdefault(m.args[0], doc[0].rstrip("."))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n}: {_criteria[n]}  {_titles.get(n, '')}".rstrip())


def tone(freq, seconds=1.0, amp=0.8, phase=0.0, sr=SR):
    t = np.arange(int(seconds * sr)) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


@pytest.fixture
def clip_of():
    def make(x, sr=SR, source_id="test"):
        return AudioClip(np.asarray(x, dtype=np.float64), sr, source_id)

    return make
