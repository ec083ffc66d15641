import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tonerec import kernels  # noqa: E402

BACKENDS = sorted(kernels.available_backends())

CRITERIA = {
    1: "CTC loss equals exhaustive path enumeration",
    2: "CTC logit gradients equal finite differences",
    3: "layer and full-model gradients equal finite differences",
    4: "fast cepstrum equals naive DFT/IDFT",
    5: "cepstral peak recovers impulse-train pitch",
    6: "alignment equals brute-force recursion",
    7: "beam width 1 equals greedy; exhaustive beam finds MAP",
    8: "desk-scale training reaches TER <= 20% and beats the ablation",
    9: "overfit smoke test",
    10: "training is bitwise deterministic",
    11: "first epoch is ordered by length",
    12: "learning-rate halving trace",
}

_outcomes = {}


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.available_backends()[request.param])
    return request.param


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _outcomes.get(crit, "PASS")
        now = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _outcomes[crit] = "FAIL" if "FAIL" in (prev, now) else now


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status = _outcomes.get(n, "NOT RUN")
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {CRITERIA[n]}")
