import pytest

from mfkd.harness.benchmark import generate_synthetic
from mfkd.harness.compare import compare_methods
from mfkd.search import SearchConfig
from mfkd.space import SpaceSpec

DESK_SPEC = SpaceSpec(3, 10)
DESK_CONFIG = SearchConfig()
# warm-up (n1 low at 1 s + n2 high at 12 s) plus 25 high-fidelity UCB evaluations
DESK_BUDGET = DESK_CONFIG.n1 * 1.0 + DESK_CONFIG.n2 * 12.0 + 25 * 12.0
DESK_RUNS = 100

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.passed and report.when != "call"):
        return
    state = "SKIP" if report.skipped else "FAIL" if report.failed else "PASS"
    # a criterion may span several tests: any failure wins, then any skip
    rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
    prev_state, names = _ACCEPTANCE.get(marker.args[0], ("PASS", []))
    if item.name not in names:
        names = names + [item.name]
    _ACCEPTANCE[marker.args[0]] = (max(prev_state, state, key=rank.get), names)


@pytest.fixture(scope="session")
def desk_bench():
    return generate_synthetic(DESK_SPEC, 0.47, rng=2024, cost_model=(1.0, 12.0), logistic_tau=0.17)


@pytest.fixture(scope="session")
def desk_report(desk_bench):
    """Four-method, 100-run comparison shared by the directional checks."""
    return compare_methods(desk_bench, ["mfkd", "mf-no-kd", "gpr", "random"], DESK_RUNS,
                           DESK_BUDGET, rng=0, config=DESK_CONFIG)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        state, names = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {state}  ({', '.join(names)})")
