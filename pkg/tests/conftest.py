import numpy as np
import pytest

from fbshape.geometry import StarDomain, random_star_domain

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "passed": True, "ran": False, "details": []})
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["ran"] = True
        if rep.outcome != "passed":
            entry["passed"] = False
        entry["details"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = ("PASS" if e["passed"] else "FAIL") if e["ran"] else "NOT RUN"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {n:2d} {status}: {e['title']}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def unit_disk():
    return StarDomain.circle(1.0)


def random_domains(count: int, seed: int) -> list[StarDomain]:
    rng = np.random.default_rng(seed)
    return [random_star_domain(rng) for _ in range(count)]
