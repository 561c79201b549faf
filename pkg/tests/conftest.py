"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import pytest

from tbond.generators import PRESETS, gen_cross_example, gen_cubic, gen_infinite_type, gen_punctured_grid

ACCEPTANCE: dict[str, list[tuple[str, str]]] = {}


@pytest.fixture(scope="session")
def z2():
    return gen_cubic(2, 7)


@pytest.fixture(scope="session")
def z3():
    return gen_cubic(3, 5)


@pytest.fixture(scope="session")
def cross():
    return gen_cross_example(8)


@pytest.fixture(scope="session")
def punctured():
    return gen_punctured_grid(10)


@pytest.fixture(scope="session")
def infinite_small():
    return gen_infinite_type(PRESETS["paper-default"].with_truncation(120))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, value in report.user_properties:
        if name == "criterion":
            ACCEPTANCE.setdefault(value, []).append((report.nodeid, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c[2:])):
        runs = ACCEPTANCE[crit]
        ok = all(outcome == "passed" for _, outcome in runs)
        failed = [nodeid.split("::")[-1] for nodeid, outcome in runs if outcome != "passed"]
        line = f"{crit}: {'PASS' if ok else 'FAIL'} ({len(runs) - len(failed)}/{len(runs)} checks)"
        if failed:
            line += " failing: " + ", ".join(failed)
        terminalreporter.write_line(line)
