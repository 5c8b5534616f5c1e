"""Shared fixtures and the acceptance-criterion report."""

from __future__ import annotations

import numpy as np
import pytest

from repflow.fields import SymmetricMatrixField
from repflow.lattice import build_domain

# criterion number -> (title, list of outcomes, notes)
CRITERIA: dict[int, dict] = {}


def criterion(number: int, title: str):
    """Mark a test as (part of) acceptance criterion ``number``."""
    CRITERIA.setdefault(number, {"title": title, "outcomes": [], "notes": []})
    return pytest.mark.criterion(number)


def note(number: int, text: str) -> None:
    """Attach a measured value to the criterion's report line."""
    CRITERIA[number]["notes"].append(text)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        CRITERIA[n]["outcomes"].append("skipped" if rep.skipped else ("passed" if rep.passed else "failed"))


def pytest_terminal_summary(terminalreporter):
    ran = {n: c for n, c in CRITERIA.items() if c["outcomes"]}
    if not ran:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ran):
        c = ran[n]
        if "failed" in c["outcomes"]:
            status = "FAIL"
        elif all(o == "skipped" for o in c["outcomes"]):
            status = "SKIP"
        else:
            status = "PASS"
        extra = f"  [{'; '.join(c['notes'])}]" if c["notes"] else ""
        tr.write_line(f"{status}  criterion {n:2d}: {c['title']}{extra}")


# ---------------------------------------------------------------------------
# Fixtures


def smooth_field(n: int, m: int = 2, l: int = 3, seed: int = 0, period: float = 1.0,
                 offset: float = 2.0) -> SymmetricMatrixField:
    """Trigonometric symmetric field with a well separated spectrum."""
    dom = build_domain(m, n, period)
    rng = np.random.default_rng(seed)
    x = np.stack(np.meshgrid(*([dom.axis_coords()] * m), indexing="ij"), -1)
    data = np.zeros(dom.shape + (l, l))
    for a in range(l):
        for b in range(a, l):
            k = rng.integers(-2, 3, size=m)
            ph = rng.uniform(0, 2 * np.pi)
            data[..., a, b] += 0.5 * np.cos(2 * np.pi / period * (x @ k) + ph)
            data[..., b, a] = data[..., a, b]
    data += np.diag(np.linspace(-offset, offset, l))
    return SymmetricMatrixField(dom, data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
