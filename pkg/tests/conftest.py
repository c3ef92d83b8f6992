from __future__ import annotations

import numpy as np
import pytest

from mkvorder.model import InitialLaw, MKVModel, linear_drift, preset_lookup


def make_model(sigma=("scaled-linear", [0.1]), theta=("scaled-linear", [0.2]), init_x=("point", (0.0,)),
               init_y=("two-point", (-1.0, 1.0)), drift=None):
    s = preset_lookup(*sigma)
    t = preset_lookup(*theta)
    return MKVModel(drift or linear_drift(), s, t, InitialLaw(*init_x), InitialLaw(*init_y))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scaled_linear_pair():
    return make_model()


CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(k: int, ok: bool, detail: str = "") -> None:
    CRITERIA[k] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
