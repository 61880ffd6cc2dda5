from __future__ import annotations

import time

import numpy as np
import pytest

_SUITE_LIMIT_SECONDS = 60.0


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)


def pytest_sessionstart(session):
    session.config._suite_started = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    started = getattr(session.config, "_suite_started", None)
    if started is None:
        return
    elapsed = time.perf_counter() - started
    status = "PASS" if elapsed < _SUITE_LIMIT_SECONDS else "FAIL"
    print(
        f"\n[acceptance] full-primary-suite-runtime: {status} "
        f"({elapsed:.1f}s, limit {_SUITE_LIMIT_SECONDS:.0f}s)"
    )
