"""Shared fixtures: generated recordings are expensive, so build once per session."""

from __future__ import annotations

import dataclasses
import sys

import pytest

from strap.benchmarks import benchmark_script, noisy_prediction_script, rare_fault_script
from strap.recording import align_recording
from strap.schema import default_registry
from strap.synth import generate_recording


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def benchmark_recording():
    return generate_recording(benchmark_script(), seed=0)


@pytest.fixture(scope="session")
def benchmark_clean_recording():
    script = dataclasses.replace(benchmark_script(), glitch_rate=0.0)
    return generate_recording(script, seed=0)


@pytest.fixture(scope="session")
def noisy_recording():
    return generate_recording(noisy_prediction_script(), seed=0)


@pytest.fixture(scope="session")
def rare_recording():
    return generate_recording(rare_fault_script(), seed=0)


@pytest.fixture(scope="session")
def benchmark_aligned(benchmark_recording):
    return align_recording(benchmark_recording)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance checklist after the run, outside output capture."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok in sorted(results):
        terminalreporter.write_line(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {desc}")
