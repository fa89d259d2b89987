import math
import time

import pytest

from nrdicke import ModelParams

PHI_SYM = 2 * math.pi / 3


@pytest.fixture
def base():
    """Standard cavity and spin constants with the damping used for dynamics."""
    return ModelParams.homogeneous(phi=PHI_SYM, gamma=0.05)


@pytest.fixture
def report(request, capsys):
    """Print one PASS/FAIL line for an acceptance criterion, bypassing capture."""
    t0 = time.perf_counter()
    lines = []

    def emit(name: str, ok: bool, detail: str = "") -> bool:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name} ({time.perf_counter() - t0:.1f} s) {detail}".rstrip())
        with capsys.disabled():
            print("\n" + lines[-1])
        return ok

    return emit
