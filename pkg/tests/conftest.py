import json
import math
from pathlib import Path

import pytest

from percolab import Angle, ProbabilityMatrix, ProjectionFrame, certify_A

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def baselines():
    return json.loads((FIXTURES / "baselines.json").read_text())


@pytest.fixture(scope="session")
def m2_09():
    return ProbabilityMatrix.uniform(2, 0.9)


@pytest.fixture(scope="session")
def cert_09(m2_09):
    return certify_A(m2_09, ProjectionFrame(Angle.pi_times(1, 3)))


@pytest.fixture(scope="session")
def cert_075():
    return certify_A(ProbabilityMatrix.uniform(2, 0.75), ProjectionFrame(Angle.pi_times(1, 3)))


@pytest.fixture(scope="session")
def cert_full():
    return certify_A(ProbabilityMatrix.uniform(2, 1.0), ProjectionFrame(Angle.pi_times(1, 3)))


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


# acceptance verdicts: one line per criterion, printed in the terminal summary
_VERDICTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def verdict():
    def record(n: int, ok: bool, detail: str) -> bool:
        _VERDICTS.setdefault(n, []).append((bool(ok), detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        parts = _VERDICTS[n]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  "
                                    + "; ".join(d for _, d in parts))
