import numpy as np
import pytest

_criteria = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running experiment (minutes)")
    config.stash[_criteria] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def criterion(pytestconfig):
    """``criterion(number, part, ok, detail)`` files one check for the acceptance summary."""
    results = pytestconfig.stash[_criteria]

    def record(number: int, part: str, ok: bool, detail: str) -> bool:
        results.setdefault(number, []).append((part, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_criteria, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        parts = results[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{part}: {'ok' if ok else 'FAIL'} ({d})" for part, ok, d in parts)
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {detail}")
