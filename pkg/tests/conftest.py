import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def criterion(request):
    """``criterion(n, ok, detail)`` logs one acceptance sub-result and prints it."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def record(n: int, ok: bool, detail: str) -> bool:
        results.setdefault(n, []).append((bool(ok), detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        parts = results[n]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  " + "; ".join(d for _, d in parts))
