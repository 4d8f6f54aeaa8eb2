import time

import pytest

from gradlens.experiments import config_from_dict, exp_boundary_tilting


@pytest.fixture(scope="session")
def toy_pipeline(tmp_path_factory):
    """The boundary-tilting experiment on three seeds, shared by several modules."""
    out = tmp_path_factory.mktemp("toy")
    cfg = config_from_dict({"experiment": "boundary-tilting", "seeds": [0, 1, 2], "out": str(out)})
    start = time.perf_counter()
    result = exp_boundary_tilting(cfg)
    result["elapsed"] = time.perf_counter() - start
    result["out"] = out
    return result


_ACCEPTANCE = pytest.StashKey()
N_CRITERIA = 11


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """``acceptance(n, ok, detail)`` records the verdict for criterion n and asserts it."""
    results = request.config.stash[_ACCEPTANCE]

    def record(n, ok, detail):
        results[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  (not evaluated)")
