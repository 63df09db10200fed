import numpy as np
import pytest

from skatetrick.segmenter import sample_windows
from skatetrick.synthgen import DEFAULT_COUNTS, generate_dataset, load_library


@pytest.fixture(scope="session")
def library():
    return load_library()


@pytest.fixture(scope="session")
def small_dataset(library):
    counts = {c: 4 for c in DEFAULT_COUNTS}
    return generate_dataset(library, counts, seed=5)


@pytest.fixture(scope="session")
def default_dataset(library):
    return generate_dataset(library, DEFAULT_COUNTS, seed=0)


@pytest.fixture(scope="session")
def default_windows(default_dataset):
    return {s.id: sample_windows(s) for s in default_dataset.samples}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one acceptance verdict; the summary is printed at the end of the run."""
    log = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(cid, ok, detail):
        log[cid] = (bool(ok), detail)
        assert ok, f"{cid}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(log, key=lambda c: int(c[1:])):
        ok, detail = log[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
