import numpy as np
import pytest

from convmix.sampling import make_rng
from convmix.synth import utterance_durations
from convmix.timeline import UtterancePool, UtteranceRecord


def make_pool(n_speakers=20, per_speaker=50, mean=3.0, shape="lognormal", seed=1, rate=8000):
    rng = make_rng(seed)
    recs = []
    for s in range(n_speakers):
        for k, d in enumerate(utterance_durations(rng, per_speaker, mean, 0.3, 10.0, rate, shape)):
            recs.append(UtteranceRecord(f"s{s:02d}-{k:03d}", f"s{s:02d}", float(d)))
    return UtterancePool.from_records(recs)


@pytest.fixture(scope="session")
def pool():
    return make_pool()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Context manager recording one acceptance line with its runtime budget."""
    import contextlib
    import time

    @contextlib.contextmanager
    def run(number, title, budget):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            dt = time.perf_counter() - t0
            ok = ok and dt < budget
            line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({dt:.1f} s, budget {budget:g} s)"
            request.config._acceptance_lines.append(line)
            print(line)
        assert dt < budget, f"runtime {dt:.1f} s over budget {budget} s"

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
