import numpy as np
import pytest

from tlpsynth import NicWorkloadConfig, TraceImage, make_corpus

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20241014)


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary."""

    def record(number, name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {name}" +
                                (f" ({detail})" if detail else ""))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def random_image(rng, width, density=1.0):
    """Arbitrary RGB8 raster; ``density`` is the fraction of non-black pixels."""
    px = rng.integers(0, 256, size=(width, width, 3)).astype(np.uint8)
    if density < 1.0:
        px[rng.random((width, width)) >= density] = 0
    return TraceImage(px)


@pytest.fixture(scope="session")
def nic_corpus_128():
    return make_corpus(NicWorkloadConfig(seed=1000, n_transfers=1000), 64, 128)
