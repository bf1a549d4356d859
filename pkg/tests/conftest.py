import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from blockdict.core import BlockStructure, normalize_columns

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dictionary(rng, N, K):
    return normalize_columns(rng.standard_normal((N, K)))


def random_structure(rng, K, s):
    """Random partition of ``K`` atoms into blocks of 1..s atoms, shuffled labels."""
    sizes = []
    while sum(sizes) < K:
        sizes.append(int(min(rng.integers(1, s + 1), K - sum(sizes))))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    rng.shuffle(labels)
    return BlockStructure(tuple(labels.tolist()), s)


def block_sparse_codes(rng, d, k, L):
    blocks = d.blocks()
    Theta = np.zeros((d.n_atoms, L))
    for i in range(L):
        for b in rng.choice(len(blocks), size=min(k, len(blocks)), replace=False):
            idx = blocks[b][1]
            Theta[idx, i] = rng.uniform(-1, 1, len(idx))
    return Theta


ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> bool:
    """Record and print one acceptance verdict line."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
