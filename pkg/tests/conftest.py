import sys

import numpy as np
import pytest

from sybilfilter.graph import LabelSet, from_edge_list


def random_connected(n, extra, rng):
    """Random spanning tree plus ``extra`` random chords."""
    parent = [int(rng.integers(i)) for i in range(1, n)]
    pairs = [(i, p) for i, p in zip(range(1, n), parent)]
    pairs += [tuple(rng.choice(n, 2, replace=False)) for _ in range(extra)]
    return from_edge_list(pairs, n)


def random_tree(n, rng):
    return random_connected(n, 0, rng)


def random_labels(n, rng, frac=0.1):
    k = max(1, int(frac * n))
    pick = rng.choice(n, 2 * k, replace=False)
    return LabelSet(pick[:k], pick[k:])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
