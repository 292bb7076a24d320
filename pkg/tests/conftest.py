import random

import numpy as np
import pytest

from aliveness.features import FeatureMatrix
from aliveness.graph import Graph

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def random_small_graph(rng: random.Random, max_nodes: int = 8):
    n = rng.randint(1, max_nodes)
    p = rng.choice((0.2, 0.35, 0.5, 0.7))
    nodes = list(range(n))
    edges = {frozenset((u, v)) for u in nodes for v in nodes if u < v and rng.random() < p}
    return nodes, edges, Graph([tuple(e) for e in edges], nodes=nodes)


def matrix(values, labels, columns=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    columns = columns or [f"f{i}" for i in range(values.shape[1])]
    return FeatureMatrix([f"n{i}" for i in range(len(values))], list(columns), values, labels)


@pytest.fixture
def small_graphs():
    rng = random.Random(20240601)
    return [random_small_graph(rng) for _ in range(220)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
