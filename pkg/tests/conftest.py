import numpy as np
import pytest

from napgnn.graph import UNLABELED, Graph

ACCEPTANCE_LINES = []


def make_graph(n, edges, features=None, labels=None, num_classes=None):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if features is None:
        features = np.ones((n, 1))
    if labels is None:
        labels = np.full(n, UNLABELED)
        num_classes = 1
    labels = np.asarray(labels)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return Graph(n=n, edges=edges, features=np.asarray(features, dtype=float), labels=labels,
                 num_classes=num_classes)


@pytest.fixture
def path3():
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def star3():
    return make_graph(4, [(0, 1), (0, 2), (0, 3)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
