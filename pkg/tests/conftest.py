import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hyperbox.core import Dataset  # noqa: E402
from hyperbox.harness import scaler_fit  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def iris_raw():
    from sklearn.datasets import load_iris

    X, y = load_iris(return_X_y=True)
    return X, y + 1


@pytest.fixture(scope="session")
def iris(iris_raw):
    X, y = iris_raw
    return Dataset.from_points(scaler_fit(X).transform(X), y)


@pytest.fixture
def four_points():
    return Dataset.from_points([[0.1, 0.1], [0.3, 0.3], [0.8, 0.8], [0.9, 0.9]], [1, 1, 2, 2])


@pytest.fixture
def iris_csv(tmp_path, iris_raw):
    X, y = iris_raw
    names = {1: "setosa", 2: "versicolor", 3: "virginica"}
    path = tmp_path / "iris.csv"
    lines = ["sepal_length,sepal_width,petal_length,petal_width,species"]
    lines += [",".join(repr(float(v)) for v in row) + "," + names[c] for row, c in zip(X, y)]
    path.write_text("\n".join(lines) + "\n")
    return path


def random_points(rng, n_samples, n_features, n_classes=3, grid=None):
    X = rng.random((n_samples, n_features))
    if grid:
        X = np.round(X * grid) / grid
    y = rng.integers(1, n_classes + 1, size=n_samples)
    return Dataset.from_points(X, y)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
