"""Shared Iris loading for the experiment scripts."""
import numpy as np

from hyperbox.core import Dataset
from hyperbox.harness import scaler_fit
from hyperbox.model_io import read_csv


def load_iris_dataset(path=None, label="species"):
    """Normalised Iris as a :class:`Dataset`, from a CSV if given, else from scikit-learn."""
    if path:
        data, _ = read_csv(path, label)
        X, y = data.lower, data.labels
    else:
        from sklearn.datasets import load_iris

        X, y = load_iris(return_X_y=True)
        y = y + 1
    return Dataset.from_points(scaler_fit(X).transform(X), np.asarray(y))
