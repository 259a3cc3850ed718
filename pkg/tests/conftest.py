import numpy as np
import pytest

from ovrkit.data import SparseDataset


def random_binary_dataset(seed, n=40, d=5, frac_pos=0.3, n_labels=1):
    """Gaussian features, one noisy linear label; used across solver tests."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    w_true = rng.normal(size=d)
    scores = X @ w_true + 0.3 * rng.normal(size=n)
    cut = np.quantile(scores, 1 - frac_pos)
    rows = [[(j, float(X[i, j])) for j in range(d)] for i in range(n)]
    labels = [(0,) if scores[i] > cut else () for i in range(n)]
    return SparseDataset(n, d, n_labels, rows, labels)


def imbalanced_separable_dataset(n_pos=8, n_neg=40, pos_x=2.0, neg_x=1.0):
    """Rare positives whose decision values end up ranked above the negatives
    but below zero under plain C=1 training."""
    rows = [[(0, pos_x)]] * n_pos + [[(0, neg_x)]] * n_neg
    labels = [(0,)] * n_pos + [()] * n_neg
    return SparseDataset(n_pos + n_neg, 1, 1, rows, labels)


def overlap_imbalanced_dataset(n_pos=6, n_neg_same=12, n_neg_zero=42):
    """Positives share their feature value with twice as many negatives, so no
    unweighted model predicts positives at any C; reweighting (t < 1) can."""
    rows = [[(0, 1.0)]] * (n_pos + n_neg_same) + [[] for _ in range(n_neg_zero)]
    labels = [(0,)] * n_pos + [()] * (n_neg_same + n_neg_zero)
    return SparseDataset(n_pos + n_neg_same + n_neg_zero, 1, 1, rows, labels)


@pytest.fixture
def toy_two_label():
    """6 instances, 2 features, 2 labels; label 1 has no positives."""
    rows = [
        [(0, 1.0)], [(0, 2.0), (1, -1.0)], [(1, 1.0)],
        [(0, -1.0)], [(0, -2.0), (1, 0.5)], [],
    ]
    labels = [(0,), (0,), (0,), (), (), ()]
    return SparseDataset(6, 2, 2, rows, labels)
