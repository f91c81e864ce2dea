"""Shared fixtures and independent oracles for the test suite.

The oracles here recompute everything from scratch (full-vector arithmetic,
no incremental shortcuts) so the fast paths in the package are checked
against a second, independent route.
"""

import numpy as np
import pytest

from cackit.dataset import LabeledDataset

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


# --- tolerance helpers -----------------------------------------------------

def rel_err(a, b) -> float:
    """|a - b| scaled by max(1, |a|, |b|); relative for large values,
    absolute for small ones."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float((np.abs(a - b) / denom).max())


# --- from-scratch cluster score oracle --------------------------------------

def cluster_score_oracle(points: np.ndarray, labels: np.ndarray, alpha: float) -> float:
    """SSE minus alpha * n * squared class-centroid gap, recomputed directly.

    Empty input scores 0; a one-class cluster has no separation term.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    if n == 0:
        return 0.0
    mu = points.mean(axis=0)
    sse = float(((points - mu) ** 2).sum())
    pos = points[labels == 1]
    neg = points[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return sse
    gap = pos.mean(axis=0) - neg.mean(axis=0)
    return sse - alpha * n * float(gap @ gap)


def total_score_oracle(features, labels, assignments, k: int, alpha: float) -> float:
    return sum(
        cluster_score_oracle(features[assignments == j], labels[assignments == j], alpha)
        for j in range(k)
    )


def gamma_plus_oracle(points, labels, x, y_x, alpha: float) -> float:
    """Score change of adding (x, y_x) to the cluster, both scores from scratch."""
    before = cluster_score_oracle(points, labels, alpha)
    after = cluster_score_oracle(
        np.vstack([points, np.asarray(x, dtype=np.float64)[None, :]]),
        np.append(labels, y_x), alpha)
    return after - before


def gamma_minus_oracle(points, labels, idx: int, alpha: float) -> float:
    """Score change of dropping row idx from the cluster."""
    keep = np.arange(len(points)) != idx
    before = cluster_score_oracle(points, labels, alpha)
    after = cluster_score_oracle(points[keep], labels[keep], alpha)
    return after - before


# --- random problem instances ----------------------------------------------

def random_instance(rng: np.random.Generator, max_n=300, max_d=20, max_k=5):
    """A dataset plus an assignment where every cluster holds >= 2 of each class.

    The two-per-class floor keeps removals legal everywhere, so any
    (point, target) pair is a valid move to probe.
    """
    k = int(rng.integers(2, max_k + 1))
    d = int(rng.integers(2, max_d + 1))
    sizes = rng.integers(4, max(5, max_n // k) + 1, size=k)
    feats, labels, assign = [], [], []
    for j, nj in enumerate(sizes):
        nj = int(nj)
        n_pos = int(rng.integers(2, nj - 1))
        center = rng.normal(0.0, 3.0, size=d)
        feats.append(center + rng.normal(0.0, 1.0, size=(nj, d)))
        labels.extend([1] * n_pos + [0] * (nj - n_pos))
        assign.extend([j] * nj)
    ds = LabeledDataset.from_arrays(np.vstack(feats), np.array(labels))
    return ds, np.array(assign, dtype=np.int64), k


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def tiny_binary_ds():
    """Four points, two per class, in two well-separated pairs."""
    feats = np.array([[0.0, 0.0], [0.2, 0.0], [5.0, 5.0], [5.2, 5.0]])
    labels = np.array([0, 1, 0, 1])
    return LabeledDataset.from_arrays(feats, labels)


# --- finite differences ------------------------------------------------------

def central_difference(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a flat vector."""
    g = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        g[i] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return g
