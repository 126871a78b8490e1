"""Stratified splitting and SMOTE class balancing for feature sets."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientData
from .features import FeatureSet


def split_indices(labels: np.ndarray, train_frac: float = 0.8,
                  seed: int = 0):
    """Deterministic stratified split of row indices."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise InsufficientData("both classes must be present to split")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 29])))
    train_idx, test_idx = [], []
    for c in classes:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        n_train = round(train_frac * len(members))
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return train, test


def take(fs: FeatureSet, idx: np.ndarray) -> FeatureSet:
    return FeatureSet(X=fs.X[idx], y=fs.y[idx],
                      attack_kinds=[fs.attack_kinds[i] for i in idx],
                      synthetic=fs.synthetic[idx])


def split_features(fs: FeatureSet, train_frac: float = 0.8, seed: int = 0):
    """Stratified (train, test) split; SMOTE, when wanted, applies to the
    train side only so the test side never contains synthetic rows."""
    train_idx, test_idx = split_indices(fs.y, train_frac, seed)
    return take(fs, train_idx), take(fs, test_idx)


def smote(fs: FeatureSet, k: int = 5, seed: int = 0) -> FeatureSet:
    """Oversample the minority class to parity by convex interpolation
    between each base point and one of its k nearest minority neighbors.
    Synthetic rows are flagged and inherit the base point's attack tag."""
    y = fs.y
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise InsufficientData("need two classes to balance")
    minority = classes[np.argmin(counts)]
    n_min, n_maj = counts.min(), counts.max()
    if n_min == n_maj:
        return fs
    if n_min < k + 1:
        raise InsufficientData(
            f"minority class has {n_min} samples, need at least {k + 1}")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 31])))
    min_idx = np.flatnonzero(y == minority)
    Xm = fs.X[min_idx]
    # brute-force k nearest neighbors within the minority class
    d2 = ((Xm[:, None, :] - Xm[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
    n_extra = n_maj - n_min
    base_order = rng.permutation(n_min)
    bases = np.resize(base_order, n_extra)
    picks = rng.integers(0, k, size=n_extra)
    u = rng.random(n_extra)
    base_pts = Xm[bases]
    neigh_pts = Xm[neighbors[bases, picks]]
    synth_X = base_pts + u[:, None] * (neigh_pts - base_pts)
    synth_y = np.full(n_extra, minority, dtype=fs.y.dtype)
    synth_kinds = [fs.attack_kinds[min_idx[b]] for b in bases]
    return FeatureSet(
        X=np.vstack([fs.X, synth_X]),
        y=np.concatenate([fs.y, synth_y]),
        attack_kinds=list(fs.attack_kinds) + synth_kinds,
        synthetic=np.concatenate([fs.synthetic,
                                  np.ones(n_extra, dtype=bool)]))
