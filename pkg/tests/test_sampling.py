"""Stratified split determinism and SMOTE geometry."""

import numpy as np
import pytest

from axiguard.errors import InsufficientData
from axiguard.features import FeatureSet
from axiguard.sampling import smote, split_features, split_indices, take


def _fs(n_neg, n_pos, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n_neg, dim)),
                   rng.normal(3, 1, (n_pos, dim))])
    y = np.concatenate([np.zeros(n_neg, dtype=np.int64),
                        np.ones(n_pos, dtype=np.int64)])
    return FeatureSet(X=X, y=y, attack_kinds=[None] * (n_neg + n_pos),
                      synthetic=np.zeros(n_neg + n_pos, dtype=bool))


def test_split_sizes_paper_scale():
    labels = np.concatenate([np.zeros(16_383), np.ones(3_242)])
    train, test = split_indices(labels, 0.8, seed=42)
    assert abs(len(train) - 15_700) <= 1
    assert len(train) + len(test) == 19_625
    # stratification: class ratio preserved on both sides
    assert abs(labels[train].mean() - labels.mean()) < 0.01
    assert abs(labels[test].mean() - labels.mean()) < 0.01


def test_split_deterministic_and_disjoint():
    labels = np.array([0] * 50 + [1] * 30)
    a_train, a_test = split_indices(labels, 0.8, seed=5)
    b_train, b_test = split_indices(labels, 0.8, seed=5)
    assert np.array_equal(a_train, b_train)
    assert np.array_equal(a_test, b_test)
    assert set(a_train).isdisjoint(a_test)
    assert len(a_train) + len(a_test) == 80
    c_train, _ = split_indices(labels, 0.8, seed=6)
    assert not np.array_equal(a_train, c_train)


def test_split_single_class_rejected():
    with pytest.raises(InsufficientData):
        split_indices(np.zeros(10), 0.8, seed=0)


def test_balanced_input_unchanged():
    fs = _fs(100, 100)
    assert smote(fs, k=5, seed=0) is fs


def test_smote_balances_and_flags():
    fs = _fs(1000, 250)
    out = smote(fs, k=5, seed=0)
    assert int((out.y == 1).sum()) == 1000
    assert int((out.y == 0).sum()) == 1000
    assert int(out.synthetic.sum()) == 750
    assert not out.synthetic[:len(fs)].any()


def test_synthetic_rows_lie_on_minority_segments():
    # every synthetic point must sit on a segment between some minority
    # point and one of that point's k nearest minority neighbors
    k = 5
    fs = _fs(400, 60, dim=3, seed=2)
    out = smote(fs, k=k, seed=2)
    minority = fs.X[fs.y == 1]
    d2 = ((minority[:, None, :] - minority[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    knn = np.argsort(d2, axis=1)[:, :k]
    segments = [(a, b) for a in range(len(minority)) for b in knn[a]]
    starts = np.array([minority[a] for a, _ in segments])
    ends = np.array([minority[b] for _, b in segments])
    ab = ends - starts
    denom = (ab * ab).sum(axis=1)
    denom = np.where(denom == 0, 1.0, denom)
    for s in out.X[out.synthetic]:
        t = np.clip(((s - starts) * ab).sum(axis=1) / denom, 0.0, 1.0)
        proj = starts + t[:, None] * ab
        residual = np.linalg.norm(proj - s, axis=1).min()
        assert residual < 1e-9


def test_degenerate_identical_minority():
    fs = _fs(50, 10)
    fs.X[fs.y == 1] = 7.0
    out = smote(fs, k=5, seed=1)
    assert np.allclose(out.X[out.synthetic], 7.0)


def test_insufficient_minority_raises():
    fs = _fs(100, 4)
    with pytest.raises(InsufficientData):
        smote(fs, k=5, seed=0)


def test_split_features_no_synthetic_in_test():
    fs = _fs(300, 80)
    train, test = split_features(fs, 0.8, seed=3)
    balanced = smote(train, k=5, seed=3)
    assert not test.synthetic.any()
    assert len(balanced) > len(train)
    assert len(train) + len(test) == len(fs)


def test_take_preserves_alignment():
    fs = _fs(10, 5)
    fs.attack_kinds = [i for i in range(15)]
    sub = take(fs, np.array([2, 7, 12]))
    assert sub.attack_kinds == [2, 7, 12]
    assert np.array_equal(sub.y, fs.y[[2, 7, 12]])
