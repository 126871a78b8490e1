"""Three-stage preprocessing: decode, correlation pruning, PCA.

Stage 1 drops the capture-infrastructure debug columns by name, leaving the
52 protocol features.  Stage 2 removes constant columns and, for every pair
with |Pearson r| at or above the threshold, the later column in schema
order.  Stage 3 standardizes the survivors and projects them onto the
smallest principal-component basis meeting the variance target.  The fitted
transform is immutable and serializes to versioned JSON that reloads to
bit-identical projections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .capture import DEBUG_COLUMNS, Dataset
from .errors import DegenerateData, InsufficientData, SchemaError

TRANSFORM_VERSION = 1


@dataclass(frozen=True)
class FeatureTransform:
    """Fitted preprocessing state: kept columns, z-score stats, PCA basis."""

    dropped_debug: tuple
    kept_columns: tuple
    corr_threshold: float
    means: np.ndarray
    stddevs: np.ndarray
    pca_basis: np.ndarray               # (k, d), rows orthonormal
    explained_variance_ratios: np.ndarray   # all d components, sums to 1
    variance_target: float

    @property
    def n_components(self) -> int:
        return self.pca_basis.shape[0]

    @property
    def cumulative_variance(self) -> float:
        return float(self.explained_variance_ratios[:self.n_components].sum())

    def to_json(self) -> str:
        doc = {
            "version": TRANSFORM_VERSION,
            "dropped_debug": list(self.dropped_debug),
            "kept_columns": list(self.kept_columns),
            "corr_threshold": self.corr_threshold,
            "means": self.means.tolist(),
            "stddevs": self.stddevs.tolist(),
            "pca_basis": self.pca_basis.tolist(),
            "explained_variance_ratios":
                self.explained_variance_ratios.tolist(),
            "variance_target": self.variance_target,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FeatureTransform":
        doc = json.loads(text)
        if doc.get("version") != TRANSFORM_VERSION:
            raise SchemaError(
                f"transform version {doc.get('version')} unsupported")
        return cls(
            dropped_debug=tuple(doc["dropped_debug"]),
            kept_columns=tuple(doc["kept_columns"]),
            corr_threshold=float(doc["corr_threshold"]),
            means=np.array(doc["means"], dtype=np.float64),
            stddevs=np.array(doc["stddevs"], dtype=np.float64),
            pca_basis=np.array(doc["pca_basis"], dtype=np.float64),
            explained_variance_ratios=np.array(
                doc["explained_variance_ratios"], dtype=np.float64),
            variance_target=float(doc["variance_target"]),
        )

    def save(self, path: str) -> str:
        with open(path, "w") as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path: str) -> "FeatureTransform":
        with open(path) as f:
            return cls.from_json(f.read())


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    sample_index: int


@dataclass
class FeatureSet:
    """Model-ready vectors with their labels and provenance."""

    X: np.ndarray
    y: np.ndarray
    attack_kinds: list
    synthetic: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def empty_like(cls, k: int) -> "FeatureSet":
        return cls(np.zeros((0, k)), np.zeros(0, dtype=np.int64), [],
                   np.zeros(0, dtype=bool))


def decode(ds: Dataset) -> Dataset:
    """Stage 1: all-numeric rows with the debug columns removed.

    Idempotent: datasets already reduced to protocol columns pass through.
    """
    unknown = [c for c in ds.schema
               if c.startswith("dbg_") and c not in DEBUG_COLUMNS]
    if unknown:
        raise SchemaError(f"unknown debug columns {unknown}")
    keep_idx = [j for j, c in enumerate(ds.schema) if c not in DEBUG_COLUMNS]
    schema = [ds.schema[j] for j in keep_idx]
    return Dataset(ds.values[:, keep_idx], ds.labels, ds.attack_kinds,
                   cycles=ds.cycles, schema=schema)


def correlation_prune(ds: Dataset, threshold: float = 0.95):
    """Stage 2: drop constant columns and the later member of every highly
    correlated pair.  Deterministic in schema order; row order irrelevant.

    Returns (pruned dataset, kept column names).
    """
    if len(ds) < 2:
        raise InsufficientData("correlation needs at least 2 rows")
    X = ds.values.astype(np.float64)
    d = X.shape[1]
    variances = X.var(axis=0)
    dropped = set(np.flatnonzero(variances == 0.0).tolist())
    live = [j for j in range(d) if j not in dropped]
    if live:
        corr = np.corrcoef(X[:, live], rowvar=False)
        if corr.ndim == 0:   # single live column
            corr = np.ones((1, 1))
        for a in range(len(live)):
            if live[a] in dropped:
                continue
            for b in range(a + 1, len(live)):
                if live[b] in dropped:
                    continue
                if abs(corr[a, b]) >= threshold:
                    dropped.add(live[b])
    keep_idx = [j for j in range(d) if j not in dropped]
    kept = [ds.schema[j] for j in keep_idx]
    pruned = Dataset(ds.values[:, keep_idx], ds.labels, ds.attack_kinds,
                     cycles=ds.cycles, schema=kept)
    return pruned, kept


def pca_fit(ds: Dataset, variance_target: float,
            corr_threshold: float = 0.95,
            dropped_debug: tuple = DEBUG_COLUMNS) -> FeatureTransform:
    """Stage 3: standardize and fit the principal-component basis.

    The eigendecomposition runs as an SVD of the centered, scaled data
    matrix; components come out in decreasing-eigenvalue order and each row
    is sign-fixed so its largest-magnitude loading is positive.
    """
    if not 0.0 < variance_target <= 1.0:
        raise DegenerateData("variance target must be in (0, 1]")
    if len(ds) < 2:
        raise InsufficientData("PCA needs at least 2 rows")
    X = ds.values.astype(np.float64)
    means = X.mean(axis=0)
    stddevs = X.std(axis=0)
    if not np.any(stddevs > 0.0):
        raise DegenerateData("all columns constant; nothing to project")
    if np.any(stddevs == 0.0):
        raise DegenerateData(
            "constant columns present; run correlation_prune first")
    Z = (X - means) / stddevs
    n = Z.shape[0]
    _, s, vt = np.linalg.svd(Z / np.sqrt(n), full_matrices=False)
    eigvals = s ** 2
    total = eigvals.sum()
    if total <= 0.0:
        raise DegenerateData("zero total variance")
    ratios = eigvals / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, variance_target - 1e-12)) + 1
    k = min(k, len(ratios))
    basis = vt[:k].copy()
    for row in basis:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return FeatureTransform(
        dropped_debug=tuple(dropped_debug),
        kept_columns=tuple(ds.schema),
        corr_threshold=corr_threshold,
        means=means, stddevs=stddevs, pca_basis=basis,
        explained_variance_ratios=ratios,
        variance_target=variance_target)


def fit_pipeline(ds: Dataset, corr_threshold: float = 0.95,
                 variance_target: float = 0.95,
                 max_rounds: int = 3) -> FeatureTransform:
    """Run all three stages on a training dataset.

    Correlation pruning repeats only while the kept set keeps changing,
    up to `max_rounds`; one pass already reaches a fixed point on ordinary
    data, so the loop exists for contract fidelity.
    """
    stage = decode(ds)
    dropped_debug = tuple(c for c in ds.schema if c in DEBUG_COLUMNS)
    previous = None
    for _ in range(max_rounds):
        stage, kept = correlation_prune(stage, threshold=corr_threshold)
        if previous is not None and kept == previous:
            break
        previous = kept
    return pca_fit(stage, variance_target, corr_threshold=corr_threshold,
                   dropped_debug=dropped_debug)


def _project(ft: FeatureTransform, rows: np.ndarray) -> np.ndarray:
    z = (rows - ft.means) / ft.stddevs
    return z @ ft.pca_basis.T


def transform(ft: FeatureTransform, ds_or_row: Union[Dataset, np.ndarray],
              sample_index: int = 0):
    """Project through the fitted transform.

    With a Dataset, selects the kept columns by name and returns a
    FeatureSet; with a bare row (already in kept-column order), returns a
    FeatureVector.
    """
    if isinstance(ds_or_row, Dataset):
        ds = ds_or_row
        try:
            idx = [ds.schema.index(c) for c in ft.kept_columns]
        except ValueError:
            missing = [c for c in ft.kept_columns if c not in ds.schema]
            raise SchemaError(f"dataset lacks kept columns {missing}")
        X = _project(ft, ds.values[:, idx].astype(np.float64))
        return FeatureSet(X=X, y=ds.labels.copy(),
                          attack_kinds=list(ds.attack_kinds),
                          synthetic=np.zeros(len(ds), dtype=bool))
    row = np.asarray(ds_or_row, dtype=np.float64)
    if row.shape != (len(ft.kept_columns),):
        raise SchemaError(
            f"row has shape {row.shape}, transform expects "
            f"({len(ft.kept_columns)},)")
    return FeatureVector(values=_project(ft, row),
                         sample_index=sample_index)


# ---------------------------------------------------------------------------
# projected-feature CSV (model-ready vectors plus split bookkeeping)

FEATURES_CSV_VERSION = 1


def save_feature_csv(path: str, fs: FeatureSet,
                     split: Optional[np.ndarray] = None) -> str:
    """Write projected vectors with label, attack-kind code, and train/test
    split flags.  Floats use repr so a reload is bit-identical."""
    from .capture import ATTACK_KIND_CODES
    k = fs.X.shape[1]
    if split is None:
        split = np.zeros(len(fs), dtype=np.int64)
    with open(path, "w") as f:
        f.write(f"#features_version={FEATURES_CSV_VERSION}\n")
        cols = [f"pc_{j}" for j in range(k)] + ["label", "attack_kind",
                                                "split"]
        f.write(",".join(cols) + "\n")
        for i in range(len(fs)):
            kind = fs.attack_kinds[i]
            code = 0 if kind is None else ATTACK_KIND_CODES[kind]
            row = [repr(float(v)) for v in fs.X[i]]
            row += [str(int(fs.y[i])), str(code), str(int(split[i]))]
            f.write(",".join(row) + "\n")
    return path


def load_feature_csv(path: str):
    """Returns (FeatureSet, split array)."""
    from .capture import ATTACK_KIND_FROM_CODE
    from .errors import CsvFormatError
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#features_version="):
            raise CsvFormatError("missing #features_version comment", line=1)
        header = f.readline().strip().split(",")
        if header[-3:] != ["label", "attack_kind", "split"]:
            raise SchemaError(f"unexpected feature columns {header[-3:]}")
        k = len(header) - 3
        X, y, kinds, split = [], [], [], []
        for lineno, line in enumerate(f, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != k + 3:
                raise CsvFormatError(
                    f"{len(parts)} fields, expected {k + 3}", line=lineno)
            try:
                X.append([float(v) for v in parts[:k]])
                y.append(int(parts[k]))
                code = int(parts[k + 1])
                split.append(int(parts[k + 2]))
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno)
            kinds.append(ATTACK_KIND_FROM_CODE.get(code))
    fs = FeatureSet(X=np.array(X, dtype=np.float64).reshape(-1, k),
                    y=np.array(y, dtype=np.int64),
                    attack_kinds=kinds,
                    synthetic=np.zeros(len(y), dtype=bool))
    return fs, np.array(split, dtype=np.int64)
