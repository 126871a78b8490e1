"""Detection metrics: confusion counts, ROC-AUC, and the per-attack table.

Both AUC routes (threshold sweep with trapezoids, and the brute-force
pairwise probability) accumulate the same integer numerator and divide once
at the end, so they agree exactly, not just to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackKind
from .errors import DegenerateTestSet
from .features import FeatureSet


def confusion(scores: np.ndarray, y: np.ndarray, threshold: float = 0.5):
    pred = scores >= threshold
    y = np.asarray(y).astype(bool)
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    return tp, fp, tn, fn


def auc_roc(scores: np.ndarray, y: np.ndarray) -> float:
    """Trapezoidal area under the ROC over all score thresholds."""
    y = np.asarray(y).astype(bool)
    pos = int(y.sum())
    neg = int((~y).sum())
    if pos == 0 or neg == 0:
        raise DegenerateTestSet("AUC needs both classes present")
    order = np.argsort(np.asarray(scores, dtype=np.float64), kind="stable")
    sorted_scores = np.asarray(scores, dtype=np.float64)[order][::-1]
    sorted_y = y[order][::-1]
    numerator = 0
    tp = fp = 0
    prev_tp = prev_fp = 0
    i = 0
    n = len(sorted_scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(sorted_y[i:j].sum())
        fp += (j - i) - int(sorted_y[i:j].sum())
        numerator += (fp - prev_fp) * (tp + prev_tp)
        prev_tp, prev_fp = tp, fp
        i = j
    return numerator / (2 * pos * neg)


def auc_pairwise(scores: np.ndarray, y: np.ndarray) -> float:
    """Brute-force oracle: P(random positive outscores random negative),
    ties counting half."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    s_pos = scores[y]
    s_neg = scores[~y]
    if len(s_pos) == 0 or len(s_neg) == 0:
        raise DegenerateTestSet("AUC needs both classes present")
    wins = int((s_pos[:, None] > s_neg[None, :]).sum())
    ties = int((s_pos[:, None] == s_neg[None, :]).sum())
    return (2 * wins + ties) / (2 * len(s_pos) * len(s_neg))


@dataclass
class AttackRow:
    kind: AttackKind
    samples: int
    true_positives: int
    false_negatives: int
    detection_rate: float
    precision: float


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_roc: float
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float
    per_attack: list = field(default_factory=list)

    @property
    def confusion_matrix(self):
        return ((self.tn, self.fp), (self.fn, self.tp))

    def to_text(self) -> str:
        lines = [
            "model performance",
            f"  accuracy   {self.accuracy * 100:6.2f} %",
            f"  precision  {self.precision * 100:6.2f} %",
            f"  recall     {self.recall * 100:6.2f} %",
            f"  f1         {self.f1 * 100:6.2f} %",
            f"  auc-roc    {self.auc_roc:8.4f}",
            f"  confusion  tn={self.tn} fp={self.fp} fn={self.fn} "
            f"tp={self.tp}",
        ]
        if self.per_attack:
            lines.append("")
            lines.append(f"{'attack vector':<22}{'samples':>8}{'t.p.':>7}"
                         f"{'f.n.':>7}{'d.r.(%)':>9}{'pr(%)':>8}")
            for row in self.per_attack:
                name = (row.kind.value if isinstance(row.kind, AttackKind)
                        else str(row.kind))
                lines.append(
                    f"{name:<22}{row.samples:>8}{row.true_positives:>7}"
                    f"{row.false_negatives:>7}{row.detection_rate * 100:>9.1f}"
                    f"{row.precision * 100:>8.1f}")
        return "\n".join(lines)


def evaluate(model, fs: FeatureSet, threshold: float = 0.5) -> EvalReport:
    """Score a feature set and compute the full report.

    Per-attack precision treats each vector as its own binary problem
    against the shared pool of clean test rows, so false positives on
    normal traffic weigh on every row of the table.
    """
    if len(fs) == 0:
        raise DegenerateTestSet("empty evaluation set")
    scores = model.predict_scores(fs.X)
    y = fs.y.astype(bool)
    if y.all() or not y.any():
        raise DegenerateTestSet("evaluation needs both classes present")
    tp, fp, tn, fn = confusion(scores, y, threshold)
    n = len(fs)
    accuracy = (tp + tn) / n
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    auc = auc_roc(scores, y)
    pred = scores >= threshold
    per_attack = []
    overall_tp = overall_n = 0
    for kind in AttackKind:
        members = np.array([k is kind for k in fs.attack_kinds], dtype=bool)
        count = int(members.sum())
        if count == 0:
            continue
        k_tp = int(np.sum(pred & members))
        k_fn = count - k_tp
        k_prec = k_tp / (k_tp + fp) if k_tp + fp else 0.0
        per_attack.append(AttackRow(kind, count, k_tp, k_fn,
                                    k_tp / count, k_prec))
        overall_tp += k_tp
        overall_n += count
    if per_attack:
        o_prec = overall_tp / (overall_tp + fp) if overall_tp + fp else 0.0
        per_attack.append(AttackRow("overall", overall_n, overall_tp,
                                    overall_n - overall_tp,
                                    overall_tp / overall_n, o_prec))
    return EvalReport(accuracy=accuracy, precision=precision, recall=recall,
                      f1=f1, auc_roc=auc, tp=tp, fp=fp, tn=tn, fn=fn,
                      threshold=threshold, per_attack=per_attack)
