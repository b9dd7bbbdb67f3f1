"""Classifier evaluation from prediction files.

Prediction CSV header: ``image_id,true_class,predicted_class,score:<c1>,...``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from simfilter.errors import DataError

SCORE_PREFIX = "score:"


@dataclass(frozen=True)
class PredictionRow:
    image_id: str
    true_class: str
    predicted_class: str
    scores: Mapping[str, float] = field(default_factory=dict)

    def argmax_class(self) -> str:
        # highest score, ties to the alphabetically first class
        return min(self.scores, key=lambda c: (-self.scores[c], c))


def read_predictions(path: str | os.PathLike, *, check_argmax: bool = True) -> list[PredictionRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = {"image_id", "true_class", "predicted_class"} - set(fields)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        score_cols = [c for c in fields if c.startswith(SCORE_PREFIX)]
        for lineno, rec in enumerate(reader, start=2):
            try:
                scores = {c[len(SCORE_PREFIX):]: float(rec[c]) for c in score_cols}
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad score ({exc})") from None
            row = PredictionRow(rec["image_id"], rec["true_class"], rec["predicted_class"], scores)
            if check_argmax and scores and row.argmax_class() != row.predicted_class:
                raise DataError(f"{path}:{lineno}: predicted_class {row.predicted_class!r} "
                                f"is not the argmax of the scores ({row.argmax_class()!r})")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no prediction rows")
    return rows


@dataclass(frozen=True)
class Confusion:
    """``counts[i][j]`` = rows with true label ``labels[i]`` predicted as ``labels[j]``."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(rows: Sequence[PredictionRow], labels: Sequence[str] | None = None) -> Confusion:
    if not rows:
        raise DataError("no prediction rows")
    if labels is None:
        found = {r.true_class for r in rows} | {r.predicted_class for r in rows}
        for r in rows:
            found.update(r.scores)
        labels = sorted(found)
    index = {c: i for i, c in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for r in rows:
        try:
            counts[index[r.true_class], index[r.predicted_class]] += 1
        except KeyError as exc:
            raise DataError(f"unknown label {exc.args[0]!r} in row {r.image_id!r}") from None
    return Confusion(tuple(labels), counts)


def _check_support(cm: Confusion, allow_zero_support: bool) -> np.ndarray:
    support = cm.support
    empty = [cm.labels[i] for i in np.flatnonzero(support == 0)]
    if empty and not allow_zero_support:
        raise DataError(f"class(es) with no true instances: {empty}")
    return support > 0


def per_class_recall(cm: Confusion) -> dict[str, float | None]:
    tp = np.diag(cm.counts)
    support = cm.support
    return {c: (float(tp[i] / support[i]) if support[i] else None) for i, c in enumerate(cm.labels)}


def per_class_precision(cm: Confusion) -> dict[str, float]:
    tp = np.diag(cm.counts)
    predicted = cm.counts.sum(axis=0)
    return {c: (float(tp[i] / predicted[i]) if predicted[i] else 0.0) for i, c in enumerate(cm.labels)}


def per_class_f1(cm: Confusion) -> dict[str, float]:
    """F1 per class; a class with precision + recall == 0 scores 0."""
    precision = per_class_precision(cm)
    recall = per_class_recall(cm)
    out = {}
    for c in cm.labels:
        p, r = precision[c], recall[c] or 0.0
        out[c] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return out


def recall_macro(cm: Confusion, *, allow_zero_support: bool = False) -> float:
    """Mean per-class recall; zero-support classes raise unless explicitly excluded."""
    present = _check_support(cm, allow_zero_support)
    recall = per_class_recall(cm)
    values = [recall[c] for i, c in enumerate(cm.labels) if present[i]]
    return float(np.mean(values))


def f1_macro(cm: Confusion, *, allow_zero_support: bool = False) -> float:
    present = _check_support(cm, allow_zero_support)
    f1 = per_class_f1(cm)
    return float(np.mean([f1[c] for i, c in enumerate(cm.labels) if present[i]]))


def accuracy(cm: Confusion) -> float:
    if cm.total == 0:
        raise DataError("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def auc_binary(rows: Sequence[PredictionRow], positive_class: str) -> float:
    """Area under the ROC curve of the positive-class score.

    Thresholds sweep the distinct scores from high to low; tied scores move
    together, giving a diagonal step (half credit for tied pairs).
    """
    try:
        scores = np.array([r.scores[positive_class] for r in rows], dtype=np.float64)
    except KeyError:
        raise DataError(f"no score column for class {positive_class!r}") from None
    is_pos = np.array([r.true_class == positive_class for r in rows])
    n_pos = int(is_pos.sum())
    n_neg = len(rows) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError(f"AUC for {positive_class!r} needs both positive and negative rows")

    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], is_pos[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(~y)[ends]
    tpr = np.r_[0, tp] / n_pos
    fpr = np.r_[0, fp] / n_neg
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2))


def auc_ovr_macro(rows: Sequence[PredictionRow]) -> float:
    return float(np.mean(list(auc_per_class(rows).values())))


def auc_per_class(rows: Sequence[PredictionRow]) -> dict[str, float]:
    classes = sorted({c for r in rows for c in r.scores} | {r.true_class for r in rows})
    truth = {r.true_class for r in rows}
    absent = [c for c in classes if c not in truth]
    if absent:
        raise DataError(f"class(es) absent from the true labels: {absent}")
    if len(classes) < 2:
        raise DataError("one-vs-rest AUC needs at least two classes")
    return {c: auc_binary(rows, c) for c in classes}


@dataclass
class MetricReport:
    labels: list[str]
    accuracy: float
    per_class_recall: dict[str, float | None]
    macro_recall: float
    per_class_f1: dict[str, float]
    macro_f1: float
    per_class_auc: dict[str, float] | None
    macro_auc_ovr: float | None
    confusion_matrix: list[list[int]]

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "accuracy": self.accuracy,
            "per_class_recall": self.per_class_recall,
            "macro_recall": self.macro_recall,
            "per_class_f1": self.per_class_f1,
            "macro_f1": self.macro_f1,
            "per_class_auc": self.per_class_auc,
            "macro_auc_ovr": self.macro_auc_ovr,
            "confusion_matrix": self.confusion_matrix,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        width = max(8, *(len(c) for c in self.labels))
        lines = [f"{'class':<{width}}  {'recall':>8}  {'f1':>8}  {'auc':>8}"]
        for c in self.labels:
            rec = self.per_class_recall[c]
            auc = self.per_class_auc.get(c) if self.per_class_auc else None
            lines.append(f"{c:<{width}}  {_pct(rec):>8}  {_pct(self.per_class_f1[c]):>8}  {_pct(auc):>8}")
        lines.append("")
        lines.append(f"accuracy      {_pct(self.accuracy)}")
        lines.append(f"macro recall  {_pct(self.macro_recall)}")
        lines.append(f"macro F1      {_pct(self.macro_f1)}")
        lines.append(f"macro AUC     {_pct(self.macro_auc_ovr)}")
        return "\n".join(lines) + "\n"


def _pct(v: float | None) -> str:
    return "-" if v is None else f"{100 * v:.2f}%"


def evaluate(rows: Sequence[PredictionRow], *, allow_zero_support: bool = False) -> MetricReport:
    cm = confusion(rows)
    have_scores = all(r.scores for r in rows)
    per_auc = auc_per_class(rows) if have_scores else None
    return MetricReport(
        labels=list(cm.labels),
        accuracy=accuracy(cm),
        per_class_recall=per_class_recall(cm),
        macro_recall=recall_macro(cm, allow_zero_support=allow_zero_support),
        per_class_f1=per_class_f1(cm),
        macro_f1=f1_macro(cm, allow_zero_support=allow_zero_support),
        per_class_auc=per_auc,
        macro_auc_ovr=float(np.mean(list(per_auc.values()))) if per_auc else None,
        confusion_matrix=cm.counts.tolist(),
    )


def write_predictions(rows: Iterable[PredictionRow], path: str | os.PathLike) -> None:
    rows = list(rows)
    classes = sorted({c for r in rows for c in r.scores})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "true_class", "predicted_class"] + [SCORE_PREFIX + c for c in classes])
        for r in rows:
            writer.writerow([r.image_id, r.true_class, r.predicted_class]
                            + [repr(float(r.scores[c])) for c in classes])
