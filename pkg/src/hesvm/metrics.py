"""Classification metrics, ROC/AUC, and reporting tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined_flags: set = field(default_factory=set)


@dataclass
class RocCurve:
    points: list  # (fpr, tpr) ordered by threshold descending
    auc: float


def confusion(pred, truth) -> ConfusionCounts:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise MetricsError(f"length mismatch: {pred.shape} vs {truth.shape}")
    for arr, name in ((pred, "pred"), (truth, "truth")):
        if not np.isin(arr, (0, 1)).all():
            raise MetricsError(f"{name} labels must be in {{0,1}}")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    return ConfusionCounts(tp, tn, fp, fn)


def metrics(c: ConfusionCounts) -> MetricsReport:
    if c.total == 0:
        raise MetricsError("empty confusion counts")
    flags = set()

    def ratio(num, den, name):
        if den == 0:
            flags.add(name)
            return 0.0
        return num / den

    acc = (c.tp + c.tn) / c.total
    prec = ratio(c.tp, c.tp + c.fp, "precision")
    rec = ratio(c.tp, c.tp + c.fn, "recall")
    f1 = ratio(2 * prec * rec, prec + rec, "f1")
    return MetricsReport(acc, prec, rec, f1, flags)


def roc(scores, truth) -> RocCurve:
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    n_pos = int(np.sum(truth == 1))
    n_neg = int(np.sum(truth == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("ROC needs both classes in the truth labels")
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    t_sorted = truth[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(s_sorted):
        # process ties as a single threshold step
        j = i
        while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
            if t_sorted[j] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(points, float(auc))


def auc_concordance(scores, truth) -> float:
    """O(n^2) pairwise concordance AUC with ties counted 1/2 (oracle)."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    pos = scores[truth == 1]
    neg = scores[truth == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise MetricsError("both classes required")
    total = 0.0
    for p in pos:
        total += np.sum(p > neg) + 0.5 * np.sum(p == neg)
    return float(total / (len(pos) * len(neg)))


COMPARISON_COLUMNS = ["Model", "Encrypted", "Acc", "Pre", "Rec", "F1", "Time(ms)"]


def comparison_markdown(rows: list[dict]) -> str:
    lines = ["| " + " | ".join(COMPARISON_COLUMNS) + " |",
             "|" + "|".join("---" for _ in COMPARISON_COLUMNS) + "|"]
    for r in rows:
        lines.append(
            "| {Model} | {Encrypted} | {Acc:.4f} | {Pre:.4f} | {Rec:.4f} | {F1:.4f} | {Time_ms:.3f} |".format(**r)
        )
    return "\n".join(lines) + "\n"


def comparison_csv(rows: list[dict]) -> str:
    out = [",".join(COMPARISON_COLUMNS)]
    for r in rows:
        out.append(
            "{Model},{Encrypted},{Acc:.6f},{Pre:.6f},{Rec:.6f},{F1:.6f},{Time_ms:.3f}".format(**r)
        )
    return "\n".join(out) + "\n"


def stages_csv(stage_ms: dict, noise_bits: dict) -> str:
    out = ["stage,ms,noise_bits"]
    for stage in ("enc", "kernel", "thresh", "dec"):
        out.append(f"{stage},{stage_ms[stage]:.3f},{noise_bits[stage]:.2f}")
    return "\n".join(out) + "\n"


def scaling_csv(rows: list[tuple[int, float]]) -> str:
    out = ["batch_size,total_ms"]
    for size, ms in rows:
        out.append(f"{size},{ms:.3f}")
    return "\n".join(out) + "\n"


def linear_fit_r2(xs, ys) -> tuple[float, float, float]:
    """Least-squares slope/intercept and R^2 of y against x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
