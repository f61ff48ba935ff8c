"""Confusion-matrix metrics in the results-table schema.

Rows of the confusion matrix are true classes, columns are predictions.
"""

from dataclasses import dataclass

import numpy as np

RESULT_COLUMNS = (
    "model",
    "loss",
    "accuracy_pct",
    "avg_class_recall_pct",
    "avg_class_precision_pct",
    "epochs",
)


def confusion_matrix(y_true, y_pred, n_classes):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def per_class_recall(cm):
    return _safe_ratio(np.diag(cm), cm.sum(axis=1))


def per_class_precision(cm):
    return _safe_ratio(np.diag(cm), cm.sum(axis=0))


@dataclass
class EvalReport:
    """One results-table row; metrics are fractions in [0, 1]."""

    loss: float
    accuracy: float
    avg_class_recall: float
    avg_class_precision: float
    epochs_trained: int
    confusion: np.ndarray

    @classmethod
    def from_confusion(cls, confusion, loss=float("nan"), epochs_trained=0):
        cm = np.asarray(confusion, dtype=np.int64)
        total = cm.sum()
        return cls(
            loss=float(loss),
            accuracy=float(np.trace(cm) / total) if total else 0.0,
            avg_class_recall=float(per_class_recall(cm).mean()),
            avg_class_precision=float(per_class_precision(cm).mean()),
            epochs_trained=int(epochs_trained),
            confusion=cm,
        )

    def row(self, model):
        """Results-table row; NaN loss is written as ``NA``."""
        return {
            "model": model,
            "loss": "NA" if np.isnan(self.loss) else f"{self.loss:.4f}",
            "accuracy_pct": f"{100 * self.accuracy:.2f}",
            "avg_class_recall_pct": f"{100 * self.avg_class_recall:.2f}",
            "avg_class_precision_pct": f"{100 * self.avg_class_precision:.2f}",
            "epochs": str(self.epochs_trained),
        }

    def to_dict(self):
        return {
            "loss": None if np.isnan(self.loss) else self.loss,
            "accuracy": self.accuracy,
            "avg_class_recall": self.avg_class_recall,
            "avg_class_precision": self.avg_class_precision,
            "epochs_trained": self.epochs_trained,
            "confusion": self.confusion.tolist(),
        }


def mean_report(reports, epochs_trained=None):
    """Unweighted mean of each metric; loss is reported as not applicable (NaN)."""
    if not reports:
        raise ValueError("no reports to aggregate")
    return EvalReport(
        loss=float("nan"),
        accuracy=float(np.mean([r.accuracy for r in reports])),
        avg_class_recall=float(np.mean([r.avg_class_recall for r in reports])),
        avg_class_precision=float(np.mean([r.avg_class_precision for r in reports])),
        epochs_trained=int(epochs_trained if epochs_trained is not None
                           else round(np.mean([r.epochs_trained for r in reports]))),
        confusion=sum(r.confusion for r in reports),
    )
