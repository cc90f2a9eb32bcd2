from __future__ import annotations

import numpy as np

__all__ = ["classification_metrics", "regression_metrics"]


def classification_metrics(labels, predicted_probs, threshold: float = 0.5) -> dict:
    """Accuracy, precision, recall and f1 of thresholded probabilities.

    Precision (recall) is 0 when nothing is predicted (present) positive;
    f1 is ``2PR / (P + R)``, or 0 when ``P + R = 0``.
    """
    y = np.asarray(labels, dtype=float).ravel()
    p = np.asarray(predicted_probs, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty input")
    if y.shape != p.shape:
        raise ValueError("labels and probabilities differ in length")
    yhat = p >= threshold
    pos = y == 1
    tp = float(np.sum(yhat & pos))
    fp = float(np.sum(yhat & ~pos))
    fn = float(np.sum(~yhat & pos))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "accuracy": float(np.mean(yhat == pos)),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def regression_metrics(targets, fitted) -> dict:
    t = np.asarray(targets, dtype=float).ravel()
    f = np.asarray(fitted, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty input")
    if t.shape != f.shape:
        raise ValueError("targets and fitted values differ in length")
    return {"mse": float(np.mean((t - f) ** 2))}
