"""Metrics: approximation ratio, threshold-swept accuracy and F1, expected kernel."""

from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from .errors import ConfigError, DimensionError, NonFiniteInputError
from .lifted import SelectionSet
from .logger import get_logger

log = get_logger(__name__)

THRESHOLDS = np.round(np.linspace(0.0, 1.0, 101), 2)
RULES = ("argmax", "positive")


@dataclass
class MetricsReport:
    accuracy: float
    weighted_f1: float
    best_threshold: float
    precision: List[float] = field(default_factory=list)
    recall: List[float] = field(default_factory=list)
    f1: List[float] = field(default_factory=list)
    support: List[int] = field(default_factory=list)
    confusion: List[List[int]] = field(default_factory=list)
    rule: str = "argmax"

    def to_dict(self):
        return asdict(self)


def approximation_ratio(sdp_objective, sgd_objective):
    if not sgd_objective > 0:
        raise ZeroDivisionError(f"SGD loss must be > 0, got {sgd_objective}")
    return float(sdp_objective) / float(sgd_objective)


def rounding_gap(sdp_objective, rounded_loss):
    """Relative excess of the rounded network's loss over the relaxation value."""
    rounded_loss = float(rounded_loss)
    return (rounded_loss - float(sdp_objective)) / max(abs(rounded_loss), 1e-300)


def predict_at(scores, tau, rule="argmax"):
    if rule == "positive":
        return (scores[:, 1] >= tau).astype(int)
    masked = np.where(scores >= tau, scores, -np.inf)
    cleared = np.isfinite(masked).any(axis=1)
    return np.where(cleared, masked.argmax(axis=1), scores.argmax(axis=1))


def classify_and_score(scores, Y_test, rule="argmax"):
    """Sweep tau over 0.00..1.00, keep the most accurate (smallest tau on ties).

    ``argmax`` predicts the best class among those scoring >= tau and falls
    back to the overall argmax. ``positive`` (two classes only) predicts
    class 1 when its score is >= tau.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    Y_test = np.atleast_2d(np.asarray(Y_test, dtype=float))
    if rule not in RULES:
        raise ConfigError("rule", f"must be one of {RULES}, got {rule!r}")
    if scores.shape != Y_test.shape:
        raise DimensionError(f"scores {scores.shape} and labels {Y_test.shape} differ")
    n, c = Y_test.shape
    if n == 0 or Y_test.size == 0:
        raise DimensionError("empty test set")
    if c < 2:
        raise DimensionError(f"need at least two classes, got {c}")
    if rule == "positive" and c != 2:
        raise ConfigError("rule", "the positive-class rule needs exactly two classes")
    if not np.all(np.isfinite(scores)):
        raise NonFiniteInputError("scores contain non-finite entries")

    truth = Y_test.argmax(axis=1)
    best_tau, best_acc, best_pred = 0.0, -1.0, None
    for tau in THRESHOLDS:
        pred = predict_at(scores, tau, rule)
        acc = float(np.mean(pred == truth))
        if acc > best_acc:
            best_tau, best_acc, best_pred = float(tau), acc, pred

    labels = list(range(c))
    prec, rec, f1, support = precision_recall_fscore_support(
        truth, best_pred, labels=labels, zero_division=0
    )
    weighted = float(np.dot(f1, support) / support.sum())
    cm = confusion_matrix(truth, best_pred, labels=labels)
    log.debug(f"threshold sweep ({rule}): tau={best_tau:.2f} "
              f"acc={best_acc:.4f} f1={weighted:.4f}")
    return MetricsReport(
        accuracy=best_acc,
        weighted_f1=weighted,
        best_threshold=best_tau,
        precision=prec.tolist(),
        recall=rec.tolist(),
        f1=f1.tolist(),
        support=support.astype(int).tolist(),
        confusion=cm.astype(int).tolist(),
        rule=rule,
    )


def kernel_matrix(Lambda, sel: SelectionSet, X0, X1):
    """Expected kernel X0 Lambda[u, u] X1^T."""
    Lambda = np.asarray(Lambda, dtype=float)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    if Lambda.shape != (sel.p, sel.p):
        raise DimensionError(f"Lambda has shape {Lambda.shape}, expected ({sel.p}, {sel.p})")
    for name, Xa in (("X0", X0), ("X1", X1)):
        if Xa.shape[1] != sel.d:
            raise DimensionError(f"{name} has {Xa.shape[1]} columns, expected {sel.d}")
    return X0 @ sel.sub(Lambda, "u") @ X1.T
