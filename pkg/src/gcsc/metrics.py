"""Clustering scores: overall accuracy under optimal matching, NMI and Kappa."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from gcsc.errors import ArgumentError


@dataclass(frozen=True)
class ClusterReport:
    oa: float
    nmi: float
    kappa: float
    confusion: np.ndarray
    truth_ids: np.ndarray
    pred_ids: np.ndarray
    matching: dict
    runtime_seconds: float = 0.0

    def to_dict(self):
        return {
            "oa": self.oa,
            "nmi": self.nmi,
            "kappa": self.kappa,
            "confusion": self.confusion.tolist(),
            "truth_ids": [int(v) for v in self.truth_ids],
            "pred_ids": [int(v) for v in self.pred_ids],
            "matching": {str(k): int(v) for k, v in sorted(self.matching.items())},
            "runtime_seconds": self.runtime_seconds,
        }


def _check(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ArgumentError(f"pred has {pred.size} labels but truth has {truth.size}")
    if pred.size == 0:
        raise ArgumentError("cannot score an empty labeling")
    return pred, truth


def contingency(pred, truth):
    """Return ``(truth_ids, pred_ids, table)`` with ``table[i, j]`` counting
    samples of true class ``truth_ids[i]`` predicted as ``pred_ids[j]``."""
    pred, truth = _check(pred, truth)
    truth_ids, ti = np.unique(truth, return_inverse=True)
    pred_ids, pi = np.unique(pred, return_inverse=True)
    table = np.zeros((truth_ids.size, pred_ids.size), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return truth_ids, pred_ids, table


def overall_accuracy(pred, truth):
    """Accuracy after the one-to-one cluster-to-class matching that maximizes
    agreement (Hungarian method on the contingency table).

    Among equally good matchings the one with the lowest chance agreement
    (see :func:`kappa`) is taken, which keeps every score independent of the
    predicted label ids.  Returns ``(oa, matching)`` where ``matching`` maps predicted label to true
    label for every matched cluster.
    """
    truth_ids, pred_ids, table = contingency(pred, truth)
    n = int(table.sum())
    # secondary term sums to < 1 over any matching, so it only breaks ties
    chance = np.outer(table.sum(axis=1), table.sum(axis=0)) / (float(n) * n + 1.0)
    rows, cols = linear_sum_assignment(table - chance, maximize=True)
    agree = int(table[rows, cols].sum())
    matching = {pred_ids[c].item(): truth_ids[r].item() for r, c in zip(rows, cols)}
    return agree / n, matching


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information normalized by the geometric mean of the entropies
    (natural log; 0 when either labeling has zero entropy)."""
    _, _, table = contingency(pred, truth)
    n = table.sum()
    h_t = _entropy(table.sum(axis=1), n)
    h_p = _entropy(table.sum(axis=0), n)
    if h_t == 0.0 or h_p == 0.0:
        return 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return max(0.0, min(1.0, mi / np.sqrt(h_t * h_p)))


def matched_confusion(pred, truth, matching):
    """Confusion with predicted clusters relabeled through ``matching``.

    Rows and columns are the sorted true classes; samples in unmatched
    clusters appear in no column.
    """
    pred, truth = _check(pred, truth)
    truth_ids = np.unique(truth)
    index = {t.item(): i for i, t in enumerate(truth_ids)}
    conf = np.zeros((truth_ids.size, truth_ids.size), dtype=np.int64)
    for p, t in zip(pred, truth):
        m = matching.get(p.item())
        if m is not None:
            conf[index[t.item()], index[m]] += 1
    return truth_ids, conf


def kappa(pred, truth, matching=None):
    """Cohen's kappa of the matched labeling; 0 when chance agreement is 1."""
    pred, truth = _check(pred, truth)
    if matching is None:
        _, matching = overall_accuracy(pred, truth)
    _, conf = matched_confusion(pred, truth, matching)
    n = pred.size
    p_o = np.trace(conf) / n
    row = np.bincount(np.unique(truth, return_inverse=True)[1])
    p_e = float(np.dot(row, conf.sum(axis=0))) / (n * n)
    if p_e >= 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def evaluate(pred, truth, runtime_seconds=0.0):
    truth_ids, pred_ids, table = contingency(pred, truth)
    oa, matching = overall_accuracy(pred, truth)
    return ClusterReport(
        oa=float(oa),
        nmi=nmi(pred, truth),
        kappa=kappa(pred, truth, matching),
        confusion=table,
        truth_ids=truth_ids,
        pred_ids=pred_ids,
        matching=matching,
        runtime_seconds=float(runtime_seconds),
    )
