"""Sorting-quality criteria: detection matching and accuracy, detection
AUROC, permutation-optimal classification accuracy, intra-cluster variance
and Pearson correlation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels


@dataclass
class MatchReport:
    tp: int
    fp: int
    fn: int
    tolerance_ms: float
    pairs: list = field(default_factory=list)  # (gt index, detection index)


@dataclass
class ClusterStats:
    cluster_ids: list
    counts: list
    means: list
    icv_per_cluster: list
    aggregate_icv: float


def match_detections(gt_times, det_times, tolerance_ms: float = 0.5, fs_hz: float = 24000.0) -> MatchReport:
    """Pair detections with ground-truth events, chronologically.

    Each detection in time order takes the nearest unmatched event within
    ``tolerance_ms`` (inclusive); leftovers are false positives and misses.
    """
    if not tolerance_ms > 0:
        raise ValueError("tolerance_ms must be > 0")
    gt_times = np.asarray(getattr(gt_times, "times", gt_times), dtype=np.int64)
    det_times = np.asarray(getattr(det_times, "times", det_times), dtype=np.int64)
    g_order = np.argsort(gt_times, kind="stable")
    d_order = np.argsort(det_times, kind="stable")
    tol = tolerance_ms * fs_hz / 1000.0
    hit = kernels.greedy_match(gt_times[g_order], det_times[d_order], tol)
    matched = np.flatnonzero(hit >= 0)
    pairs = [(int(g_order[hit[i]]), int(d_order[i])) for i in matched]
    tp = len(pairs)
    return MatchReport(tp=tp, fp=len(det_times) - tp, fn=len(gt_times) - tp, tolerance_ms=tolerance_ms, pairs=pairs)


def detection_accuracy(report: MatchReport) -> float:
    """``tp / (tp + fp + fn)``."""
    total = report.tp + report.fp + report.fn
    if total == 0:
        raise ValueError("detection accuracy is undefined with no events and no detections")
    return report.tp / total


def auroc(positive_scores, negative_scores) -> float:
    """Probability that a random positive outscores a random negative, ties half.

    Computed from ranks (Mann-Whitney U), O(n log n).
    """
    pos = np.asarray(positive_scores, dtype=np.float64).ravel()
    neg = np.asarray(negative_scores, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auroc needs nonempty positive and negative score sets")
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    at_or_below = np.searchsorted(neg_sorted, pos, side="right")
    u = below.sum() + 0.5 * (at_or_below - below).sum()
    return float(u / (len(pos) * len(neg)))


def confusion_matrix(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    p_ids, p_idx = np.unique(pred, return_inverse=True)
    t_ids, t_idx = np.unique(truth, return_inverse=True)
    cm = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    np.add.at(cm, (p_idx, t_idx), 1)
    return cm, p_ids, t_ids


def classification_accuracy(pred, truth) -> float:
    """Fraction correct under the best one-to-one cluster-to-unit assignment."""
    pred = np.asarray(getattr(pred, "labels", pred))
    truth = np.asarray(truth)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(truth)} labels")
    if len(pred) == 0:
        raise ValueError("classification accuracy needs at least one spike")
    cm, _, _ = confusion_matrix(pred, truth)
    rows, cols = linear_sum_assignment(cm, maximize=True)
    return float(cm[rows, cols].sum() / len(pred))


def icv(snippets, labels) -> ClusterStats:
    """Intra-cluster variance of waveforms.

    For cluster ``i`` with mean waveform ``mu_i``, the mean over its members
    of the squared Euclidean distance to ``mu_i``. The aggregate is the
    member-count-weighted mean over clusters.
    """
    x = np.asarray(getattr(snippets, "snippets", snippets), dtype=np.float64)
    lab = np.asarray(getattr(labels, "labels", labels))
    if len(x) != len(lab):
        raise ValueError("one label per snippet required")
    k = getattr(labels, "k", None)
    ids = list(range(k)) if k is not None else sorted(set(lab.tolist()))
    counts, means, per = [], [], []
    for i in ids:
        members = x[lab == i]
        if len(members) == 0:
            raise ValueError(f"cluster {i} is empty")
        mu = members.mean(axis=0)
        counts.append(len(members))
        means.append(mu)
        per.append(float(np.mean(np.sum((members - mu) ** 2, axis=1))))
    agg = float(np.dot(counts, per) / np.sum(counts))
    return ClusterStats(cluster_ids=ids, counts=counts, means=means, icv_per_cluster=per, aggregate_icv=agg)


def pcc(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("pcc needs two equal-length series of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("pcc is undefined for a constant series")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))
