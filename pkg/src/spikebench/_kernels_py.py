"""Pure-Python implementations of the hot loops in ``_kernels.pyx``."""

import numpy as np


def lockout_select(order, n, lockout):
    """Greedy peak acceptance in priority order with a symmetric lockout.

    ``order`` holds sample indices sorted by decreasing priority. A candidate
    is kept unless an already-kept index lies strictly closer than
    ``lockout`` samples. Returns a boolean mask aligned with ``order``.
    """
    blocked = np.zeros(n, dtype=bool)
    keep = np.zeros(len(order), dtype=bool)
    for i, t in enumerate(order.tolist()):
        if blocked[t]:
            continue
        keep[i] = True
        blocked[max(t - lockout + 1, 0):min(t + lockout, n)] = True
    return keep


def greedy_match(gt, det, tol):
    """Chronological matching of detections to ground-truth events.

    Each detection, in time order, takes the nearest still-unmatched event
    with ``|gt - det| <= tol`` (earlier event on ties). Returns, per
    detection, the index of its matched event or -1.
    """
    gt_list = gt.tolist()
    used = [False] * len(gt_list)
    out = np.full(len(det), -1, dtype=np.int64)
    lo = 0
    for i, d in enumerate(det.tolist()):
        while lo < len(gt_list) and gt_list[lo] < d - tol:
            lo += 1
        best, best_diff = -1, 0.0
        j = lo
        while j < len(gt_list) and gt_list[j] <= d + tol:
            if not used[j]:
                diff = abs(gt_list[j] - d)
                if best < 0 or diff < best_diff:
                    best, best_diff = j, diff
            j += 1
        if best >= 0:
            used[best] = True
            out[i] = best
    return out


def scatter_templates(out, starts, amps, shape):
    """Add ``amps[i] * shape`` into ``out`` at offset ``starts[i]``, in place.

    Copies running past either end of ``out`` are truncated.
    """
    n, length = len(out), len(shape)
    for s, a in zip(starts.tolist(), amps.tolist()):
        k0 = max(-s, 0)
        k1 = min(length, n - s)
        if k1 > k0:
            out[s + k0:s + k1] += a * shape[k0:k1]
