"""Front end of the sorter: band-pass filtering, threshold detection,
snippet extraction and peak alignment."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from . import kernels
from .datagen import Recording

DWT_BLOCK = 32  # 2**5: five dyadic levels need the snippet length divisible by this


@dataclass(frozen=True)
class FilterSpec:
    lo_hz: float = 300.0
    hi_hz: float = 3000.0
    order: int = 4
    causal: bool = False

    def validate(self, fs_hz):
        if not 0 < self.lo_hz < self.hi_hz:
            raise ValueError(f"need 0 < lo_hz < hi_hz, got {self.lo_hz}, {self.hi_hz}")
        if self.hi_hz >= fs_hz / 2:
            raise ValueError(f"hi_hz {self.hi_hz} is at or above Nyquist ({fs_hz / 2})")
        if not 2 <= self.order <= 8:
            raise ValueError(f"order must be in [2, 8], got {self.order}")

    def sos(self, fs_hz):
        self.validate(fs_hz)
        return signal.butter(self.order, [self.lo_hz, self.hi_hz], btype="bandpass", fs=fs_hz, output="sos")

    def coefficients_json(self, fs_hz):
        """Second-order sections as JSON, for auditing the filter actually used."""
        return json.dumps(
            {"fs_hz": fs_hz, "lo_hz": self.lo_hz, "hi_hz": self.hi_hz, "order": self.order,
             "causal": self.causal, "sos": self.sos(fs_hz).tolist()}
        )


@dataclass
class DetectionResult:
    times: np.ndarray
    threshold_used: float
    scores: np.ndarray
    noise_sd: float = 0.0
    lockout_samples: int = 0


@dataclass
class SnippetSet:
    """Fixed-length spike windows cut from a filtered trace.

    ``snippets`` rows hold ``window_samples`` signal samples followed by zero
    padding up to a multiple of 32. ``times`` are the cut anchors in the
    source trace, i.e. ``start = times - anchor``.
    """

    window_ms: float
    snippets: np.ndarray
    alignment: str
    times: np.ndarray
    anchor: int
    window_samples: int
    source: np.ndarray = field(repr=False)
    dropped: int = 0
    source_index: np.ndarray | None = None  # row -> position in the times originally cut

    @property
    def n_spikes(self):
        return self.snippets.shape[0]

    @property
    def valid(self):
        return self.snippets[:, :self.window_samples]


def bandpass(recording: Recording, spec: FilterSpec = FilterSpec()) -> Recording:
    """Butterworth band-pass as a biquad cascade.

    ``spec.causal`` selects a single forward pass; otherwise the filter runs
    forward and backward for zero phase.
    """
    sos = spec.sos(recording.fs_hz)
    x = np.asarray(recording.samples, dtype=np.float64)
    y = signal.sosfilt(sos, x) if spec.causal else signal.sosfiltfilt(sos, x)
    meta = dict(recording.meta)
    meta["filter"] = {"lo_hz": spec.lo_hz, "hi_hz": spec.hi_hz, "order": spec.order, "causal": spec.causal}
    return Recording(samples=y, fs_hz=recording.fs_hz, meta=meta)


def robust_noise_sd(x):
    return float(np.median(np.abs(x)) / 0.6745)


def local_peaks(ax):
    """Indices of interior local maxima of ``ax`` (rightmost sample of a plateau)."""
    if len(ax) < 3:
        return np.zeros(0, dtype=np.int64)
    mid = ax[1:-1]
    return np.flatnonzero((mid >= ax[:-2]) & (mid > ax[2:])) + 1


def detect(filtered: Recording, k: float = 4.0, lockout_ms: float = 1.0) -> DetectionResult:
    """Threshold detection on ``|x|`` with a robust noise estimate.

    Local maxima above ``k * median(|x|) / 0.6745`` are accepted greedily in
    order of decreasing magnitude; a candidate closer than the lockout to an
    accepted peak is discarded. Because acceptance only depends on larger
    peaks, raising ``k`` returns a subset of the detections.
    """
    if not k > 0:
        raise ValueError(f"k must be > 0, got {k}")
    x = np.asarray(filtered.samples, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty recording")
    ax = np.abs(x)
    sd = robust_noise_sd(x)
    thr = k * sd
    lockout = max(int(round(lockout_ms * filtered.fs_hz / 1000.0)), 1)
    cand = local_peaks(ax)
    cand = cand[ax[cand] > thr]
    if sd == 0 or len(cand) == 0:
        return DetectionResult(np.zeros(0, dtype=np.int64), thr, np.zeros(0), sd, lockout)
    order = cand[np.lexsort((cand, -ax[cand]))]
    keep = kernels.lockout_select(order, len(x), lockout)
    times = np.sort(order[keep])
    return DetectionResult(times=times, threshold_used=thr, scores=ax[times] / sd, noise_sd=sd, lockout_samples=lockout)


def padded_length(window_samples):
    return int(math.ceil(window_samples / DWT_BLOCK) * DWT_BLOCK)


def _cut(source, starts, width, padded):
    rows = np.zeros((len(starts), padded))
    if len(starts):
        idx = starts[:, None] + np.arange(width)[None, :]
        rows[:, :width] = source[idx]
    return rows


def extract_snippets(filtered, times, window_ms: float = 2.0, pre_ms: float | None = None) -> SnippetSet:
    """Cut windows of ``window_ms`` starting ``pre_ms`` before each time.

    ``pre_ms`` defaults to 30% of the window, which is also the alignment
    anchor. Windows that would leave the trace are dropped and counted.
    """
    if not 1.0 <= window_ms <= 3.0:
        raise ValueError(f"window_ms must be within [1, 3], got {window_ms}")
    fs = filtered.fs_hz
    width = int(round(window_ms * fs / 1000.0))
    if pre_ms is None:
        anchor = int(round(0.3 * width))
    else:
        if not 0 <= pre_ms < window_ms:
            raise ValueError("pre_ms must lie in [0, window_ms)")
        anchor = int(round(pre_ms * fs / 1000.0))
    source = np.asarray(filtered.samples, dtype=np.float64)
    times = np.asarray(times, dtype=np.int64)
    starts = times - anchor
    inside = (starts >= 0) & (starts + width <= len(source))
    starts, times = starts[inside], times[inside]
    return SnippetSet(
        window_ms=window_ms,
        snippets=_cut(source, starts, width, padded_length(width)),
        alignment="none",
        times=times,
        anchor=anchor,
        window_samples=width,
        source=source,
        dropped=int(np.count_nonzero(~inside)),
        source_index=np.flatnonzero(inside),
    )


def align(snips: SnippetSet, mode: str = "peak", max_iter: int = 16) -> SnippetSet:
    """Re-cut every window so its largest ``|sample|`` sits on the anchor.

    Windows are re-extracted from the source trace, never rolled. A re-cut
    can expose a larger sample, so cutting repeats until the peak is stable;
    rows that run off the trace or fail to settle are dropped.
    """
    if mode == "none":
        return snips
    if mode != "peak":
        raise ValueError(f"unknown alignment mode {mode!r}")
    src, width, anchor = snips.source, snips.window_samples, snips.anchor
    times = snips.times.copy()
    alive = np.ones(len(times), dtype=bool)
    settled = np.zeros(len(times), dtype=bool)
    for _ in range(max_iter):
        todo = np.flatnonzero(alive & ~settled)
        if len(todo) == 0:
            break
        starts = times[todo] - anchor
        ok = (starts >= 0) & (starts + width <= len(src))
        alive[todo[~ok]] = False
        todo, starts = todo[ok], starts[ok]
        rows = _cut(src, starts, width, width)
        peak = np.argmax(np.abs(rows), axis=1) if len(rows) else np.zeros(0, dtype=np.int64)
        done = peak == anchor
        settled[todo[done]] = True
        times[todo[~done]] = starts[~done] + peak[~done]
    keep = alive & settled
    times = times[keep]
    return replace(
        snips,
        snippets=_cut(src, times - anchor, width, snips.snippets.shape[1]),
        alignment="peak",
        times=times,
        dropped=snips.dropped + int(np.count_nonzero(~keep)),
        source_index=None if snips.source_index is None else snips.source_index[keep],
    )


def spike_free_peaks(filtered: Recording, gt_times, margin_ms: float = 2.0, lockout_ms: float = 1.0):
    """Local maxima of ``|x|`` at least ``margin_ms`` from every event.

    These are the negatives of the detection ROC: what the detector would
    see where no spike occurred. Peaks are thinned with the same lockout as
    :func:`detect`, with no threshold applied.
    """
    x = np.asarray(filtered.samples, dtype=np.float64)
    ax = np.abs(x)
    margin = int(round(margin_ms * filtered.fs_hz / 1000.0))
    blocked = np.zeros(len(x) + 1, dtype=np.int64)
    gt_times = np.asarray(gt_times, dtype=np.int64)
    np.add.at(blocked, np.clip(gt_times - margin, 0, len(x)), 1)
    np.add.at(blocked, np.clip(gt_times + margin + 1, 0, len(x)), -1)
    free = np.cumsum(blocked[:-1]) == 0
    cand = local_peaks(ax)
    cand = cand[free[cand]]
    if len(cand) == 0:
        return cand
    lockout = max(int(round(lockout_ms * filtered.fs_hz / 1000.0)), 1)
    order = cand[np.lexsort((cand, -ax[cand]))]
    keep = kernels.lockout_select(order, len(x), lockout)
    return np.sort(order[keep])


def event_peak_scores(filtered: Recording, times, noise_sd, half_window_ms: float = 0.5):
    """Largest ``|x|`` within ``half_window_ms`` of each time, in noise-sd units."""
    x = np.abs(np.asarray(filtered.samples, dtype=np.float64))
    h = int(round(half_window_ms * filtered.fs_hz / 1000.0))
    times = np.asarray(times, dtype=np.int64)
    idx = np.clip(times[:, None] + np.arange(-h, h + 1)[None, :], 0, len(x) - 1)
    return x[idx].max(axis=1) / noise_sd
