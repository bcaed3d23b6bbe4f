"""Per-spike feature vectors: wavelet-coefficient selection and the
integer-arithmetic filter baseline."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

EXTRACTORS = ("dwt_ref", "dwt_xbar", "int_filter")

INT_BITS = 10


@dataclass
class FeatureMatrix:
    values: np.ndarray
    selected_indices: list
    extractor: str

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] not in (2, 3):
            raise ValueError(f"feature matrix must be (n, 2) or (n, 3), got {self.values.shape}")
        if self.extractor not in EXTRACTORS:
            raise ValueError(f"unknown extractor {self.extractor!r}")
        if np.isnan(self.values).any():
            raise ValueError("feature matrix contains NaN")

    @property
    def n_spikes(self):
        return self.values.shape[0]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# extractor={self.extractor} selected_indices={','.join(map(str, self.selected_indices))}\n")
        buf.write(",".join(f"f{i}" for i in range(self.values.shape[1])) + "\n")
        np.savetxt(buf, self.values, delimiter=",", fmt="%.17g")
        return buf.getvalue()


def select_features(coeffs, d: int = 3, extractor: str = "dwt_ref") -> FeatureMatrix:
    """Keep the ``d`` coefficient columns with the largest variance across spikes.

    Ties go to the lower column index.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    if coeffs.ndim != 2 or coeffs.shape[1] < d:
        raise ValueError(f"need at least {d} coefficient columns")
    if coeffs.shape[0] < d:
        raise ValueError(f"need at least {d} spikes, got {coeffs.shape[0]}")
    # sorting makes the float sums independent of spike order; centring on the
    # median sample keeps constant columns at exactly zero variance
    srt = np.sort(coeffs, axis=0)
    var = (srt - srt[len(srt) // 2]).var(axis=0)
    order = np.lexsort((np.arange(len(var)), -var))
    idx = [int(i) for i in order[:d]]
    return FeatureMatrix(values=coeffs[:, idx].copy(), selected_indices=idx, extractor=extractor)


def quantize(x, full_scale, bits: int = INT_BITS):
    """Signed ``bits``-bit quantization; returns integer codes and the step."""
    step = full_scale / 2 ** (bits - 1)
    lo, hi = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    codes = np.clip(np.round(np.asarray(x, dtype=np.float64) / step), lo, hi).astype(np.int64)
    return codes, step


def integer_filter_features(snippets, window: int | None = None, full_scale: float | None = None) -> FeatureMatrix:
    """Derivative-extrema features in integer arithmetic.

    Samples are quantized to 10-bit signed codes; the features are the
    maximum and the minimum of the first difference and the maximum of the
    second difference. They are returned in signal units (codes times the
    quantization step).

    ``snippets`` may be a :class:`~spikebench.pipeline.SnippetSet`, which
    supplies the unpadded ``window``; ``full_scale`` defaults to the largest
    magnitude in the set.
    """
    if hasattr(snippets, "snippets"):
        window = snippets.window_samples if window is None else window
        snippets = snippets.snippets
    x = np.atleast_2d(np.asarray(snippets, dtype=np.float64))
    window = x.shape[1] if window is None else window
    if window < 8:
        raise ValueError(f"snippet length must be >= 8, got {window}")
    x = x[:, :window]
    if full_scale is None:
        full_scale = float(np.max(np.abs(x))) if x.size else 0.0
    if full_scale <= 0:
        return FeatureMatrix(values=np.zeros((x.shape[0], 3)), selected_indices=[0, 1, 2], extractor="int_filter")

    codes, step = quantize(x, full_scale)
    d1 = codes[:, 1:] - codes[:, :-1]
    d2 = d1[:, 1:] - d1[:, :-1]
    feats = np.stack([d1.max(axis=1), d1.min(axis=1), d2.max(axis=1)], axis=1)
    return FeatureMatrix(values=feats * step, selected_indices=[0, 1, 2], extractor="int_filter")
