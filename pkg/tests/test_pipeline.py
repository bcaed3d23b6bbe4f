import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikebench import metrics, pipeline
from spikebench.datagen import DatasetConfig, Recording, synthesize
from spikebench.pipeline import FilterSpec

FS = 24000.0


def _rec(x, fs=FS):
    return Recording(np.asarray(x, dtype=np.float64), fs, {})


def _amplitude(f_hz, spec=FilterSpec()):
    t = np.arange(int(FS)) / FS
    y = pipeline.bandpass(_rec(np.sin(2 * np.pi * f_hz * t)), spec).samples
    return np.sqrt(2) * np.std(y[len(y) // 4: 3 * len(y) // 4])


def test_passband_and_stopband():
    assert abs(20 * np.log10(_amplitude(1000.0))) < 1.0
    assert 20 * np.log10(_amplitude(50.0)) <= -20.0


def test_dc_removed():
    y = pipeline.bandpass(_rec(np.ones(24000))).samples
    assert np.max(np.abs(y[4000:-4000])) < 1e-3


def test_causal_option_runs_forward_only():
    x = np.zeros(2000)
    x[1000] = 1.0
    y = pipeline.bandpass(_rec(x), FilterSpec(causal=True)).samples
    assert np.all(y[:1000] == 0)


@pytest.mark.parametrize("spec", [FilterSpec(lo_hz=3000, hi_hz=300), FilterSpec(hi_hz=12000), FilterSpec(order=1)])
def test_filter_spec_validation(spec):
    with pytest.raises(ValueError):
        spec.sos(FS)


def test_coefficients_json():
    d = json.loads(FilterSpec().coefficients_json(FS))
    assert d["order"] == 4 and len(d["sos"]) == 4


@given(st.integers(50, 800), st.floats(0.5, 5.0))
@settings(max_examples=40, deadline=None)
def test_zero_phase_symmetry(width, freq_khz):
    n = 4001
    k = np.arange(n) - n // 2
    pulse = np.exp(-0.5 * (k / width * 10) ** 2) * np.cos(2 * np.pi * freq_khz * 1000 * k / FS)
    y = pipeline.bandpass(_rec(pulse)).samples
    assert np.max(np.abs(y - y[::-1])) <= 1e-6 * max(np.max(np.abs(y)), 1e-12)


def test_detect_zero_signal():
    det = pipeline.detect(_rec(np.zeros(1000)))
    assert len(det.times) == 0


def test_detect_empty_and_bad_k():
    with pytest.raises(ValueError):
        pipeline.detect(_rec(np.zeros(0)))
    with pytest.raises(ValueError):
        pipeline.detect(_rec(np.ones(10)), k=0)


def test_detect_single_template_high_snr(bank):
    rec, gt = synthesize(DatasetConfig(duration_s=20.0, n_units=1, template_ids=[0], snr=16.0), bank)
    n_det = len(pipeline.detect(pipeline.bandpass(rec), k=4.0).times)
    n_gt = len(gt)
    assert abs(n_det - n_gt) <= 0.01 * n_gt


def test_detect_saturates_on_noise():
    x = np.random.default_rng(0).standard_normal(240000)
    det = pipeline.detect(_rec(x), k=0.1, lockout_ms=1.0)
    windows = len(x) / det.lockout_samples
    # peaks are spaced by at least one lockout and gaps stay short
    assert np.diff(det.times).min() >= det.lockout_samples
    assert 0.5 * windows <= len(det.times) <= windows


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_threshold_monotone(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(5000)
    x[rng.integers(0, 5000, 20)] += rng.uniform(3, 10, 20)
    prev = None
    for k in (1.0, 2.0, 3.0, 4.5, 6.0):
        t = set(pipeline.detect(_rec(x), k).times.tolist())
        assert prev is None or t <= prev
        prev = t


@given(st.integers(0, 2**31 - 1), st.integers(1, 400))
@settings(max_examples=25, deadline=None)
def test_detection_translation(seed, shift):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(6000)
    x[rng.integers(1000, 5000, 10)] += 8
    y = np.concatenate([rng.standard_normal(shift), x])
    # same noise estimate for both so only the shift differs
    a = pipeline.detect(_rec(x), 4.0).times
    b = pipeline.detect(_rec(y), 4.0 * pipeline.robust_noise_sd(x) / pipeline.robust_noise_sd(y)).times
    a_in = a[(a > 200) & (a < len(x) - 200)]
    b_in = b[(b > shift + 200) & (b < len(y) - 200)] - shift
    assert set(a_in.tolist()) == set(b_in.tolist())


def test_snippet_geometry():
    x = np.arange(1000, dtype=float)
    s = pipeline.extract_snippets(_rec(x), [100, 500, 900], window_ms=2.0)
    assert s.window_samples == 48 and s.snippets.shape == (3, 64) and s.anchor == 14
    np.testing.assert_array_equal(s.snippets[0, :48], x[86:134])
    assert np.all(s.snippets[:, 48:] == 0)


def test_snippet_edge_drop():
    s = pipeline.extract_snippets(_rec(np.zeros(1000)), [3, 500], window_ms=2.0, pre_ms=0.5)
    assert s.n_spikes == 1 and s.dropped == 1
    np.testing.assert_array_equal(s.source_index, [1])


@pytest.mark.parametrize("kw", [dict(window_ms=0.5), dict(window_ms=4.0), dict(window_ms=2.0, pre_ms=2.0)])
def test_snippet_preconditions(kw):
    with pytest.raises(ValueError):
        pipeline.extract_snippets(_rec(np.zeros(100)), [50], **kw)


def test_align_none_is_identity():
    s = pipeline.extract_snippets(_rec(np.random.default_rng(1).standard_normal(1000)), [100, 300])
    assert pipeline.align(s, "none") is s
    with pytest.raises(ValueError):
        pipeline.align(s, "centroid")


def test_align_jittered_copies(bank):
    tpl = bank[0]
    x = np.zeros(4000)
    shape = tpl.shape[::4]
    p = int(np.argmax(np.abs(shape)))
    for c in (1000, 2000):
        x[c - p: c - p + len(shape)] += shape
    s = pipeline.extract_snippets(_rec(x), [1000, 2003])
    a = pipeline.align(s, "peak")
    np.testing.assert_allclose(a.snippets[0], a.snippets[1], atol=1e-12)
    assert np.all(np.argmax(np.abs(a.valid), axis=1) == a.anchor)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_align_idempotent_and_anchored(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(3000)
    s = pipeline.extract_snippets(_rec(x), rng.integers(0, 3000, 30))
    a = pipeline.align(s, "peak")
    assert np.all(np.argmax(np.abs(a.valid), axis=1) == a.anchor)
    b = pipeline.align(a, "peak")
    np.testing.assert_array_equal(a.snippets, b.snippets)
    assert a.dropped + a.n_spikes == 30


def test_roc_inputs_separate_at_high_snr(small):
    rec, gt = small
    f = pipeline.bandpass(rec)
    det = pipeline.detect(f)
    pos = pipeline.event_peak_scores(f, gt.times, det.noise_sd)
    neg_t = pipeline.spike_free_peaks(f, gt.times)
    assert len(neg_t) > 0
    # negatives are at least 2 ms from every event
    d = np.min(np.abs(neg_t[:, None] - gt.times[None, :]), axis=1)
    assert d.min() > 48
    assert metrics.auroc(pos, np.abs(f.samples[neg_t]) / det.noise_sd) > 0.99
