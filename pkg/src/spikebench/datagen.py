"""Ground-truthed synthetic extracellular recordings.

Recordings are built at 96 kHz from a bank of parametric spike templates,
mixed with far-field background activity and a white floor, anti-alias
filtered and decimated to 24 kHz. Noise is scaled in closed loop so that the
measured SNR (mean placed spike peak over spike-free noise std) hits the
requested value.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import kernels
from .errors import ConfigError, DatasetParseError, MeasurementError

FS_SYNTH_HZ = 96000
FS_OUT_HZ = 24000
SNR_CAP = 1e6
# samples closer than this to any event are excluded from noise statistics
SPIKE_FREE_MARGIN_MS = 3.0
MAX_EVENTS = 10**7

# far-field background: event rate over all bank templates and amplitude range
_BG_RATE_HZ = 20000.0
_BG_AMPLITUDE = (0.05, 0.2)
_BANK_MAX_XCORR = 0.95


@dataclass
class Template:
    id: int
    shape: np.ndarray
    duration_ms: float
    params: dict = field(default_factory=dict)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(np.abs(self.shape)))


@dataclass
class DatasetConfig:
    seed: int = 0
    n_units: int = 3
    duration_s: float = 60.0
    firing_rate_hz: float = 20.0
    refractory_ms: float = 2.0
    snr: float = 4.0
    fs_synth_hz: int = FS_SYNTH_HZ
    fs_out_hz: int = FS_OUT_HZ
    template_ids: list | None = None  # None: the most mutually distinct bank templates
    bank_size: int = 16
    bank_seed: int = 0

    def validate(self):
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")
        if self.template_ids is not None and len(self.template_ids) != self.n_units:
            raise ConfigError(f"template_ids has {len(self.template_ids)} entries for {self.n_units} units")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.firing_rate_hz <= 0:
            raise ValueError("firing_rate_hz must be > 0")
        if self.refractory_ms < 0:
            raise ValueError("refractory_ms must be >= 0")
        if not self.snr > 0:
            raise ValueError(f"snr must be > 0, got {self.snr}")
        if self.fs_synth_hz % self.fs_out_hz:
            raise ConfigError("fs_synth_hz must be an integer multiple of fs_out_hz")
        if self.duration_s * self.firing_rate_hz * self.n_units >= MAX_EVENTS:
            raise ValueError("requested event count exceeds desk-scale guard")
        if 1000.0 / self.firing_rate_hz <= self.refractory_ms:
            raise ValueError("mean inter-spike interval must exceed the refractory period")

    @property
    def decimation(self) -> int:
        return self.fs_synth_hz // self.fs_out_hz


@dataclass
class Recording:
    samples: np.ndarray
    fs_hz: float
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.samples)


@dataclass
class GroundTruth:
    """Spike events at the output rate, sorted by time."""

    times: np.ndarray
    units: np.ndarray

    @property
    def events(self):
        return list(zip(self.times.tolist(), self.units.tolist()))

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        return (
            isinstance(other, GroundTruth)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.units, other.units)
        )


# ---------------------------------------------------------------------------
# templates


def _gamma_bump(t, k, theta):
    out = np.zeros_like(t)
    pos = t > 0
    x = t[pos] / theta
    # peak-normalized gamma kernel, maximum 1 at t = (k - 1) * theta
    out[pos] = np.exp((k - 1) * (np.log(x) - np.log(k - 1)) - x + (k - 1))
    return out


def _tail_taper(n, frac=0.25):
    w = np.ones(n)
    m = max(int(n * frac), 1)
    w[n - m:] = 0.5 * (1 + np.cos(np.pi * np.arange(1, m + 1) / m))
    return w


def _max_xcorr(a, b):
    c = np.correlate(a, b, mode="full")
    return float(np.max(np.abs(c)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def make_template_bank(n, seed, fs_hz=FS_SYNTH_HZ):
    """Generate ``n`` distinct peak-normalized spike templates.

    Each template is a fast negative gamma trough, optionally preceded by a
    small positive bump and followed by a slower positive
    after-hyperpolarization bump at most 60% as tall; the tail is tapered to
    zero. Candidates whose normalized cross-correlation with an accepted
    template exceeds 0.95 at any lag are rejected, so the bank stays diverse.
    """
    if n < 1:
        raise ValueError(f"template bank size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    bank = []
    attempts = 0
    while len(bank) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise RuntimeError("could not draw a sufficiently diverse template bank")
        duration_ms = rng.uniform(1.2, 2.8)
        trough_ms = rng.uniform(0.12, 0.5)
        k1 = rng.uniform(2.0, 8.0)
        ahp_delay_ms = rng.uniform(0.15, 0.6)
        k2 = rng.uniform(2.0, 6.0)
        ahp_ratio = rng.uniform(0.05, 0.6)
        pre_ratio = rng.uniform(0.0, 0.35)
        onset_ms = rng.uniform(0.1, 0.35)
        length = int(round(duration_ms * fs_hz / 1000))
        t = np.arange(length) * 1000.0 / fs_hz - onset_ms
        trough = _gamma_bump(t, k1, trough_ms / (k1 - 1))
        ahp_peak = trough_ms + ahp_delay_ms
        ahp = _gamma_bump(t, k2, ahp_peak / (k2 - 1))
        pre = _gamma_bump(t + 0.1, 3.0, max(trough_ms, 0.1) / 2.0)
        shape = pre_ratio * pre - trough + ahp_ratio * ahp
        shape *= _tail_taper(length)
        # the trough must dominate
        if shape[np.argmax(np.abs(shape))] >= 0 or np.max(shape) > 0.6 * -np.min(shape):
            continue
        shape = shape / -np.min(shape)
        if any(_max_xcorr(shape, other.shape) > _BANK_MAX_XCORR for other in bank):
            continue
        params = {
            "trough_ms": trough_ms,
            "trough_k": k1,
            "ahp_delay_ms": ahp_delay_ms,
            "ahp_k": k2,
            "ahp_ratio": ahp_ratio,
            "pre_ratio": pre_ratio,
            "onset_ms": onset_ms,
        }
        bank.append(Template(id=len(bank), shape=shape, duration_ms=duration_ms, params=params))
    return bank


# ---------------------------------------------------------------------------
# resampling


def _antialias_sos(fs_in, fs_out):
    return signal.butter(8, 0.4 * fs_out, btype="lowpass", fs=fs_in, output="sos")


def antialias_decimate(x, fs_in=FS_SYNTH_HZ, fs_out=FS_OUT_HZ):
    """Zero-phase low-pass at ``0.4 * fs_out`` followed by integer decimation."""
    if fs_in % fs_out:
        raise ValueError("fs_in must be an integer multiple of fs_out")
    q = fs_in // fs_out
    y = signal.sosfiltfilt(_antialias_sos(fs_in, fs_out), x)
    return y[::q]


def _placed_templates(template, fs_in, fs_out):
    """Template as it appears at the output rate, one row per sub-sample phase.

    Returns ``(rows, offset)``: ``rows[r, j]`` is the output-rate sample at
    ``t_out + offset + j`` for an event with ``t_in = q * t_out + r``.
    """
    q = fs_in // fs_out
    pad = 64 * q
    s = np.zeros(len(template.shape) + 2 * pad)
    s[pad:pad + len(template.shape)] = template.shape
    sf = signal.sosfiltfilt(_antialias_sos(fs_in, fs_out), s)
    p = pad + template.peak_index  # filtered-template index aligned to the event
    j_lo = -((p) // q) + 1
    j_hi = (len(sf) - 1 - p) // q - 1
    js = np.arange(j_lo, j_hi + 1)
    rows = np.stack([sf[q * js - r + p] for r in range(q)])
    keep = np.max(np.abs(rows), axis=0) > 1e-4
    idx = np.flatnonzero(keep)
    return rows[:, idx[0]:idx[-1] + 1], int(js[idx[0]])


# ---------------------------------------------------------------------------
# synthesis


def _spike_train(rng, rate_hz, refractory_ms, n_samples, fs, lo, hi):
    # dead-time Poisson process in integer samples; the extra q samples keep
    # the refractory bound intact after decimation by q
    dead = math.ceil(refractory_ms * fs / 1000.0) + 4
    mean_isi = fs / rate_hz
    mu = max(mean_isi - dead + 0.5, 1e-9)
    expected = n_samples / mean_isi
    n_draw = int(expected + 10 * math.sqrt(expected) + 20)
    isi = dead + np.floor(rng.exponential(mu, size=n_draw)).astype(np.int64)
    t = np.cumsum(isi) - dead + int(rng.integers(0, dead + 1))
    t = t[t < n_samples]
    return t[(t >= lo) & (t < hi)]


def _place(out, times, amplitudes, template):
    """Add amplitude-scaled template copies with their peaks at ``times``."""
    kernels.scatter_templates(out, times - template.peak_index, amplitudes, template.shape)


def _spike_free_mask(n, times, fs_hz):
    margin = int(math.ceil(SPIKE_FREE_MARGIN_MS * fs_hz / 1000.0))
    covered = np.zeros(n + 1, dtype=np.int64)
    lo = np.clip(times - margin, 0, n)
    hi = np.clip(times + margin + 1, 0, n)
    np.add.at(covered, lo, 1)
    np.add.at(covered, hi, -1)
    return np.cumsum(covered[:n]) == 0


def distinct_templates(bank, n):
    """Greedy pick of ``n`` mutually dissimilar template ids.

    Starts from the first template and repeatedly adds the one whose largest
    cross-correlation with those already chosen is smallest (lowest id on
    ties).
    """
    if not 1 <= n <= len(bank):
        raise ConfigError(f"cannot pick {n} templates from a bank of {len(bank)}")
    chosen = [0]
    while len(chosen) < n:
        rest = [i for i in range(len(bank)) if i not in chosen]
        worst = [max(_max_xcorr(bank[i].shape, bank[j].shape) for j in chosen) for i in rest]
        chosen.append(rest[int(np.argmin(worst))])
    return [bank[i].id for i in chosen]


def synthesize(config: DatasetConfig, bank):
    """Build a recording and its ground truth from ``config``.

    Spike trains use a dead-time Poisson process at the synthesis rate, and
    the background is a dense sum of low-amplitude template copies blended
    50/50 in power with white noise. The noise is rescaled until
    :func:`measure_snr` agrees with ``config.snr`` to within 0.5%.
    """
    config.validate()
    by_id = {t.id: t for t in bank}
    if config.template_ids is None:
        config = replace(config, template_ids=distinct_templates(bank, config.n_units))
    missing = [i for i in config.template_ids if i not in by_id]
    if missing:
        raise ConfigError(f"template ids {missing} not in bank")

    q = config.decimation
    n_out = int(round(config.duration_s * config.fs_out_hz))
    n_in = n_out * q
    spk_seq, bg_seq, white_seq = np.random.SeedSequence(config.seed).spawn(3)
    rng_spk = np.random.default_rng(spk_seq)
    rng_bg = np.random.default_rng(bg_seq)
    rng_white = np.random.default_rng(white_seq)

    fg = np.zeros(n_in)
    times_in, units = [], []
    for uid in config.template_ids:
        tpl = by_id[uid]
        lo = tpl.peak_index + 64 * q
        hi = n_in - (len(tpl.shape) - tpl.peak_index) - 64 * q
        t = _spike_train(rng_spk, config.firing_rate_hz, config.refractory_ms, n_in, config.fs_synth_hz, lo, hi)
        _place(fg, t, np.ones(len(t)), tpl)
        times_in.append(t)
        units.append(np.full(len(t), uid, dtype=np.int64))
    times_in = np.concatenate(times_in)
    units = np.concatenate(units)
    order = np.argsort(times_in, kind="stable")
    times_in, units = times_in[order], units[order]
    gt = GroundTruth(times=times_in // q, units=units)

    bg = np.zeros(n_in)
    n_bg = rng_bg.poisson(_BG_RATE_HZ * config.duration_s)
    bg_tpl = rng_bg.integers(0, len(bank), size=n_bg)
    bg_t = rng_bg.integers(0, n_in, size=n_bg)
    bg_amp = rng_bg.uniform(*_BG_AMPLITUDE, size=n_bg) * rng_bg.choice([-1.0, 1.0], size=n_bg)
    for k, tpl in enumerate(bank):
        sel = bg_tpl == k
        _place(bg, bg_t[sel], bg_amp[sel], tpl)
    white = rng_white.standard_normal(n_in)

    fs_in, fs_out = config.fs_synth_hz, config.fs_out_hz
    fg24 = antialias_decimate(fg, fs_in, fs_out)
    bg24 = antialias_decimate(bg, fs_in, fs_out)
    white24 = antialias_decimate(white, fs_in, fs_out)
    free = _spike_free_mask(n_out, gt.times, fs_out)
    if not free.any():
        raise MeasurementError("no spike-free samples to calibrate noise against")
    noise = math.sqrt(0.5) * bg24 / np.std(bg24[free]) + math.sqrt(0.5) * white24 / np.std(white24[free])
    noise /= np.std(noise[free])

    meta = asdict(config)
    meta.update(fs_hz=float(fs_out), n_samples=n_out)
    meta["templates"] = [
        {"id": uid, "duration_ms": by_id[uid].duration_ms, **by_id[uid].params} for uid in config.template_ids
    ]
    placed = {uid: _placed_templates(by_id[uid], fs_in, fs_out) for uid in set(gt.units.tolist())}

    numerator = _mean_placed_peak(fg24, gt, placed)
    scale = numerator / config.snr
    for _ in range(8):
        samples = (fg24 + scale * noise).astype(np.float32)
        measured = _snr_from_parts(samples, gt, placed, free)
        if abs(measured / config.snr - 1.0) < 0.005:
            break
        scale *= measured / config.snr
    meta.update(snr_target=float(config.snr), snr_measured=float(measured), noise_scale=float(scale))
    return Recording(samples=samples, fs_hz=float(fs_out), meta=meta), gt


# ---------------------------------------------------------------------------
# SNR


def _mean_placed_peak(x, gt, placed):
    """Mean over events of the least-squares fitted peak amplitude.

    For each event the recording segment is projected onto every sub-sample
    phase of its template; the phase with the largest explained energy wins.
    """
    peaks = np.empty(len(gt))
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    for uid, (rows, offset) in placed.items():
        sel = np.flatnonzero(gt.units == uid)
        if len(sel) == 0:
            continue
        width = rows.shape[1]
        starts = gt.times[sel] + offset
        idx = np.clip(starts[:, None] + np.arange(width)[None, :], 0, n - 1)
        seg = x[idx]
        valid = (starts >= 0) & (starts + width <= n)
        seg[~valid] = 0.0
        norms = np.sum(rows**2, axis=1)
        proj = seg @ rows.T  # (events, phases)
        best = np.argmax(proj**2 / norms[None, :], axis=1)
        amp = proj[np.arange(len(sel)), best] / norms[best]
        peaks[sel] = np.abs(amp)
    return float(np.mean(peaks))


def _snr_from_parts(x, gt, placed, free):
    noise_sd = float(np.std(np.asarray(x, dtype=np.float64)[free]))
    num = _mean_placed_peak(x, gt, placed)
    if noise_sd == 0 or num / noise_sd > SNR_CAP:
        return SNR_CAP
    return num / noise_sd


def measure_snr(recording: Recording, gt: GroundTruth, bank):
    """Mean placed spike peak amplitude over the std of spike-free samples.

    Peak amplitudes are least-squares fits of each event's template (at the
    recording rate) against the recording, so the ratio is invariant to a
    global rescaling of the samples. Returns at most ``SNR_CAP``.
    """
    if len(gt) == 0:
        raise ValueError("ground truth has no events")
    fs_in = int(recording.meta.get("fs_synth_hz", FS_SYNTH_HZ))
    fs_out = int(round(recording.fs_hz))
    by_id = {t.id: t for t in bank}
    placed = {uid: _placed_templates(by_id[uid], fs_in, fs_out) for uid in set(gt.units.tolist())}
    free = _spike_free_mask(recording.n_samples, gt.times, fs_out)
    if not free.any():
        raise MeasurementError("recording has no spike-free intervals")
    return _snr_from_parts(recording.samples, gt, placed, free)


def bank_for(recording: Recording):
    """Regenerate the template bank a recording was synthesized from."""
    meta = recording.meta
    return make_template_bank(int(meta["bank_size"]), int(meta["bank_seed"]), int(meta["fs_synth_hz"]))


# ---------------------------------------------------------------------------
# container I/O

_REQUIRED_META = {
    "fs_hz": (int, float),
    "n_samples": (int,),
    "duration_s": (int, float),
    "seed": (int,),
}


def write_dataset(path, recording: Recording, gt: GroundTruth):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.asarray(recording.samples, dtype="<f4").tofile(path / "recording.f32le")
    meta = dict(recording.meta)
    meta["fs_hz"] = float(recording.fs_hz)
    meta["n_samples"] = int(recording.n_samples)
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    events = [{"t": t, "unit": u} for t, u in gt.events]
    (path / "gt.json").write_text(json.dumps(events) + "\n")


def _load_json(path, name):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DatasetParseError(name, f"{name} is missing from {path.parent}") from None
    except json.JSONDecodeError as exc:
        raise DatasetParseError(name, f"{name} is not valid JSON: {exc}") from None


def read_dataset(path):
    path = Path(path)
    meta = _load_json(path / "meta.json", "meta.json")
    if not isinstance(meta, dict):
        raise DatasetParseError("meta.json", "meta.json must hold an object")
    for key, types in _REQUIRED_META.items():
        if key not in meta:
            raise DatasetParseError(key, f"meta.json lacks required field {key!r}")
        if isinstance(meta[key], bool) or not isinstance(meta[key], types):
            raise DatasetParseError(key, f"meta.json field {key!r} has wrong type")

    raw = path / "recording.f32le"
    if not raw.exists():
        raise DatasetParseError("recording.f32le", "recording.f32le is missing")
    nbytes = raw.stat().st_size
    if nbytes % 4 or nbytes // 4 != meta["n_samples"]:
        raise DatasetParseError(
            "n_samples", f"recording.f32le holds {nbytes / 4:g} samples, meta says {meta['n_samples']}"
        )
    samples = np.fromfile(raw, dtype="<f4").astype(np.float32)
    if not np.all(np.isfinite(samples)):
        raise DatasetParseError("recording.f32le", "recording contains NaN or Inf")

    events = _load_json(path / "gt.json", "gt.json")
    if not isinstance(events, list):
        raise DatasetParseError("gt.json", "gt.json must hold an array")
    try:
        times = np.array([e["t"] for e in events], dtype=np.int64)
        units = np.array([e["unit"] for e in events], dtype=np.int64)
    except (KeyError, TypeError) as exc:
        raise DatasetParseError("gt.json", f"gt.json event lacks field {exc}") from None
    if len(times) and (np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] >= len(samples)):
        raise DatasetParseError("t", "gt.json event times unsorted or out of range")

    rec = Recording(samples=samples, fs_hz=float(meta["fs_hz"]), meta=meta)
    return rec, GroundTruth(times=times, units=units)
