"""End-to-end runs and SNR sweeps, producing JSON-ready reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import hwcost, metrics, pipeline, xbar
from .cluster import kmeans
from .datagen import GroundTruth, Recording, read_dataset
from .errors import ConfigError, StageError
from .features import EXTRACTORS, integer_filter_features, select_features
from .wavelet import WaveletSpec, build_dwt_matrices, dwt

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALIGNMENTS = ("none", "peak")
CSV_COLUMNS = (
    "snr",
    "extractor",
    "alignment",
    "detection_accuracy",
    "detection_auroc",
    "classification_accuracy",
    "aggregate_icv",
    "status",
)


@dataclass
class RunConfig:
    dataset: str | None = None
    lo_hz: float = 300.0
    hi_hz: float = 3000.0
    filter_order: int = 4
    causal: bool = False
    k: float = 4.0
    lockout_ms: float = 1.0
    tolerance_ms: float = 0.5
    window_ms: float = 2.0
    pre_ms: float | None = None
    alignment: str = "none"
    extractor: str = "dwt_xbar"
    wavelet: str = "haar"
    levels: int = 5
    n_features: int = 3
    device: dict = field(default_factory=dict)
    hw_calibration: str = "paper_table3"
    oracle_detection: bool = False
    icv_space: str = "waveform"
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown run config key(s): {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.extractor not in EXTRACTORS:
            raise ConfigError(f"extractor must be one of {EXTRACTORS}, got {self.extractor!r}")
        if self.alignment not in ALIGNMENTS:
            raise ConfigError(f"alignment must be one of {ALIGNMENTS}, got {self.alignment!r}")
        if self.icv_space not in ("waveform", "features"):
            raise ConfigError("icv_space must be 'waveform' or 'features'")
        if self.n_features not in (2, 3):
            raise ConfigError("n_features must be 2 or 3")

    @property
    def filter_spec(self):
        return pipeline.FilterSpec(self.lo_hz, self.hi_hz, self.filter_order, self.causal)

    def to_dict(self):
        return asdict(self)


@dataclass
class Prepared:
    """Filtered trace plus detection-stage results, shared by cells of a sweep."""

    recording: Recording
    gt: GroundTruth
    filtered: Recording
    detection: pipeline.DetectionResult
    match: metrics.MatchReport
    criteria: dict


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError):
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
        raise StageError(name, exc) from exc


def prepare(recording: Recording, gt: GroundTruth, cfg: RunConfig) -> Prepared:
    """Stages (a) and (b) plus detection criteria."""
    filtered = _stage("bandpass", pipeline.bandpass, recording, cfg.filter_spec)
    det = _stage("detection", pipeline.detect, filtered, cfg.k, cfg.lockout_ms)
    match = _stage("detection", metrics.match_detections, gt, det, cfg.tolerance_ms, recording.fs_hz)
    sd = det.noise_sd if det.noise_sd > 0 else 1.0
    pos = pipeline.event_peak_scores(filtered, gt.times, sd, cfg.tolerance_ms)
    neg_t = pipeline.spike_free_peaks(filtered, gt.times, lockout_ms=cfg.lockout_ms)
    neg = np.abs(filtered.samples[neg_t]) / sd
    criteria = {
        "detection_accuracy": metrics.detection_accuracy(match) if (match.tp + match.fp + match.fn) else None,
        "detection_auroc": metrics.auroc(pos, neg) if len(pos) and len(neg) else None,
    }
    return Prepared(recording, gt, filtered, det, match, criteria)


def _sorting_input(prep: Prepared, cfg: RunConfig):
    """Spike times and true units for the classification stage.

    Only correctly detected spikes are sorted, so false positives cannot
    affect classification accuracy; with oracle detection every
    ground-truth event is used.
    """
    if cfg.oracle_detection:
        return prep.gt.times, prep.gt.units
    if not prep.match.pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    gt_idx, det_idx = np.array(prep.match.pairs).T
    order = np.argsort(prep.detection.times[det_idx], kind="stable")
    return prep.detection.times[det_idx][order], prep.gt.units[gt_idx][order]


def extract_features(snips, cfg: RunConfig):
    """Stage (d). Returns ``(FeatureMatrix, telemetry or None)``."""
    if cfg.extractor == "int_filter":
        return integer_filter_features(snips), None
    spec = WaveletSpec(cfg.wavelet, cfg.levels)
    if cfg.extractor == "dwt_ref":
        coeffs = dwt(snips.snippets, spec)
        return select_features(coeffs, cfg.n_features, "dwt_ref"), None
    mats = build_dwt_matrices(spec, snips.snippets.shape[1])
    device = xbar.DeviceModel.from_dict(cfg.device) if cfg.device else xbar.DeviceModel()
    state = xbar.program(mats, device, seed=cfg.seed)
    coeffs, telemetry = xbar.dwt_on_crossbar(snips.snippets, state, seed=cfg.seed)
    return select_features(coeffs, cfg.n_features, "dwt_xbar"), telemetry


def classify(prep: Prepared, cfg: RunConfig):
    """Stages (c)-(e) on the prepared trace; returns the report sections."""
    times, truth = _sorting_input(prep, cfg)
    snips = _stage("snippets", pipeline.extract_snippets, prep.filtered, times, cfg.window_ms, cfg.pre_ms)
    snips = _stage("alignment", pipeline.align, snips, cfg.alignment)
    truth = truth[snips.source_index]
    n_units = len(np.unique(truth))
    if n_units == 0 or snips.n_spikes < max(n_units, cfg.n_features):
        raise StageError("classification", ValueError(f"only {snips.n_spikes} spikes available for sorting"))
    feats, telemetry = _stage("features", extract_features, snips, cfg)
    labels = _stage("classification", kmeans, feats, n_units, cfg.seed)
    accuracy = metrics.classification_accuracy(labels, truth)
    icv_input = snips if cfg.icv_space == "waveform" else feats.values
    stats = metrics.icv(icv_input, labels)
    section = {
        "n_spikes": int(snips.n_spikes),
        "dropped": int(snips.dropped),
        "k": int(n_units),
        "selected_indices": feats.selected_indices,
        "icv_per_cluster": stats.icv_per_cluster,
        "cluster_sizes": stats.counts,
    }
    return accuracy, stats.aggregate_icv, section, telemetry, feats


def run(recording: Recording, gt: GroundTruth, cfg: RunConfig, prep: Prepared | None = None, dataset_info=None):
    """Full pipeline on one dataset; returns ``(report dict, FeatureMatrix)``."""
    cfg.validate()
    prep = prep or prepare(recording, gt, cfg)
    accuracy, agg_icv, section, telemetry, feats = classify(prep, cfg)
    hw = None
    if telemetry is not None:
        params = hwcost.load_params(cfg.hw_calibration)
        hw = hwcost.estimate(params, telemetry, {"n_spikes": section["n_spikes"], "n_channels": 1}).to_dict()
    det = prep.detection
    report = {
        "kind": "run",
        "schema_version": SCHEMA_VERSION,
        "dataset": dataset_info or _dataset_info(recording, gt),
        "config": cfg.to_dict(),
        "criteria": {
            "detection_accuracy": prep.criteria["detection_accuracy"],
            "detection_auroc": prep.criteria["detection_auroc"],
            "classification_accuracy": accuracy,
            "icv": agg_icv,
        },
        "detection": {
            "tp": prep.match.tp,
            "fp": prep.match.fp,
            "fn": prep.match.fn,
            "n_detections": int(len(det.times)),
            "threshold": det.threshold_used,
            "tolerance_ms": cfg.tolerance_ms,
        },
        "classification": section,
        "xbar": telemetry,
        "hw": hw,
    }
    return report, feats


def _dataset_info(recording, gt, path=None):
    meta = recording.meta
    return {
        "path": None if path is None else str(path),
        "fs_hz": recording.fs_hz,
        "n_samples": int(recording.n_samples),
        "n_events": int(len(gt)),
        "snr_target": meta.get("snr_target"),
        "snr_measured": meta.get("snr_measured"),
        "seed": meta.get("seed"),
    }


def run_dataset(path, cfg: RunConfig):
    path = Path(path)
    rec, gt = read_dataset(path)
    return run(rec, gt, cfg, dataset_info=_dataset_info(rec, gt, path))


def dumps(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# sweeps


def sweep(datasets: dict, cfg: RunConfig, extractors=("dwt_xbar", "int_filter"), alignments=ALIGNMENTS):
    """Full factorial over ``{snr: dataset dir}`` x extractors x alignments.

    A cell that cannot run is kept as a row with ``status`` set and null
    metrics, so gaps are explicit.
    """
    rows, cell_reports = [], {}
    for snr in sorted(datasets):
        path = datasets[snr]
        prep = None
        try:
            rec, gt = read_dataset(path)
            prep = prepare(rec, gt, cfg)
        except Exception as exc:  # noqa: BLE001
            log.warning("dataset for snr=%s unusable: %s", snr, exc)
            status = "missing" if not Path(path).exists() else f"error: {exc}"
        for ext in extractors:
            for al in alignments:
                row = {"snr": float(snr), "extractor": ext, "alignment": al}
                if prep is None:
                    row.update(dict.fromkeys(CSV_COLUMNS[3:7]), status=status)
                    rows.append(row)
                    continue
                cell = RunConfig(**{**cfg.to_dict(), "extractor": ext, "alignment": al, "dataset": str(path)})
                try:
                    rep, _ = run(rec, gt, cell, prep=prep, dataset_info=_dataset_info(rec, gt, path))
                except StageError as exc:
                    row.update(dict.fromkeys(CSV_COLUMNS[3:7]), status=f"error: {exc}")
                    rows.append(row)
                    continue
                c = rep["criteria"]
                row.update(
                    detection_accuracy=c["detection_accuracy"],
                    detection_auroc=c["detection_auroc"],
                    classification_accuracy=c["classification_accuracy"],
                    aggregate_icv=c["icv"],
                    status="ok",
                )
                rows.append(row)
                cell_reports[(float(snr), ext, al)] = rep
    return _assemble(rows, cell_reports, cfg, extractors, alignments)


def _safe_pcc(x, y):
    pts = [(a, b) for a, b in zip(x, y) if a is not None and b is not None]
    if len(pts) < 2:
        return None
    try:
        return metrics.pcc([p[0] for p in pts], [p[1] for p in pts])
    except ValueError:
        return None


def _assemble(rows, cell_reports, cfg, extractors, alignments):
    ok = [r for r in rows if r["status"] == "ok"]
    pcc_all = _safe_pcc([r["aggregate_icv"] for r in ok], [r["classification_accuracy"] for r in ok])
    pcc_by_ext = {}
    for ext in extractors:
        sel = [r for r in ok if r["extractor"] == ext]
        pcc_by_ext[ext] = _safe_pcc([r["aggregate_icv"] for r in sel], [r["classification_accuracy"] for r in sel])
    hw = next((rep["hw"] for rep in cell_reports.values() if rep["hw"] is not None), None)
    return {
        "kind": "sweep",
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "extractors": list(extractors),
        "alignments": list(alignments),
        "rows": rows,
        "pcc_icv_accuracy": pcc_all,
        "abs_pcc_icv_accuracy": None if pcc_all is None else abs(pcc_all),
        "pcc_by_extractor": pcc_by_ext,
        "hw": hw,
    }


def sweep_csv(report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report["rows"]:
        writer.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def plot_data(report) -> dict:
    """x/y series for the alignment, ICV and accuracy-vs-SNR panels."""
    rows = [r for r in report["rows"] if r["status"] == "ok"]

    def series(ext, al, key):
        sel = sorted((r for r in rows if r["extractor"] == ext and r["alignment"] == al), key=lambda r: r["snr"])
        return {"x": [r["snr"] for r in sel], "y": [r[key] for r in sel]}

    exts, als = report["extractors"], report["alignments"]
    return {
        "plot_alignment.json": {
            "x_label": "snr",
            "y_label": "classification_accuracy",
            "series": {f"{e}/{a}": series(e, a, "classification_accuracy") for e in exts for a in als},
        },
        "plot_icv.json": {
            "x_label": "snr",
            "y_label": "aggregate_icv",
            "series": {f"{e}/{a}": series(e, a, "aggregate_icv") for e in exts for a in als},
        },
        "plot_icv_vs_accuracy.json": {
            "x_label": "aggregate_icv",
            "y_label": "classification_accuracy",
            "series": {
                e: {"x": [r["aggregate_icv"] for r in rows if r["extractor"] == e],
                    "y": [r["classification_accuracy"] for r in rows if r["extractor"] == e]}
                for e in exts
            },
            "pcc": report["pcc_icv_accuracy"],
        },
    }
