"""Command-line entry point: ``spikebench {generate,run,sweep,report}``.

Exit codes: 0 success, 1 configuration error, 2 pipeline stage failure.
Stage failures print a JSON object naming the stage to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__, experiment, hwcost, report
from .datagen import DatasetConfig, make_template_bank, synthesize, write_dataset
from .errors import ConfigError, DatasetParseError, StageError

log = logging.getLogger("spikebench")

DEFAULT_SNR_LEVELS = (1.0, 2.0, 4.0, 8.0, 16.0)
EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _split(cfg, allowed, extra=()):
    unknown = set(cfg) - set(allowed) - set(extra)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return {k: v for k, v in cfg.items() if k in allowed}, {k: cfg[k] for k in extra if k in cfg}


def _prepare_out(out, force):
    out = Path(out)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    Path(path).write_text(text)
    log.info("wrote %s", path)


def snr_dirname(snr):
    return f"snr_{snr:g}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    cfg = _load_config(args.config)
    names = [f.name for f in fields(DatasetConfig)]
    base, extra = _split(cfg, names, ("snr_levels",))
    for key in ("duration_s", "n_units"):
        if getattr(args, key) is not None:
            base[key] = getattr(args, key)
    if args.seed is not None:
        base["seed"] = args.seed
    levels = args.snr_levels or extra.get("snr_levels") or DEFAULT_SNR_LEVELS
    levels = [float(s) for s in levels]
    if not levels or min(levels) <= 0:
        raise ConfigError("snr levels must be positive")
    out = _prepare_out(args.out or "datasets", args.force)
    try:
        template = DatasetConfig(**base)
        template.validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    bank = make_template_bank(template.bank_size, template.bank_seed)
    manifest = {"datasets": {}, "config": asdict(template), "snr_levels": levels}
    for snr in levels:
        rec, gt = synthesize(DatasetConfig(**{**asdict(template), "snr": snr}), bank)
        name = snr_dirname(snr)
        write_dataset(out / name, rec, gt)
        manifest["datasets"][format(snr, "g")] = {
            "path": name, "snr_measured": rec.meta["snr_measured"], "n_events": len(gt)
        }
        log.info("snr %g: measured %.4f, %d events", snr, rec.meta["snr_measured"], len(gt))
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _run_config(args, cfg, extra=()):
    names = [f.name for f in fields(experiment.RunConfig)]
    base, rest = _split(cfg, names, extra)
    for key in ("dataset", "extractor", "alignment", "hw_calibration"):
        if getattr(args, key, None) is not None:
            base[key] = getattr(args, key)
    if args.seed is not None:
        base["seed"] = args.seed
    if getattr(args, "oracle_detection", False):
        base["oracle_detection"] = True
    return experiment.RunConfig.from_dict(base), rest


def cmd_run(args):
    cfg, _ = _run_config(args, _load_config(args.config))
    if not cfg.dataset:
        raise ConfigError("no dataset given (--dataset or config key 'dataset')")
    try:
        rep, feats = experiment.run_dataset(cfg.dataset, cfg)
    except (FileNotFoundError, DatasetParseError) as exc:
        raise ConfigError(f"dataset {cfg.dataset}: {exc}") from None
    text = experiment.dumps(rep)
    if args.out:
        out = _prepare_out(args.out, args.force)
        _write(out / "run.json", text)
        _write(out / "features.csv", feats.to_csv())
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _discover(root):
    root = Path(root)
    manifest = root / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text())["datasets"]
        return {float(k): root / v["path"] for k, v in entries.items()}
    found = {}
    for d in sorted(root.glob("snr_*")):
        try:
            found[float(d.name[4:])] = d
        except ValueError:
            continue
    return found


def cmd_sweep(args):
    cfg, extra = _run_config(args, _load_config(args.config), ("extractors", "alignments", "snr_levels"))
    extractors = args.extractors or extra.get("extractors") or ["dwt_xbar", "int_filter"]
    alignments = args.alignments or extra.get("alignments") or list(experiment.ALIGNMENTS)
    datasets = _discover(args.datasets)
    levels = args.snr_levels or extra.get("snr_levels")
    if levels:
        # requested levels without a directory become explicit gaps
        datasets = {float(s): datasets.get(float(s), Path(args.datasets) / snr_dirname(float(s))) for s in levels}
    if not datasets:
        raise ConfigError(f"no datasets found under {args.datasets}")
    for ext in extractors:
        experiment.RunConfig(extractor=ext).validate()
    for al in alignments:
        experiment.RunConfig(alignment=al).validate()
    rep = experiment.sweep(datasets, cfg, extractors, alignments)
    out = _prepare_out(args.out or "sweep", args.force)
    _write(out / "sweep.json", experiment.dumps(rep))
    _write(out / "sweep.csv", experiment.sweep_csv(rep))
    for name, data in experiment.plot_data(rep).items():
        _write(out / name, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_report(args):
    path = Path(args.report)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"report {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"report {path} is not valid JSON: {exc}") from None
    reference = hwcost.load_report(args.compare).to_dict() if args.compare else None
    text = report.render(data, reference)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write(out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out", default=None, help="output directory (file for 'report')")
    common.add_argument("--force", action="store_true", help="write into a non-empty output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spikebench", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="synthesize one dataset per SNR level")
    g.add_argument("--snr-levels", type=float, nargs="+", default=None)
    g.add_argument("--duration-s", type=float, default=None)
    g.add_argument("--n-units", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    def run_flags(q):
        q.add_argument("--alignment", choices=experiment.ALIGNMENTS, default=None)
        q.add_argument("--hw-calibration", default=None, help="calibration JSON path or bundled name")
        q.add_argument("--oracle-detection", action="store_true",
                       help="sort every ground-truth event instead of the matched detections")

    r = sub.add_parser("run", parents=[common], help="run the pipeline on one dataset")
    r.add_argument("--dataset", default=None)
    r.add_argument("--extractor", choices=experiment.EXTRACTORS, default=None)
    run_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="extractor x alignment x SNR factorial")
    s.add_argument("--datasets", default="datasets", help="directory written by 'generate'")
    s.add_argument("--extractors", nargs="+", choices=experiment.EXTRACTORS, default=None)
    s.add_argument("--alignments", nargs="+", choices=experiment.ALIGNMENTS, default=None)
    s.add_argument("--snr-levels", type=float, nargs="+", default=None)
    run_flags(s)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("report", parents=[common], help="render a run or sweep JSON as a criteria table")
    t.add_argument("report", help="run.json or sweep.json")
    t.add_argument("--compare", default=None, help="published report to compare against, e.g. do2018_cmos")
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        err = {"error": "stage_failure", "stage": exc.stage, "message": str(exc.cause)}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
