"""Plain-text criteria tables for run and sweep reports, and their inverse."""

from __future__ import annotations

import json
import re
from importlib import resources

import jsonschema

from .errors import ConfigError
from .hwcost import HwReport, compare

NR = "N/R"

# report key, row label, display multiplier
CRITERIA = (
    ("detection_accuracy", "① Detection Accuracy (%)", 100.0),
    ("detection_auroc", "② Detection AUROC", 1.0),
    ("classification_accuracy", "③ Feature Extraction and Classification Accuracy (%)", 100.0),
    ("icv", "④ ICV", 1.0),
)
HW_ROWS = (
    ("power_mw_per_ch", "⑤ Power (mW/Ch)"),
    ("energy_mj_per_ch", "⑥ Energy (mJ/Ch)"),
    ("area_mm2_per_ch", "⑦ Area (mm²/Ch)"),
    ("latency_ms_per_ch", "⑧ Latency (ms/Ch)"),
)
_LABEL_TO_KEY = {label: (key, mult) for key, label, mult in CRITERIA}
_LABEL_TO_KEY.update({label: (key, 1.0) for key, label in HW_ROWS})
_SI_FIELD = {spec[0]: f for f, spec in HwReport.UNITS.items()}


def _schema():
    return json.loads((resources.files("spikebench") / "data" / "report.schema.json").read_text())


def validate(report):
    """Check ``report`` against the bundled JSON schema.

    Raises :class:`ConfigError` naming the first offending field.
    """
    validator = jsonschema.Draft202012Validator(_schema())
    errors = []
    for err in validator.iter_errors(report):
        if err.validator == "oneOf" and not err.absolute_path:
            # surface the failures of the branch matching ``kind``
            branch = {"run": 0, "sweep": 1}.get(report.get("kind") if isinstance(report, dict) else None)
            sub = [e for e in err.context if e.schema_path and e.schema_path[0] == branch]
            errors.extend(sub or [err])
        else:
            errors.append(err)
    errors.sort(key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"report field {where!r}: {err.message}")


def _num(v, mult=1.0):
    return NR if v is None else format(v * mult, ".12g")


def _table(rows, headers):
    widths = [max(len(str(r[i])) for r in rows + [headers]) for i in range(len(headers))]
    line = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(headers), line(["-" * w for w in widths])] + [line(r) for r in rows])


def _hw_rows(hw, reference=None):
    rows = []
    ratios = compare(HwReport.from_dict(hw), HwReport.from_dict(reference)) if hw and reference else None
    for key, label in HW_ROWS:
        row = [label, _num(None if hw is None else hw[key])]
        if reference is not None:
            row.append(_num(reference[key]))
            row.append(NR if ratios is None else _num(ratios[_SI_FIELD[key]]["ratio"]))
        rows.append(row)
    return rows


def render(report, reference=None) -> str:
    """Criteria ① to ⑧ as aligned text.

    ``reference`` is an optional serialized :class:`HwReport` shown as an
    extra column with ratios. Missing hardware figures print as ``N/R``.
    """
    validate(report)
    headers = ["Criterion", "Value"] + (["Reference", "Ratio"] if reference is not None else [])
    pad = [""] * (len(headers) - 2)
    if report["kind"] == "run":
        c = report["criteria"]
        rows = [[label, _num(c[key], mult)] + pad for key, label, mult in CRITERIA]
        rows += _hw_rows(report["hw"], reference)
        title = f"run: {report['config']['extractor']}, alignment {report['config']['alignment']}"
        return title + "\n" + _table(rows, headers) + "\n"

    out = ["sweep: classification criteria per cell"]
    cell_headers = ["snr", "extractor", "alignment"] + [label for _, label, _ in CRITERIA] + ["status"]
    cells = []
    for r in report["rows"]:
        vals = [r["detection_accuracy"], r["detection_auroc"], r["classification_accuracy"], r["aggregate_icv"]]
        cells.append([format(r["snr"], "g"), r["extractor"], r["alignment"]]
                     + [_num(v, m) for v, (_, _, m) in zip(vals, CRITERIA)] + [r["status"]])
    out.append(_table(cells, cell_headers))
    out.append("")
    out.append(f"pcc(icv, accuracy): {_num(report['pcc_icv_accuracy'])}")
    for ext, v in report["pcc_by_extractor"].items():
        out.append(f"pcc(icv, accuracy) [{ext}]: {_num(v)}")
    out.append("")
    out.append(_table(_hw_rows(report["hw"], reference), headers))
    return "\n".join(out) + "\n"


def parse(text) -> dict:
    """Recover criterion values (report units) from :func:`render` output.

    Run tables give ``{key: value}``; sweep tables give ``{"rows": [...],
    "hw": {...}}``. ``N/R`` becomes ``None``.
    """
    def value(tok, mult):
        return None if tok == NR else float(tok) / mult

    lines = text.splitlines()
    hw, crit, rows = {}, {}, []
    for ln in lines:
        for label, (key, mult) in _LABEL_TO_KEY.items():
            if ln.startswith(label + " ") or ln == label:
                tok = ln[len(label):].split()[0]
                (hw if key.endswith("_per_ch") else crit)[key] = value(tok, mult)
        m = re.match(r"^(\S+)\s+(dwt_ref|dwt_xbar|int_filter)\s+(none|peak)\s+(.*)$", ln)
        if m:
            toks = m.group(4).split()
            vals = [value(t, mult) for t, (_, _, mult) in zip(toks[:4], CRITERIA)]
            rows.append({"snr": float(m.group(1)), "extractor": m.group(2), "alignment": m.group(3),
                         "detection_accuracy": vals[0], "detection_auroc": vals[1],
                         "classification_accuracy": vals[2], "aggregate_icv": vals[3], "status": " ".join(toks[4:])})
    if rows:
        return {"rows": rows, "hw": hw}
    crit.update(hw)
    return crit
