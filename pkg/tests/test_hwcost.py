import json
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikebench import hwcost
from spikebench.errors import ConfigError
from spikebench.hwcost import HwParams, HwReport, StageCost

REF = json.loads((resources.files("spikebench") / "data" / "paper_table3.json").read_text())["reference_run"]
TEL = REF["telemetry"]


def _ref_report():
    return hwcost.estimate(hwcost.load_params("paper_table3"), TEL, {"n_channels": 1})


def test_calibration_reproduces_table_values():
    rep = _ref_report().to_dict()
    assert rep["power_mw_per_ch"] == pytest.approx(10.72, abs=5e-9)
    assert rep["area_mm2_per_ch"] == pytest.approx(0.66, abs=5e-9)
    assert rep["latency_ms_per_ch"] == pytest.approx(135.53, abs=5e-9)
    assert round(rep["energy_mj_per_ch"], 4) == 1.4529
    assert f"{rep['energy_mj_per_ch']:.3g}" == "1.45"


def test_energy_identity():
    r = _ref_report()
    assert abs(r.energy_j_per_ch - r.power_w_per_ch * r.latency_s_per_ch) <= 1e-3 * r.energy_j_per_ch


def test_calibrate_latency_recovers_stage_e():
    params = hwcost.load_params("paper_table3")
    stored = params.stage_overheads["e"].latency_s
    params.stage_overheads["e"] = StageCost(power_w=1e-3, latency_s=0.0, area_m2=6e-8)
    hwcost.calibrate_latency(params, TEL, {"n_channels": 1}, 0.13553)
    assert params.stage_overheads["e"].latency_s == pytest.approx(stored, rel=1e-9)
    with pytest.raises(ValueError):
        hwcost.calibrate_latency(params, TEL, {}, 0.01)


def test_compare_with_cmos_baseline():
    ratios = hwcost.compare(_ref_report(), hwcost.load_report("do2018_cmos"))
    assert ratios["power_w_per_ch"]["ratio"] == pytest.approx(6.13e4, rel=1e-3)
    assert ratios["energy_j_per_ch"] == {"ratio": None, "reason": "not reported"}
    assert ratios["latency_s_per_ch"]["ratio"] is None
    assert ratios["area_m2_per_ch"]["ratio"] == pytest.approx(0.66 / 0.414)


def test_compare_identical_and_zero():
    r = _ref_report()
    assert all(v["ratio"] == 1.0 for v in hwcost.compare(r, r).values())
    z = HwReport(0.0, 0.0, 0.0, 0.0)
    assert hwcost.compare(r, z)["power_w_per_ch"] == {"ratio": None, "reason": "division by zero"}


def test_all_zero_params():
    rep = hwcost.estimate(HwParams(), TEL, {})
    assert (rep.power_w_per_ch, rep.energy_j_per_ch, rep.area_m2_per_ch, rep.latency_s_per_ch) == (0, 0, 0, 0)


def test_per_channel_division():
    params = hwcost.load_params("paper_table3")
    one = hwcost.estimate(params, TEL, {"n_channels": 1})
    four = hwcost.estimate(params, TEL, {"n_channels": 4})
    assert four.power_w_per_ch == pytest.approx(one.power_w_per_ch / 4)
    assert four.area_m2_per_ch == pytest.approx(one.area_m2_per_ch / 4)
    with pytest.raises(ValueError):
        hwcost.estimate(params, TEL, {"n_channels": 0})


def test_missing_telemetry_field():
    with pytest.raises(ConfigError, match="vmm_count"):
        hwcost.estimate(HwParams(), {"tile_activations": 1, "mapped_tiles": 1}, {})


def test_bad_calibrations(tmp_path):
    with pytest.raises(ConfigError):
        hwcost.load_params("no_such_calibration")
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"params": {"tile_area_m2": 1}}))
    with pytest.raises(ConfigError, match="tile_read_power_w"):
        hwcost.load_params(p)
    with pytest.raises(ValueError):
        HwParams(periph_power_w=-1.0)


def test_params_round_trip():
    p = hwcost.load_params("paper_table3")
    assert HwParams.from_dict(p.to_dict()) == p


def test_report_round_trip():
    r = _ref_report()
    back = HwReport.from_dict(r.to_dict())
    for f in HwReport.FIELDS:
        assert getattr(back, f) == pytest.approx(getattr(r, f), rel=1e-9)
    with pytest.raises(ConfigError):
        HwReport.from_dict({"power_mw_per_ch": 1.0})


nonneg = st.floats(0, 1e3, allow_nan=False)


@given(st.integers(1, 10**6), st.integers(1, 10**5), st.integers(1, 64), st.sampled_from(["tile", "vmm", "mapped"]))
@settings(max_examples=150, deadline=None)
def test_monotone_in_workload(acts, vmms, tiles, which):
    params = hwcost.load_params("paper_table3")
    tel = {"tile_activations": acts, "vmm_count": vmms, "mapped_tiles": tiles}
    base = hwcost.estimate(params, tel, {})
    bumped = dict(tel)
    if which == "tile":
        bumped["tile_activations"] += 1
    elif which == "mapped":
        bumped["mapped_tiles"] += 1
    else:
        # more VMMs at the same activations per VMM
        bumped["vmm_count"] *= 2
        bumped["tile_activations"] *= 2
    more = hwcost.estimate(params, bumped, {})
    for f in HwReport.FIELDS:
        assert getattr(more, f) >= getattr(base, f) * (1 - 1e-12)
        assert getattr(more, f) >= 0
