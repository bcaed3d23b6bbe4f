import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_nonzero_blocks
from spikebench import xbar
from spikebench.errors import CapacityError
from spikebench.wavelet import WaveletSpec, build_dwt_matrices, dwt
from spikebench.xbar import DeviceModel, dwt_on_crossbar, encoded_weights, program, vmm

IDEAL = DeviceModel.ideal()


def test_fine_quantization_recovers_targets():
    mats = build_dwt_matrices(WaveletSpec("db4", 5), 64)
    enc = encoded_weights(program(mats, IDEAL))
    for e, t in zip(enc, mats.levels):
        assert np.max(np.abs(e - t)) <= 1e-6 * np.max(np.abs(t))


def test_two_level_code():
    dev = DeviceModel.ideal(n_levels=2)
    rng = np.random.default_rng(0)
    state = program([rng.standard_normal((8, 8))], dev)
    m = state.mapping[0]
    w = encoded_weights(state)[0]
    allowed = np.array([-1.0, 0.0, 1.0]) * m.scale * dev.g_range
    assert np.all(np.min(np.abs(w[..., None] - allowed), axis=-1) <= 1e-12 * m.scale * dev.g_range)


def test_conductances_in_range():
    dev = DeviceModel(program_noise_sigma=0.2)
    state = program(build_dwt_matrices(WaveletSpec("haar", 5), 64), dev, seed=3)
    for pair in state.grid.tiles:
        for g in pair:
            assert g.min() >= dev.g_min and g.max() <= dev.g_max


def test_haar_tile_count():
    mats = build_dwt_matrices(WaveletSpec("haar", 5), 64)
    state = program(mats, IDEAL)
    assert state.mapped_tiles == count_nonzero_blocks(mats.levels) == 30
    # every nonzero block mapped exactly once
    keys = [(m.matrix, m.row0, m.col0) for m in state.mapping]
    assert len(set(keys)) == len(keys)


def test_capacity_error():
    mats = build_dwt_matrices(WaveletSpec("db4", 5), 64)
    need = xbar.required_tiles(mats.levels)
    with pytest.raises(CapacityError) as exc:
        program(mats, IDEAL, max_tiles=need - 1)
    assert exc.value.required == need


def test_identity_block():
    state = program([np.eye(8)], IDEAL)
    v = np.zeros(8)
    v[:2] = [3, 4]
    np.testing.assert_allclose(vmm(state, v), v, rtol=1e-6, atol=1e-12)


def test_two_by_two_block():
    state = program([np.array([[1.0, 2.0], [3.0, 4.0]])], IDEAL)
    np.testing.assert_allclose(vmm(state, [1.0, 1.0]), [3.0, 7.0], rtol=1e-6)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_random_vmm_matches_dense(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((16, 24))
    v = rng.standard_normal((5, 24))
    out = vmm(program([m], IDEAL), v)
    np.testing.assert_allclose(out, v @ m.T, atol=1e-6 * np.abs(v).sum(axis=1).max() * np.abs(m).max())


def test_dimension_mismatch():
    state = program([np.eye(8)], IDEAL)
    with pytest.raises(ValueError):
        vmm(state, np.ones(7))
    with pytest.raises(ValueError):
        dwt_on_crossbar(np.ones(32), program(build_dwt_matrices(WaveletSpec("haar", 5), 64), IDEAL))


@pytest.mark.parametrize("family", ["haar", "db4"])
def test_ideal_crossbar_equals_reference(family):
    spec = WaveletSpec(family, 5)
    x = np.random.default_rng(1).standard_normal((20, 64))
    c, _ = dwt_on_crossbar(x, program(build_dwt_matrices(spec, 64), IDEAL))
    np.testing.assert_allclose(c, dwt(x, spec), atol=1e-6 * np.abs(x).max())


def test_zero_snippet_zero_coefficients():
    state = program(build_dwt_matrices(WaveletSpec("haar", 5), 64), DeviceModel())
    c, _ = dwt_on_crossbar(np.zeros((3, 64)), state)
    assert np.all(c == 0)


def test_telemetry_counts():
    mats = build_dwt_matrices(WaveletSpec("haar", 5), 64)
    state = program(mats, IDEAL)
    _, tel = dwt_on_crossbar(np.ones((7, 64)), state)
    assert tel == {"tile_activations": 30 * 7, "vmm_count": 5 * 7, "mapped_tiles": 30}
    assert xbar.telemetry_json(tel) == '{"mapped_tiles": 30, "tile_activations": 210, "vmm_count": 35}'


def test_seeded_determinism():
    state = program(build_dwt_matrices(WaveletSpec("haar", 5), 64), DeviceModel(), seed=9)
    v = np.random.default_rng(2).standard_normal((4, 64))
    np.testing.assert_array_equal(vmm(state, v, seed=5), vmm(state, v, seed=5))
    assert not np.array_equal(vmm(state, v, seed=5), vmm(state, v, seed=6))
    again = program(build_dwt_matrices(WaveletSpec("haar", 5), 64), DeviceModel(), seed=9)
    np.testing.assert_array_equal(encoded_weights(state)[0], encoded_weights(again)[0])


def test_read_noise_error_grows():
    m = np.random.default_rng(4).standard_normal((8, 8))
    v = np.random.default_rng(5).standard_normal((2000, 8))
    exact = v @ m.T
    errs = []
    for sigma in (0.0, 0.005, 0.02, 0.08):
        out = vmm(program([m], DeviceModel.ideal(read_noise_sigma=sigma)), v, seed=1)
        errs.append(np.std(out - exact))
    assert all(a < b for a, b in zip(errs, errs[1:]))


def test_quantization_error_non_increasing():
    mats = build_dwt_matrices(WaveletSpec("db4", 5), 64)
    errs = [xbar.quantization_rms_error(mats, DeviceModel.ideal(n_levels=2**k + 1)) for k in range(1, 12)]
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_line_resistance_attenuates():
    state = program([np.ones((8, 8))], DeviceModel.ideal(line_resistance_ohm=1000.0))
    out = vmm(state, np.ones(8))
    assert np.all(out < 8.0) and np.all(out > 0)


def test_device_validation():
    with pytest.raises(ValueError):
        DeviceModel(g_min=2e-6, g_max=1e-6)
    with pytest.raises(ValueError):
        DeviceModel(n_levels=1)
    with pytest.raises(ValueError):
        DeviceModel(read_noise_sigma=-0.1)
    assert DeviceModel.from_dict({"n_levels": 16, "extra": 1}).n_levels == 16
