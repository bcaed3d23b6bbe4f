import numpy as np
import pytest

from spikebench.datagen import DatasetConfig, make_template_bank, synthesize, write_dataset

SWEEP_LEVELS = (1.0, 2.0, 4.0, 8.0, 16.0)

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record and print one pass/fail line for an acceptance criterion, then assert it."""
    store = request.config.stash[_VERDICTS]

    def record(number, ok, detail):
        store[number] = (bool(ok), detail)
        tr = request.config.pluginmanager.get_plugin("terminalreporter")
        if tr is not None:
            tr.write_line(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[_VERDICTS]
    ran = [i.nodeid for i in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
           if "test_acceptance" in i.nodeid]
    if not store and not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in store:
            ok, detail = store[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        elif ran:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  (not evaluated)")


@pytest.fixture(scope="session")
def bank():
    return make_template_bank(16, 0)


@pytest.fixture(scope="session")
def small(bank):
    """Ten seconds at SNR 8: (recording, ground truth)."""
    return synthesize(DatasetConfig(duration_s=10.0, snr=8.0), bank)


@pytest.fixture(scope="session")
def small_dir(tmp_path_factory, small):
    path = tmp_path_factory.mktemp("small") / "snr_8"
    write_dataset(path, *small)
    return path


@pytest.fixture(scope="session")
def sweep_dirs(tmp_path_factory, bank):
    """Desk-scale sweep datasets: 60 s, 3 units, one directory per SNR level."""
    root = tmp_path_factory.mktemp("sweep_ds")
    out = {}
    for snr in SWEEP_LEVELS:
        rec, gt = synthesize(DatasetConfig(snr=snr), bank)
        write_dataset(root / f"snr_{snr:g}", rec, gt)
        out[snr] = root / f"snr_{snr:g}"
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
