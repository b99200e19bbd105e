"""End-to-end CLI: synth, analyze, theory, manifests, and exit codes."""
import hashlib
import json

import numpy as np
import pytest

from dbmt.cli import main


def _write_record(path, fs=50.0, n=1500, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs
    y = np.sin(2 * np.pi * 5.0 * t) + 0.1 * rng.standard_normal(n)
    with open(path, "w") as fh:
        fh.write("t,y\n")
        for ti, yi in zip(t, y):
            fh.write(f"{ti:.10f},{yi:.10f}\n")
    return path


def _load(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def test_synth_then_analyze_roundtrip(tmp_path):
    sdir = tmp_path / "synth"
    rc = main(["synth", "--duration", "60", "--seed", "3",
               "--out", str(sdir)])
    assert rc == 0
    rec = sdir / "synth.csv"
    assert rec.exists()
    gt = _load(sdir / "ground_truth.csv")
    assert gt.shape == (10, 300)

    adir = tmp_path / "mt"
    rc = main(["analyze", str(rec), "--method", "mt", "--out", str(adir)])
    assert rc == 0
    power = _load(adir / "spectrogram.csv")
    lo = _load(adir / "ci_lo.csv")
    hi = _load(adir / "ci_hi.csv")
    assert power.shape[1] == 300
    assert np.all(lo <= power) and np.all(power <= hi)
    freqs = _load(adir / "freqs.csv").ravel()
    assert abs(freqs[1] - 50.0 / 300.0) < 1e-9


def test_analyze_dbmt_and_logdbmt(tmp_path):
    rec = _write_record(tmp_path / "rec.csv")
    for method, extra in [("dbmt", ["--sigma2", "0.01"]), ("logdbmt", [])]:
        out = tmp_path / method
        rc = main(["analyze", str(rec), "--method", method,
                   "--window-sec", "2", "--max-iter", "10",
                   "--out", str(out)] + extra)
        assert rc == 0
        power = _load(out / "spectrogram.csv")
        assert power.shape == (15, 100)
        # the 5 Hz tone dominates its row
        peak = np.argmax(power[:, :50], axis=1) * 50.0 / 100.0
        assert np.all(np.abs(peak - 5.0) < 1.0)


def test_manifest_hashes_and_versions(tmp_path):
    rec = _write_record(tmp_path / "rec.csv")
    out = tmp_path / "out"
    assert main(["analyze", str(rec), "--method", "mt", "--db",
                 "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["method"] == "mt"
    assert "numpy" in man["versions"] and "dbmt" in man["versions"]
    assert "spectrogram_db.csv" in man["artifacts"]
    for name, digest in man["artifacts"].items():
        h = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert h == digest


def test_theory_curves_outputs(tmp_path):
    out = tmp_path / "kappa"
    assert main(["theory", "kappa", "--alpha-grid", "0.1:0.9:0.1",
                 "--out", str(out)]) == 0
    rows = np.loadtxt(out / "kappa.csv", delimiter=",", skiprows=1)
    assert rows.shape == (9, 2)
    assert np.all(np.diff(rows[:, 1]) > 0)  # kappa grows with alpha

    out2 = tmp_path / "astar"
    assert main(["theory", "alpha-star", "--q-grid", "0.5:50",
                 "--out", str(out2)]) == 0
    rows2 = np.loadtxt(out2 / "alpha_star.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(rows2[:, 1]) < 0)

    out3 = tmp_path / "filters"
    assert main(["theory", "filters", "--W", "8", "--grid", "4",
                 "--time-bandwidth", "2.0", "--tapers", "3", "--N", "10",
                 "--n", "5", "--out", str(out3)]) == 0
    gain = _load(out3 / "filter_gain_taper0.csv")
    assert gain.shape == (4, 10)
    # energy concentrates on the analysis window
    assert np.all(np.argmax(gain, axis=1) == 4)


def test_exit_code_2_on_bad_input(tmp_path):
    missing = tmp_path / "nope.csv"
    assert main(["analyze", str(missing), "--method", "mt",
                 "--out", str(tmp_path / "o1")]) == 2

    bad = tmp_path / "bad.csv"
    bad.write_text("t,y\n0.0,1.0\n0.1,oops\n")
    assert main(["analyze", str(bad), "--method", "mt",
                 "--out", str(tmp_path / "o2")]) == 2

    nonuniform = tmp_path / "nu.csv"
    nonuniform.write_text("t,y\n0.0,1.0\n0.1,2.0\n0.35,3.0\n")
    assert main(["analyze", str(nonuniform), "--method", "mt",
                 "--out", str(tmp_path / "o3")]) == 2


def test_exit_code_2_on_flag_misuse(tmp_path):
    rec = _write_record(tmp_path / "rec.csv")
    # overlap is a sliding-window concept; the state-space methods reject it
    assert main(["analyze", str(rec), "--method", "logdbmt",
                 "--overlap", "0.5", "--out", str(tmp_path / "o4")]) == 2
    # dbmt needs the observation noise level
    assert main(["analyze", str(rec), "--method", "dbmt",
                 "--out", str(tmp_path / "o5")]) == 2
    # malformed theory grid
    assert main(["theory", "kappa", "--alpha-grid", "0.9:0.1:0.1",
                 "--out", str(tmp_path / "o6")]) == 2


def test_console_script_entrypoint():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "dbmt.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "analyze" in proc.stdout and "theory" in proc.stdout
