import json

import numpy as np
import pytest

from torusflow.cli import main, parse_matrix
from torusflow.errors import ValidationError
from torusflow.snapshots import load_snapshot, save_snapshot

from conftest import stationary_state


def test_parse_matrix():
    m = parse_matrix("2,0;0,0.5")
    assert np.array_equal(m, np.diag([2.0, 0.5]))
    with pytest.raises(ValidationError):
        parse_matrix("1,2;3")
    with pytest.raises(ValidationError):
        parse_matrix("1,2x;3,4")


def test_stationary_reports_s(tmp_path, capsys):
    rc = main(["stationary", "--lambda", "2,0;0,0.5", "--nodes", "64",
               "--out", str(tmp_path)])
    assert rc == 0
    report = (tmp_path / "stationary_report.txt").read_text()
    assert "1.921812" in report
    snap, s = load_snapshot(tmp_path / "stationary.json")
    assert s == pytest.approx(4 * np.log(2.0) ** 2, abs=1e-14)
    assert np.abs(snap.u.values - 1.0).max() == 0.0


def test_stationary_trivial_twist_warns(tmp_path, capsys):
    rc = main(["stationary", "--lambda", "1,0;0,1", "--nodes", "16",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "warning" in out and "weakly stable" in out


def test_stationary_rejects_rotation(tmp_path, capsys):
    rc = main(["stationary", "--lambda", "0,1;-1,0", "--nodes", "16",
               "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "positive" in err or "admissible" in err


def test_spectrum_csv_null_rows(tmp_path, sol_hol):
    snap_dir = tmp_path / "st"
    assert main(["stationary", "--lambda", "2,0;0,0.5", "--nodes", "64",
                 "--out", str(snap_dir)]) == 0
    out_dir = tmp_path / "spectra"
    assert main(["spectrum", "--snapshot", str(snap_dir / "stationary.json"),
                 "--out", str(out_dir)]) == 0
    lines = (out_dir / "spectrum.csv").read_text().strip().split("\n")
    assert lines[0] == "block,index,re,im,is_null"
    l2_null = [ln for ln in lines[1:] if ln.startswith("L2,") and ln.endswith(",1")]
    assert len(l2_null) == 2
    null_doc = json.loads((out_dir / "null_basis.json").read_text())
    assert null_doc["block"] == "L2"
    assert len(null_doc["fields"]) == 2


def test_rescale_roundtrip_bit_identical(tmp_path, sol_hol):
    state, s, _ = stationary_state(sol_hol, 32)
    rng = np.random.default_rng(0)
    state.u.values[:] = 1.0 + 0.3 * rng.uniform(size=32)
    src = tmp_path / "in.json"
    save_snapshot(src, state, s)
    fwd = tmp_path / "fwd.json"
    back = tmp_path / "back.json"
    args = ["--s", "0.7", "--c", "0.3", "--t0", "0", "--sigma0", "1", "--t", "2.0"]
    assert main(["rescale", "--snapshot", str(src), *args, "--out", str(fwd)]) == 0
    assert main(["rescale", "--snapshot", str(fwd), *args, "--out", str(back),
                 "--inverse"]) == 0
    a = json.loads(src.read_text())
    b = json.loads(back.read_text())
    assert a["lambda"] == b["lambda"] and a["n_nodes"] == b["n_nodes"]
    # scale-unscale leaves at most one-ulp noise per entry, far inside the
    # 1e-13 round-trip contract
    for key in ("u", "A", "G"):
        x, y = np.asarray(a[key]), np.asarray(b[key])
        assert np.abs(x - y).max() <= 1e-13 * max(np.abs(x).max(), 1.0)


def test_sphere_spectra_csv(tmp_path, capsys):
    rc = main(["sphere-spectra", "--n", "3", "--k", "1", "--jmax", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "spaceform.csv").read_text().strip().split("\n")
    assert any(r.startswith("L0prime,1,") and float(r.split(",")[2]) == 1.0 for r in rows)
    out = capsys.readouterr().out
    assert "unstable" in out


def test_sphere_spectra_with_genus(tmp_path, capsys):
    rc = main(["sphere-spectra", "--n", "2", "--k", "1", "--jmax", "2",
               "--genus", "2", "--oracle-nodes", "128", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "dim = 6" in out
    assert "center manifold dimension: 7" in out


def test_evolve_cli_with_config_and_override(tmp_path, sol_hol):
    snap_dir = tmp_path / "st"
    main(["stationary", "--lambda", "2,0;0,0.5", "--nodes", "32", "--out", str(snap_dir)])
    cfg = tmp_path / "evolve.json"
    cfg.write_text(json.dumps({
        "snapshot": str(snap_dir / "stationary.json"),
        "t_end": 0.01,
        "deturck_enabled": False,
        "out_dir": str(tmp_path / "run"),
    }))
    assert main(["evolve", "--config", str(cfg), "--set", "t_end=0.005"]) == 0
    final, s = load_snapshot(tmp_path / "run" / "final.json")
    assert np.abs(final.u.values - 1.0).max() <= 1e-6


def test_evolve_cli_snapshot_stride(tmp_path):
    snap_dir = tmp_path / "st"
    main(["stationary", "--lambda", "2,0;0,0.5", "--nodes", "32", "--out", str(snap_dir)])
    cfg = tmp_path / "evolve.json"
    cfg.write_text(json.dumps({
        "snapshot": str(snap_dir / "stationary.json"),
        "t_end": 0.002,
        "deturck_enabled": False,
        "snapshot_stride": 5,
        "out_dir": str(tmp_path / "run"),
    }))
    assert main(["evolve", "--config", str(cfg)]) == 0
    snaps = sorted((tmp_path / "run").glob("snapshot_*.json"))
    assert len(snaps) >= 2


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "evolve.json"
    cfg.write_text(json.dumps({"snapshot": "x.json", "bogus_key": 1}))
    assert main(["evolve", "--config", str(cfg)]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_missing_snapshot_exit_code(tmp_path, capsys):
    cfg = tmp_path / "evolve.json"
    cfg.write_text(json.dumps({"snapshot": str(tmp_path / "nope.json")}))
    assert main(["evolve", "--config", str(cfg)]) == 1


def test_experiment_cli(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "lambda": "2,0;0,0.5",
        "n_nodes": 64,
        "tau_end": 3.0,
        "cfl_safety": 1.0,
        "sample_dtau": 0.1,
        "seed": 1,
        "out_dir": str(tmp_path / "out"),
    }))
    rc = main(["experiment", "--config", str(cfg)])
    assert rc == 0
    out_dir = tmp_path / "out"
    ts = list(out_dir.glob("timeseries_*.csv"))
    rf = list(out_dir.glob("ratefit_*.json"))
    assert len(ts) == 1 and len(rf) == 1
    fit = json.loads(rf[0].read_text())
    for key in ("rate", "r2", "window", "gap", "u_limit_err", "A_limit_err",
                "HE_limit_err", "failed"):
        assert key in fit
    assert not fit["failed"]
    meta = json.loads((out_dir / "run_meta.json").read_text())
    assert "timestamp" in meta


def test_stationary_reproducible(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        assert main(["stationary", "--lambda", "2,0;0,0.5", "--nodes", "32",
                     "--out", str(d)]) == 0
    assert (d1 / "stationary.json").read_bytes() == (d2 / "stationary.json").read_bytes()
    assert (d1 / "stationary_report.txt").read_bytes() == (d2 / "stationary_report.txt").read_bytes()
