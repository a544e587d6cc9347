import re
from pathlib import Path

import pytest

from torusflow_plots.cli import main
from torusflow_plots.io import PlotDataError, read_decay_csv, read_spectrum_csv
from torusflow_plots.render import PlotJob, render_decay, render_spectrum

DATA = Path(__file__).parent / "data"


def test_read_decay_csv():
    data = read_decay_csv(DATA / "synthetic_decay.csv")
    assert set(("tau", "dev_total", "dev_h_null")) <= set(data)
    assert data["tau"].size == data["dev_total"].size


def test_read_decay_missing_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("tau,dev_u\n0.0,1.0\n")
    with pytest.raises(PlotDataError, match="dev_total"):
        read_decay_csv(p)


def test_read_decay_bad_number_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("tau,dev_total,dev_h_null\n0.0,1.0,0.1\n0.1,oops,0.1\n")
    with pytest.raises(PlotDataError, match="line 3"):
        read_decay_csv(p)


def test_read_decay_short_row_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("tau,dev_total,dev_h_null\n0.0,1.0\n")
    with pytest.raises(PlotDataError, match="line 2"):
        read_decay_csv(p)


def test_read_spectrum_missing_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("block,index,re,im\nL0,0,-1.0,0.0\n")
    with pytest.raises(PlotDataError, match="is_null"):
        read_spectrum_csv(p)


def test_render_decay_synthetic(tmp_path):
    out = tmp_path / "decay.svg"
    summary = render_decay(DATA / "synthetic_decay.csv", out)
    assert out.exists()
    assert summary["fitted_rate"] == pytest.approx(2.0, abs=1e-9)
    svg = out.read_text()
    assert "fitted rate = 2.00" in svg


def test_render_decay_with_gap_guide(tmp_path):
    out = tmp_path / "decay.svg"
    summary = render_decay(DATA / "reference_timeseries.csv", out,
                           fit_path=DATA / "reference_ratefit.json")
    assert summary["gap"] is not None
    svg = out.read_text()
    assert "spectral gap" in svg


def test_render_decay_deterministic(tmp_path):
    out1 = tmp_path / "a.svg"
    out2 = tmp_path / "b.svg"
    render_decay(DATA / "synthetic_decay.csv", out1)
    render_decay(DATA / "synthetic_decay.csv", out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_render_spectrum_counts_null_markers(tmp_path):
    out = tmp_path / "spec.svg"
    summary = render_spectrum(DATA / "reference_spectrum.csv", out)
    assert out.exists()
    assert summary["n_null"] == 2
    assert "2 null" in out.read_text()


def test_render_never_recomputes(tmp_path):
    # the fitted-rate annotation tracks the file contents, not any model:
    # scaling the decay data changes nothing but the intercept
    src = (DATA / "synthetic_decay.csv").read_text().split("\n")
    rows = [src[0]] + [",".join(
        val if i in (0,) else repr(float(val) * 3.0)
        for i, val in enumerate(line.split(","))
    ) for line in src[1:] if line]
    p = tmp_path / "scaled.csv"
    p.write_text("\n".join(rows) + "\n")
    summary = render_decay(p, tmp_path / "scaled.svg")
    assert summary["fitted_rate"] == pytest.approx(2.0, abs=1e-6)


def test_cli_decay(tmp_path, capsys):
    out = tmp_path / "decay.svg"
    rc = main(["--kind", "decay", "--in", str(DATA / "synthetic_decay.csv"),
               "--out", str(out)])
    assert rc == 0
    assert out.exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_missing_column_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("tau,dev_u\n0.0,1.0\n")
    rc = main(["--kind", "decay", "--in", str(p), "--out", str(tmp_path / "x.svg")])
    assert rc == 1
    assert "dev_total" in capsys.readouterr().err


def test_cli_missing_file(tmp_path, capsys):
    rc = main(["--kind", "spectrum", "--in", str(tmp_path / "none.csv"),
               "--out", str(tmp_path / "x.svg")])
    assert rc == 1


def test_plotjob_kind_validation():
    with pytest.raises(PlotDataError):
        PlotJob(kind="histogram", csv_path="x", out_path="y")
