"""Rendering tests: schema-true fixtures plus real run directories."""

import json

import numpy as np
import pytest

from kamtori_figures import FigureSpec, SchemaError, build_figure, render
from kamtori_figures.cli import main


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return str(path)


@pytest.fixture
def spectrum_csv(tmp_path):
    rows = [
        (0, 0.0, 0.875, 0.0, 0.875),
        (1, 0.9681, 0.336, 0.0, 0.336),
        (2, -0.9681, -0.336, 0.0, 0.336),
        (3, 1.9362, 0.061, 0.0, 0.061),
    ]
    return _write_csv(
        tmp_path / "spectrum.csv",
        ["line_index", "omega", "re_amp", "im_amp", "abs_amp"],
        rows,
    )


@pytest.fixture
def scan_csv(tmp_path):
    hs = np.round(np.arange(1.8, 2.4, 0.01), 10)
    errs = 1e-4 * (1 + hs)
    errs[np.argmin(np.abs(hs - 2.05))] = 2.5  # the resonance spike
    rows = [(h, e, e, 1) for h, e in zip(hs, errs)]
    path = _write_csv(tmp_path / "scan.csv", ["h", "err_I1", "err_H", "converged"], rows)
    peaks = {"scan.csv": [{"h": 2.05, "error": 2.5}]}
    peaks_path = tmp_path / "peaks.json"
    peaks_path.write_text(json.dumps(peaks))
    return path, str(peaks_path)


@pytest.fixture
def drift_csv(tmp_path):
    hs = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
    rows = [(h, 0.9681 - 0.027 * h ** 2, 0.027 * h ** 2) for h in hs]
    return _write_csv(tmp_path / "drift.csv", ["h", "omega_h", "freq_error"], rows)


@pytest.fixture
def portrait_csvs(tmp_path):
    paths = []
    for j, h in enumerate((0.01, 2.05)):
        t = np.linspace(0, 2 * np.pi, 400)
        rows = [(i, 0.7 * np.cos(x), np.mod(0.7 * np.sin(x), 2 * np.pi)) for i, x in enumerate(t)]
        paths.append(_write_csv(tmp_path / f"portrait_{j}.csv", ["n", "p", "q_mod_2pi"], rows))
    return paths


def test_render_spectrum(tmp_path, spectrum_csv):
    out = render(FigureSpec("spectrum", [spectrum_csv], str(tmp_path / "spec.png")))
    assert (tmp_path / "spec.png").stat().st_size > 1000


def test_render_drift(tmp_path, drift_csv):
    render(FigureSpec("drift_loglog", [drift_csv], str(tmp_path / "drift.png")))
    assert (tmp_path / "drift.png").exists()


def test_render_scan_annotates_peak(tmp_path, scan_csv):
    path, peaks = scan_csv
    spec = FigureSpec("scan_curve", [path], str(tmp_path / "scan.png"), peaks=peaks)
    fig = build_figure(spec)
    annotations = [t.get_text() for ax in fig.axes for t in ax.texts]
    assert any("2.05" in text for text in annotations)
    render(spec)
    assert (tmp_path / "scan.png").exists()


def test_render_portrait_grid(tmp_path, portrait_csvs):
    spec = FigureSpec(
        "portrait_grid", portrait_csvs, str(tmp_path / "grid.png"), labels=("h=0.01", "h=2.05")
    )
    render(spec)
    assert (tmp_path / "grid.png").exists()


def test_render_scheme_comparison(tmp_path, scan_csv):
    path, _ = scan_csv
    spec = FigureSpec("scheme_comparison", [path, path, path, path], str(tmp_path / "cmp.png"))
    render(spec)
    assert (tmp_path / "cmp.png").exists()


def test_empty_scan_renders_empty_axes(tmp_path):
    path = _write_csv(tmp_path / "empty.csv", ["h", "err_I1", "err_H", "converged"], [])
    out = render(FigureSpec("scan_curve", [path], str(tmp_path / "empty.png")))
    assert (tmp_path / "empty.png").exists()


def test_missing_column_is_named(tmp_path):
    path = _write_csv(tmp_path / "bad.csv", ["h", "wrong"], [(0.1, 1.0)])
    with pytest.raises(SchemaError) as info:
        render(FigureSpec("scan_curve", [path], str(tmp_path / "x.png")))
    assert "err_H" in str(info.value)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec("sparkline", ["x.csv"], "y.png")


def test_rendering_is_deterministic(tmp_path, spectrum_csv):
    a = render(FigureSpec("spectrum", [spectrum_csv], str(tmp_path / "a.png")))
    b = render(FigureSpec("spectrum", [spectrum_csv], str(tmp_path / "b.png")))
    assert open(a, "rb").read() == open(b, "rb").read()


def test_rendering_does_not_mutate_inputs(tmp_path, scan_csv):
    path, peaks = scan_csv
    before = open(path).read()
    render(FigureSpec("scan_curve", [path], str(tmp_path / "s.png"), peaks=peaks))
    assert open(path).read() == before


def test_cli_render(tmp_path, spectrum_csv):
    rc = main(["render", "--kind", "spectrum", "--in", spectrum_csv, "--out", str(tmp_path / "c.png")])
    assert rc == 0 and (tmp_path / "c.png").exists()


def test_cli_schema_error_exit_code(tmp_path):
    path = _write_csv(tmp_path / "bad.csv", ["nope"], [(1.0,)])
    rc = main(["render", "--kind", "spectrum", "--in", path, "--out", str(tmp_path / "c.png")])
    assert rc == 1


# -- integration with the primary package (consumes only run directories) ----

kamtori_cli = pytest.importorskip("kamtori.cli", reason="primary package not installed")


def _run_primary(args, out_root):
    env_args = list(args)
    import os

    old = os.environ.get("KAMTORI_OUT")
    os.environ["KAMTORI_OUT"] = str(out_root)
    try:
        assert kamtori_cli.main(env_args) == 0
    finally:
        if old is None:
            os.environ.pop("KAMTORI_OUT", None)
        else:
            os.environ["KAMTORI_OUT"] = old


def test_figure_run_directories_render(tmp_path):
    root = tmp_path / "runs"
    cfg = tmp_path / "fig1.json"
    cfg.write_text(json.dumps({"n_steps": 20000, "out_dir": "fig1"}))
    _run_primary(["figure", "1", "--config", str(cfg)], root)

    # the resonance near 2.05 must sit a full detection window inside the
    # first half of the split grid
    cfg2 = tmp_path / "fig2.json"
    cfg2.write_text(
        json.dumps(
            {
                "n_steps": 2000,
                "h_grid": {"start": 1.9, "stop": 2.7, "step": 0.02},
                "out_dir": "fig2",
            }
        )
    )
    _run_primary(["figure", "2", "--config", str(cfg2)], root)

    cfg3 = tmp_path / "fig3.json"
    cfg3.write_text(json.dumps({"portrait_h": [0.01, 2.05], "n_steps": 2000, "out_dir": "fig3"}))
    _run_primary(["figure", "3", "--config", str(cfg3)], root)

    cfg4 = tmp_path / "fig4.json"
    cfg4.write_text(
        json.dumps(
            {
                "system": "ruessmann3",
                "n_steps": 500,
                "h_grid": {"start": 0.05, "stop": 0.5, "step": 0.05},
                "out_dir": "fig4",
            }
        )
    )
    _run_primary(["figure", "4", "--config", str(cfg4)], root)

    out = tmp_path / "figs"
    out.mkdir()
    render(FigureSpec("spectrum", [str(root / "fig1" / "spectrum.csv")], str(out / "f1a.png")))
    render(FigureSpec("drift_loglog", [str(root / "fig1" / "drift.csv")], str(out / "f1b.png")))
    spec = FigureSpec(
        "scan_curve",
        [str(root / "fig2" / "scan.csv")],
        str(out / "f2.png"),
        peaks=str(root / "fig2" / "peaks.json"),
    )
    fig = build_figure(spec)
    annotations = [t.get_text() for ax in fig.axes for t in ax.texts]
    assert any("2.0" in text for text in annotations), annotations
    render(spec)
    portraits = sorted(str(p) for p in (root / "fig3").glob("portrait_h*.csv"))
    render(FigureSpec("portrait_grid", portraits, str(out / "f3.png")))
    scans = [str(root / "fig4" / f"scan_{s}.csv") for s in ("im", "sv", "se", "runge")]
    render(FigureSpec("scheme_comparison", scans, str(out / "f4.png"), labels=("IM", "SV", "SE", "Runge")))
    for name in ("f1a.png", "f1b.png", "f2.png", "f3.png", "f4.png"):
        assert (out / name).stat().st_size > 1000
