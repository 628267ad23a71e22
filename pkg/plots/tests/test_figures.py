"""Figure rendering against a frozen results CSV."""

import csv

import pytest

from cgplots.cli import main
from cgplots.figures import RESULTS_COLUMNS, FigureSpec, SchemaError, plot_ratio_curves, plot_sphere_panel


def write_csv(path, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULTS_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def er_row(method, r, seed, f1, tv, mse):
    return {
        "seed": seed, "method": method, "family": "er", "v": 30, "n": 2,
        "M": int(60 * r), "r": r, "alpha": 0.015, "beta": 3.0,
        "f1": f1, "weight_mse": mse, "empirical_tv": tv,
        "spectral_dist": 0.1, "heat_dist": 0.05,
        "kernel_dim_est": 2, "kernel_dim_true": 2, "wall_time_s": 1.0,
    }


def sphere_row(method, seed, f1, sd, hd, kd):
    return {
        "seed": seed, "method": method, "family": "sphere", "v": 50, "n": 2,
        "M": 2000, "r": 20.0, "alpha": 0.015, "beta": 3.0,
        "f1": f1, "weight_mse": 0.01, "empirical_tv": 97.0,
        "spectral_dist": sd, "heat_dist": hd,
        "kernel_dim_est": kd, "kernel_dim_true": 2, "wall_time_s": 1.0,
    }


@pytest.fixture
def er_csv(tmp_path):
    rows = []
    for seed, (f_lo, f_hi) in enumerate([(0.3, 0.8), (0.35, 0.85)]):
        for r, frac in ((1.5, f_lo), (5.0, 0.6), (15.0, f_hi)):
            rows.append(er_row("scgl", r, seed, frac, 50 + r, 0.1 / r))
            rows.append(er_row("kron", r, seed, frac - 0.2, 70 + r, 0.2 / r))
    path = tmp_path / "er.csv"
    write_csv(path, rows)
    return path


@pytest.fixture
def sphere_csv(tmp_path):
    rows = [
        sphere_row("scgl", 0, 0.95, 0.05, 0.02, 2),
        sphere_row("scgl", 1, 0.93, 0.06, 0.03, 2),
        sphere_row("kron", 0, 0.62, 0.21, 1.4, 2),
        sphere_row("kron", 1, 0.60, 0.19, 1.3, 2),
    ]
    path = tmp_path / "sphere.csv"
    write_csv(path, rows)
    return path


class TestRatioCurves:
    def test_three_metric_panels_and_both_files(self, er_csv, tmp_path):
        spec = FigureSpec(csv_path=str(er_csv), kind="ratio_curves", out_path=str(tmp_path / "fig1.png"))
        raster, vector = plot_ratio_curves(spec)
        assert raster.exists() and raster.suffix == ".png"
        assert vector.exists() and vector.suffix == ".svg"
        # Reference line for the rank appears in the vector output.
        assert "rank = 58" in vector.read_text()

    def test_single_trial_bands_collapse(self, tmp_path):
        rows = [er_row("scgl", r, 0, 0.5, 55.0, 0.1) for r in (1.5, 5.0, 15.0)]
        path = tmp_path / "single.csv"
        write_csv(path, rows)
        spec = FigureSpec(csv_path=str(path), kind="ratio_curves", out_path=str(tmp_path / "s.png"))
        raster, _ = plot_ratio_curves(spec)
        assert raster.exists()

    def test_deterministic_rerender(self, er_csv, tmp_path):
        spec_a = FigureSpec(csv_path=str(er_csv), kind="ratio_curves", out_path=str(tmp_path / "a.png"))
        spec_b = FigureSpec(csv_path=str(er_csv), kind="ratio_curves", out_path=str(tmp_path / "b.png"))
        ra, va = plot_ratio_curves(spec_a)
        rb, vb = plot_ratio_curves(spec_b)
        assert ra.read_bytes() == rb.read_bytes()
        assert va.read_bytes() == vb.read_bytes()

    def test_empty_method_filter_lists_available(self, er_csv, tmp_path):
        spec = FigureSpec(
            csv_path=str(er_csv), kind="ratio_curves",
            out_path=str(tmp_path / "x.png"), methods=["sdp"],
        )
        with pytest.raises(ValueError, match="available.*kron.*scgl"):
            plot_ratio_curves(spec)

    def test_unknown_metric_is_schema_error(self, er_csv, tmp_path):
        with pytest.raises(SchemaError):
            FigureSpec(
                csv_path=str(er_csv), kind="ratio_curves",
                out_path=str(tmp_path / "x.png"), metrics=["not_a_metric"],
            )

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "broken.csv"
        path.write_text("method,family\nscgl,er\n")
        spec = FigureSpec(csv_path=str(path), kind="ratio_curves", out_path=str(tmp_path / "x.png"))
        with pytest.raises(SchemaError, match="missing results columns"):
            plot_ratio_curves(spec)


class TestSpherePanel:
    def test_grouped_bars_with_true_kernel_marker(self, sphere_csv, tmp_path):
        spec = FigureSpec(csv_path=str(sphere_csv), kind="sphere_panel", out_path=str(tmp_path / "fig2.png"))
        raster, vector = plot_sphere_panel(spec)
        assert raster.exists()
        assert "true = 2" in vector.read_text()

    def test_no_sphere_rows(self, er_csv, tmp_path):
        spec = FigureSpec(csv_path=str(er_csv), kind="sphere_panel", out_path=str(tmp_path / "x.png"))
        with pytest.raises(ValueError, match="no sphere-family rows"):
            plot_sphere_panel(spec)

    def test_deterministic_rerender(self, sphere_csv, tmp_path):
        spec_a = FigureSpec(csv_path=str(sphere_csv), kind="sphere_panel", out_path=str(tmp_path / "a.png"))
        spec_b = FigureSpec(csv_path=str(sphere_csv), kind="sphere_panel", out_path=str(tmp_path / "b.png"))
        ra, _ = plot_sphere_panel(spec_a)
        rb, _ = plot_sphere_panel(spec_b)
        assert ra.read_bytes() == rb.read_bytes()


class TestCli:
    def test_both_commands(self, er_csv, sphere_csv, tmp_path):
        assert main(["ratio-curves", "--in", str(er_csv), "--out", str(tmp_path / "f1.png")]) == 0
        assert main(["sphere-panel", "--in", str(sphere_csv), "--out", str(tmp_path / "f2.png")]) == 0
        assert (tmp_path / "f1.png").exists() and (tmp_path / "f1.svg").exists()
        assert (tmp_path / "f2.png").exists() and (tmp_path / "f2.svg").exists()

    def test_metric_filter_flag(self, er_csv, tmp_path):
        assert main([
            "ratio-curves", "--in", str(er_csv), "--out", str(tmp_path / "f.png"),
            "--metrics", "f1,empirical_tv", "--methods", "scgl",
        ]) == 0

    def test_bad_metric_exits_nonzero(self, er_csv, tmp_path, capsys):
        code = main([
            "ratio-curves", "--in", str(er_csv), "--out", str(tmp_path / "f.png"),
            "--metrics", "bogus",
        ])
        assert code == 1
        assert "bogus" in capsys.readouterr().err
