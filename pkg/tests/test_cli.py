import numpy as np
import pytest

from capefact.cli import main
from capefact.sweep import parse_results


def run_cli(*argv):
    return main(list(argv))


BASE = [
    "sweep", "--family", "pca", "--methods", "cape,non-private",
    "--eps-grid", "0.5", "--ns-grid", "50", "--sites", "3",
    "--k", "2", "--dim", "6", "--trials", "1", "--seed", "7",
]


class TestSweepCommand:
    def test_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "results.csv"
        code = run_cli(*BASE, "--out", str(out))
        assert code == 0
        rows = parse_results(out)
        assert len(rows) == 2
        assert "wrote 2 rows" in capsys.readouterr().out

    def test_summary_and_figures(self, tmp_path):
        out = tmp_path / "results.csv"
        summary = tmp_path / "summary.csv"
        figdir = tmp_path / "figs"
        code = run_cli(
            "sweep", "--family", "pca", "--methods", "cape,conv",
            "--eps-grid", "0.5,2.0", "--ns-grid", "50", "--sites", "3",
            "--k", "2", "--dim", "6", "--trials", "2", "--seed", "7",
            "--out", str(out), "--summary", str(summary), "--figures", str(figdir),
        )
        assert code == 0
        assert summary.exists()
        pngs = list(figdir.glob("*.png"))
        assert pngs, "expected at least one rendered figure"

    def test_noiseless_flag(self, tmp_path):
        out = tmp_path / "results.csv"
        assert run_cli(*BASE, "--noiseless", "--out", str(out)) == 0
        rows = parse_results(out)
        by_method = {r.method: r.value for r in rows}
        assert by_method["cape"] == pytest.approx(by_method["non-private"], rel=1e-9)

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "family = pca\n"
            "methods = cape\n"
            "eps-grid = 9.0\n"
            "ns-grid = 50\n"
            "sites = 3\n"
            "k = 2\n"
            "dim = 6\n"
            "trials = 1\n"
            "seed = 7\n"
            "# comment line\n"
        )
        out = tmp_path / "results.csv"
        code = run_cli(
            "sweep", "--config", str(cfg), "--eps-grid", "0.25", "--out", str(out)
        )
        assert code == 0
        rows = parse_results(out)
        assert rows[0].epsilon == 0.25  # flag beat the config file

    def test_data_csv_ingestion(self, tmp_path):
        data = tmp_path / "data.csv"
        rng = np.random.default_rng(0)
        np.savetxt(data, rng.standard_normal((60, 5)), delimiter=",", fmt="%.8f")
        out = tmp_path / "results.csv"
        code = run_cli(
            "sweep", "--family", "pca", "--methods", "non-private",
            "--eps-grid", "1.0", "--ns-grid", "20", "--sites", "3",
            "--k", "2", "--trials", "1", "--seed", "7",
            "--data-csv", str(data), "--out", str(out),
        )
        assert code == 0
        assert parse_results(out)[0].value > 0

    def test_determinism_two_runs(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(*BASE, "--out", str(out1)) == 0
        assert run_cli(*BASE, "--out", str(out2)) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestExitCodes:
    def test_config_error_is_1(self, tmp_path, capsys):
        assert run_cli("sweep", "--family", "bogus", "--out", str(tmp_path / "o.csv")) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_out_is_1(self):
        assert run_cli("sweep", "--family", "pca") == 1

    def test_unknown_flag_is_1(self, tmp_path):
        assert run_cli("sweep", "--family", "pca", "--frobnicate") == 1

    def test_bad_data_csv_is_1(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("1,2\n3\n")
        assert (
            run_cli(
                "sweep", "--family", "pca", "--data-csv", str(data),
                "--out", str(tmp_path / "o.csv"),
            )
            == 1
        )

    def test_all_cells_failed_is_2(self, tmp_path, capsys):
        out = tmp_path / "results.csv"
        code = run_cli(
            "sweep", "--family", "mog", "--methods", "cape",
            "--eps-grid", "1e-9", "--ns-grid", "30", "--sites", "3",
            "--k", "5", "--dim", "5", "--trials", "1", "--seed", "0",
            "--out", str(out),
        )
        assert code == 2
        assert out.exists()  # flagged rows are still written


class TestReportCommand:
    def test_report_renders(self, tmp_path):
        out = tmp_path / "results.csv"
        run_cli(
            "sweep", "--family", "pca", "--methods", "cape,conv",
            "--eps-grid", "0.5,2.0", "--ns-grid", "50", "--sites", "3",
            "--k", "2", "--dim", "6", "--trials", "2", "--seed", "7",
            "--out", str(out),
        )
        report_dir = tmp_path / "report"
        code = run_cli("report", "--results", str(out), "--out-dir", str(report_dir))
        assert code == 0
        assert (report_dir / "summary.csv").exists()
        assert list(report_dir.glob("*.png"))

    def test_report_missing_file_is_1(self, tmp_path):
        assert run_cli("report", "--results", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)) == 1
