"""Config validation, scenario dispatch, report round trips, figure files."""

import json

import pytest

from pamse import harness
from pamse.lattice import green, srw_kernel


class TestConfigValidation:
    def test_unknown_scenario(self):
        cfg = harness.ScenarioConfig("frobnicate", {})
        with pytest.raises(harness.ConfigError):
            harness.validate_config(cfg)

    def test_missing_key(self):
        cfg = harness.ScenarioConfig("exact_vs_mc", {"d": 1})
        with pytest.raises(harness.ConfigError):
            harness.validate_config(cfg)

    def test_unknown_key(self):
        cfg = harness.ScenarioConfig("kappa_sweep", {
            "d": 1, "L": 4, "rho": 0.5, "p": 1, "kappas": [0.0], "seed": 0,
            "bogus": 1})
        with pytest.raises(harness.ConfigError):
            harness.validate_config(cfg)

    def test_empty_grid_rejected(self):
        cfg = harness.ScenarioConfig("recurrent_trend", {
            "d": 1, "L": 4, "rho": 0.5, "kappa": 1.0, "t_grid": [], "n": 10,
            "seed": 0})
        with pytest.raises(harness.ConfigError):
            harness.validate_config(cfg)

    def test_type_check(self):
        cfg = harness.ScenarioConfig("exact_vs_mc", {
            "d": 1, "L": 6, "rho": 0.5, "kappa": 0.5, "p": 1, "t": 2.0,
            "n": "many", "seed": 0})
        with pytest.raises(harness.ConfigError):
            harness.validate_config(cfg)

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "scenario": "kappa_sweep",
            "params": {"d": 1, "L": 4, "rho": 0.5, "p": 1,
                       "kappas": [0.0, 1.0], "seed": 0},
        }))
        cfg = harness.ScenarioConfig.from_file(str(path))
        harness.validate_config(cfg)
        assert cfg.scenario == "kappa_sweep"


class TestScenarios:
    def test_comparison_suite_passes(self):
        cfg = harness.ScenarioConfig("comparison_suite", {
            "d": 1, "L": 4, "rhos": [0.4], "t": 0.5, "seed": 1})
        rep = harness.run_scenario(cfg)
        assert rep.passed
        assert len(rep.rows) == 4
        assert all(r["margin"] >= -1e-10 for r in rep.rows)

    def test_kappa_sweep_flags(self):
        cfg = harness.ScenarioConfig("kappa_sweep", {
            "d": 1, "L": 4, "rho": 0.5, "p": 1,
            "kappas": [0.0, 0.5, 1.0, 2.0], "seed": 0, "t_ref": 3.0})
        rep = harness.run_scenario(cfg)
        assert rep.passed and rep.flags["non_increasing"] and rep.flags["convex"]
        assert "Lambda_at_t_ref" in rep.rows[0]

    def test_intermittency_scenario(self):
        cfg = harness.ScenarioConfig("intermittency_kappa0", {
            "d": 1, "L": 6, "rho": 0.5, "p_list": [1, 2], "t": 5.0, "seed": 0})
        rep = harness.run_scenario(cfg)
        assert rep.passed

    def test_report_embeds_config_and_env(self, tmp_path):
        out = tmp_path / "report.json"
        cfg = harness.ScenarioConfig("kappa_sweep", {
            "d": 1, "L": 4, "rho": 0.5, "p": 1, "kappas": [0.0, 1.0],
            "seed": 0}, output_path=str(out))
        rep = harness.run_scenario(cfg)
        assert out.exists()
        back = harness.Report.from_json(str(out))
        assert back.config["params"]["kappas"] == [0.0, 1.0]
        assert "numpy" in back.env

    def test_rerun_reproduces_bitwise(self):
        cfg = harness.ScenarioConfig("exact_vs_mc", {
            "d": 1, "L": 4, "rho": 0.5, "kappa": 0.5, "p": 1, "t": 1.0,
            "n": 500, "seed": 12})
        a = harness.run_scenario(cfg)
        b = harness.run_scenario(cfg)
        assert a.rows[0]["mc"] == b.rows[0]["mc"]

    def test_recurrent_trend_scenario(self):
        cfg = harness.ScenarioConfig("recurrent_trend", {
            "d": 1, "L": 6, "rho": 0.5, "kappa": 1.0,
            "t_grid": [0.5, 1.0, 2.0, 4.0], "n": 2000, "seed": 5})
        rep = harness.run_scenario(cfg)
        assert rep.flags["bounds_ok"]
        lams = [r["Lambda"] for r in rep.rows if "Lambda" in r]
        assert rep.passed and lams[-1] >= lams[0] - 0.1


class TestFigures:
    def test_kappa_sweep_files(self, tmp_path):
        cfg = harness.ScenarioConfig("kappa_sweep", {
            "d": 1, "L": 4, "rho": 0.5, "p": 1, "kappas": [0.5, 1.0, 2.0],
            "seed": 0})
        rep = harness.run_scenario(cfg)
        files = harness.emit_figures_data(rep, str(tmp_path))
        header, rows = harness.parse_figure_file(files[0])
        assert header == ["kappa", "lambda_p", "ci", "asymptote"]
        assert len(rows) == 3
        # columns round-trip as floats
        assert rows[0][0] == 0.5

    def test_asymptote_value(self):
        col = harness._asymptote_column(4, 0.5, [1.0])
        expected = 0.5 + 0.25 * green(srw_kernel(4)) / 8.0
        assert col[0] == pytest.approx(expected, rel=1e-9)

    def test_empty_report_writes_header_only(self, tmp_path):
        rep = harness.Report("kappa_sweep",
                             {"params": {"d": 1, "rho": 0.5, "p": 1}},
                             rows=[], flags={}, passed=True)
        files = harness.emit_figures_data(rep, str(tmp_path))
        header, rows = harness.parse_figure_file(files[0])
        assert header and rows == []

    def test_generic_scenario_table(self, tmp_path):
        rep = harness.Report("asymptotic_probe", {"params": {}},
                             rows=[{"mc_mean": 0.15, "stderr": 0.01,
                                    "reference": 0.153, "rel_gap": 0.02,
                                    "n": 10}],
                             flags={}, passed=True)
        files = harness.emit_figures_data(rep, str(tmp_path))
        header, rows = harness.parse_figure_file(files[0])
        assert "mc_mean" in header and len(rows) == 1


class TestCli:
    def test_validate_and_run(self, tmp_path, capsys):
        from pamse.cli import main

        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "scenario": "kappa_sweep",
            "params": {"d": 1, "L": 4, "rho": 0.5, "p": 1,
                       "kappas": [0.0, 1.0, 2.0], "seed": 0},
        }))
        assert main(["validate", str(cfg_path)]) == 0
        out_path = tmp_path / "report.json"
        assert main(["run", str(cfg_path), "--output", str(out_path)]) == 0
        assert out_path.exists()
        rep = harness.Report.from_json(str(out_path))
        figs = tmp_path / "figs"
        assert main(["figures", str(out_path), "--outdir", str(figs)]) == 0
        assert list(figs.iterdir())

    def test_validate_rejects_bad_config(self, tmp_path):
        from pamse.cli import main

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"scenario": "nope", "params": {}}))
        assert main(["validate", str(bad)]) == 1
