"""End-to-end tests for the command-line front end and the experiment service."""

import io
import json

import pandas as pd
import pytest

from src.cli import EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_OK, build_parser, main
from src.config import get_settings
from src.core.errors import ConfigError
from src.core.params import SystemParams, fraunhofer_distance
from src.services import experiments
from src.services.experiments import (
    SIGMA_FLOOR,
    CheckResult,
    SweepSpec,
    SweepVariable,
    ValidationReport,
)


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_table(path):
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    metadata = [line for line in text.splitlines() if line.startswith("#")]
    return metadata, pd.read_csv(io.StringIO(text), comment="#")


class TestSweepSpec:
    def test_rejects_bad_grids(self):
        with pytest.raises(ConfigError):
            SweepSpec(SweepVariable.SIGMA_D, [])
        with pytest.raises(ConfigError):
            SweepSpec(SweepVariable.SIGMA_D, [1.0, 1.0])

    def test_zero_sigma_is_floored(self):
        spec = SweepSpec(SweepVariable.SIGMA_D, [0.0, 2.0])
        assert spec.floored == [0.0]
        assert spec.point(SystemParams(), 0.0).sigma_d_m == SIGMA_FLOOR

    def test_gamma_is_not_a_link_parameter(self):
        with pytest.raises(ConfigError):
            SweepSpec(SweepVariable.GAMMA, [1.0]).point(SystemParams(), 1.0)

    def test_d_f_point(self):
        point = SweepSpec(SweepVariable.D_F, [40.0]).point(SystemParams(), 40.0)
        assert fraunhofer_distance(point) == pytest.approx(40.0, rel=1e-12)

    def test_decision_threshold_point(self):
        base = SystemParams()
        point = SweepSpec(SweepVariable.DECISION_THRESHOLD, [80.0]).point(base, 80.0)
        assert point.decision_threshold_m == 80.0
        assert point.aperture_tx_m == base.aperture_tx_m


class TestParser:
    def test_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_flags(self):
        args = build_parser().parse_args(["ec", "--paper-literal", "--seed", "3", "--samples", "100"])
        assert args.command == "ec"
        assert args.paper_literal and not args.extended_ff_limit
        assert args.seed == 3 and args.samples == 100


class TestFigureCommands:
    def test_fig2(self, tmp_path):
        config = write_config(tmp_path, {"fig2": {"sigma_grid": [1.0, 5.0, 10.0]}})
        out = tmp_path / "fig2.csv"
        assert main(["fig2", "--config", config, "--samples", "10000", "--out", str(out)]) == EXIT_OK

        metadata, frame = read_table(out)
        assert metadata[0] == "# command=fig2"
        assert list(frame.columns) == [
            "sigma_d",
            "p_false_far",
            "p_false_near",
            "p_false_far_mc",
            "p_false_near_mc",
            "mc_se",
        ]
        assert list(frame["sigma_d"]) == [1.0, 5.0, 10.0]
        assert frame["p_false_far"].is_monotonic_increasing
        assert frame["p_false_near"].is_monotonic_increasing

    def test_fig2_default_grid_is_monotone(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert main(["fig2", "--samples", "10000", "--out", str(out)]) == EXIT_OK

        _, frame = read_table(out)
        assert list(frame["sigma_d"]) == [float(s) for s in range(1, 21)]
        assert frame["p_false_far"].is_monotonic_increasing
        assert frame["p_false_near"].is_monotonic_increasing

    def test_fig3(self, tmp_path):
        config = write_config(tmp_path, {"fig3": {"d_max_grid": [100.0, 500.0], "thetas": [0.01]}})
        out = tmp_path / "fig3.csv"
        assert main(["fig3", "--config", config, "--samples", "10000", "--out", str(out)]) == EXIT_OK

        _, frame = read_table(out)
        assert list(frame.columns) == ["d_max", "ec_theta_0.01", "ec_theta_0.01_mc", "ec_theta_0.01_mc_se"]
        assert frame["ec_theta_0.01"].iloc[1] < frame["ec_theta_0.01"].iloc[0]
        assert frame["ec_theta_0.01_mc"].notna().all()

    def test_fig5_paper_literal_skips_mc(self, tmp_path):
        config = write_config(tmp_path, {"fig5": {"sigma_grid": [2.0, 4.0], "thetas": [0.01]}})
        out = tmp_path / "fig5.csv"
        args = ["fig5", "--config", config, "--paper-literal", "--out", str(out)]
        assert main(args) == EXIT_OK

        metadata, frame = read_table(out)
        assert list(frame.columns) == ["sigma_d", "ec_theta_0.01"]
        assert frame["ec_theta_0.01"].gt(0).all()
        assert any("prob_mode=paper_literal" in line for line in metadata)

    def test_fig4_threshold_sweep(self, tmp_path):
        grid = [20.0, 40.0, 60.0, 80.0, 100.0]
        config = write_config(tmp_path, {"fig4": {"d_f_grid": grid, "sigma_series": [1.0, 5.0]}})
        out = tmp_path / "fig4.csv"
        assert main(["fig4", "--config", config, "--samples", "100000", "--out", str(out)]) == EXIT_OK

        metadata, frame = read_table(out)
        assert any("mechanism=threshold" in line for line in metadata)
        assert list(frame["d_F"]) == grid
        assert frame["aperture_tx_m"].nunique() == 1
        for column in ("ec_sigma_1", "ec_sigma_5"):
            assert frame[column].is_monotonic_decreasing
            assert frame[f"{column}_mc"].notna().sum() == 2

    def test_fig4_aperture_sweep(self, tmp_path):
        config = write_config(
            tmp_path,
            {"fig4": {"mechanism": "aperture", "d_f_grid": [40.0, 80.0], "sigma_series": [1.0, 5.0]}},
        )
        out = tmp_path / "fig4.csv"
        assert main(["fig4", "--config", config, "--samples", "10000", "--out", str(out)]) == EXIT_OK

        metadata, frame = read_table(out)
        assert any("mechanism=aperture" in line for line in metadata)
        assert list(frame.columns[:4]) == ["d_F", "aperture_tx_m", "ec_sigma_1", "ec_sigma_5"]
        assert frame["aperture_tx_m"].is_monotonic_increasing
        assert (frame["ec_sigma_1"] > frame["ec_sigma_5"]).all()

    def test_crlb(self, tmp_path):
        config = write_config(tmp_path, {"crlb": {"gammas": [100.0, 1000.0], "n_trials": 200}})
        out = tmp_path / "crlb.csv"
        assert main(["crlb", "--config", config, "--out", str(out)]) == EXIT_OK

        _, frame = read_table(out)
        assert list(frame.columns) == ["gamma", "crlb_var", "empirical_var", "ratio", "ratio_se", "bias"]
        expected_se = (2.0 / 199.0) ** 0.5 * frame["ratio"].to_numpy()
        assert frame["ratio_se"].to_numpy() == pytest.approx(expected_se, rel=1e-12)
        assert frame["crlb_var"].iloc[1] == pytest.approx(frame["crlb_var"].iloc[0] / 10.0, rel=1e-12)
        assert (frame["empirical_var"] > 0).all()

    def test_output_is_deterministic(self, tmp_path):
        config = write_config(tmp_path, {"fig2": {"sigma_grid": [2.0, 6.0]}})
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["fig2", "--config", config, "--samples", "10000", "--workers", "1", "--out", str(first)])
        main(["fig2", "--config", config, "--samples", "10000", "--workers", "3", "--out", str(second)])
        assert first.read_bytes() == second.read_bytes()

    def test_stdout_when_no_out(self, tmp_path, capsys):
        config = write_config(tmp_path, {"crlb": {"gammas": [1000.0], "n_trials": 100}})
        assert main(["crlb", "--config", config]) == EXIT_OK
        assert "gamma,crlb_var" in capsys.readouterr().out


class TestEcCommand:
    def test_json_document(self, tmp_path):
        out = tmp_path / "ec.json"
        assert main(["ec", "--out", str(out)]) == EXIT_OK
        document = json.loads(out.read_text(encoding="utf-8"))
        assert document["prob_mode"] == "geometric_prior"
        assert document["ec_spectral"] == pytest.approx(document["ec_bits_per_use"], abs=1e-10)
        assert 0 < document["ec_bits_per_use"] < document["mean_service_rate"]
        assert document["params"]["sigma_d_m"] == 5.0

    def test_paper_literal_flag(self, tmp_path):
        out = tmp_path / "ec.json"
        assert main(["ec", "--paper-literal", "--out", str(out)]) == EXIT_OK
        document = json.loads(out.read_text(encoding="utf-8"))
        assert document["prob_mode"] == "paper_literal"
        assert document["mgf_mode"] == "paper_literal"


class TestUsageErrors:
    @pytest.mark.parametrize(
        "data",
        [
            {"sigma_d_m": -1.0},
            {"unknown": 1},
            {"fig2": {"sigma_grid": [5.0, 1.0]}},
        ],
    )
    def test_bad_config_exits_2(self, tmp_path, data):
        config = write_config(tmp_path, data)
        assert main(["fig2", "--config", config, "--samples", "1000"]) == EXIT_CONFIG_ERROR

    def test_malformed_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        assert main(["ec", "--config", str(path)]) == EXIT_CONFIG_ERROR

    def test_bad_seed_exits_2(self):
        assert main(["ec", "--seed", "-1"]) == EXIT_CONFIG_ERROR


class TestValidateCommand:
    def test_passes_on_consistent_model(self, tmp_path, capsys):
        assert get_settings().validation_se_multiplier == 3.0
        config = write_config(
            tmp_path,
            {"validate": {"thetas": [0.01], "spectral_configurations": 1, "include_queue": False}},
        )
        out = tmp_path / "report.json"
        code = main(["validate", "--config", config, "--samples", "1000000", "--out", str(out)])

        text = capsys.readouterr().out
        assert code == EXIT_OK, text
        assert "checks passed" in text
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["ok"]
        names = {c["name"] for c in report["checks"]}
        assert {"state_prob_S1", "ec_theta_0.01", "spectral_theta_0.01", "s7_consistency"} <= names

        (trace_file,) = (tmp_path / "logs").glob("*.json")
        events = [json.loads(line)["event"] for line in trace_file.read_text(encoding="utf-8").splitlines()]
        assert events.count("check") == len(report["checks"])
        assert events[-1] == "command"

    def test_failure_exits_1(self, monkeypatch, capsys):
        report = ValidationReport([CheckResult("ec_theta_0.01", False, "forced")], {"seed": 1})
        monkeypatch.setattr(experiments.ExperimentService, "run_validate", lambda self: report)
        assert main(["validate"]) == EXIT_CHECK_FAILED
        assert "FAIL" in capsys.readouterr().out


class TestValidationReport:
    def test_expected_fail_does_not_fail_run(self):
        report = ValidationReport(
            [CheckResult("a", True, ""), CheckResult("s7_consistency", False, "", expected_fail=True)], {}
        )
        assert report.ok
        assert report.failures == []
        assert report.to_dict()["checks"][1]["outcome"] == "expected-fail (paper literal)"
