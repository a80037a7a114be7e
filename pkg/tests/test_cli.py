import json

import pytest

from bdfpt import approx_pdf_from_spec, imitation
from bdfpt.cli import main


def run_cli(*args):
    return main(list(args))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestSpectrumCommand:
    def test_artifacts_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "spec"
        rc = run_cli(
            "spectrum", "--model", "ou", "--N", "200", "--h", "0.5",
            "--output", str(out),
        )
        assert rc == 0
        status = json.loads(capsys.readouterr().out)
        assert status["status"] == "ok"
        report = read_json(out / "spectrum_report.json")
        assert set(report) >= {
            "eigenvalues", "sqrt_fit_slope", "sqrt_fit_intercept", "fit_window", "r_squared",
        }
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "rank,eigenvalue,sqrt_eigenvalue"
        assert len(lines) == 101
        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "spectrum"
        assert "prng_family" in manifest and "wall_clock_seconds" in manifest

    def test_explicit_state_instead_of_h(self, tmp_path):
        out = tmp_path / "s"
        assert run_cli(
            "spectrum", "--model", "ou", "--N", "100", "--state", "40", "--output", str(out)
        ) == 0

    def test_h_and_state_conflict(self, tmp_path, capsys):
        rc = run_cli(
            "spectrum", "--model", "ou", "--N", "100", "--h", "0.5", "--state", "40",
            "--output", str(tmp_path),
        )
        assert rc == 2
        assert json.loads(capsys.readouterr().out)["error"] == "config"


class TestApproxCommand:
    def test_imitation_fig_setup(self, tmp_path):
        # imitation eps=0.5, N=1000, h=0.3
        out = tmp_path / "a"
        rc = run_cli(
            "approx", "--model", "imitation", "--epsilon", "0.5", "--N", "1000",
            "--h", "0.3", "--output", str(out),
        )
        assert rc == 0
        params = read_json(out / "mixture_params.json")
        assert set(params) == {"rho", "lambda1", "lambda2", "lambda_m"}
        expect = approx_pdf_from_spec(imitation(0.5, 1000), 300)
        assert params["rho"] == pytest.approx(expect.rho, rel=1e-12)
        assert params["lambda1"] == pytest.approx(expect.lambda1, rel=1e-12)
        lines = (out / "density.csv").read_text().splitlines()
        assert lines[0] == "theta,pdf"
        assert len(lines) == 401


class TestSimulateCommand:
    def test_deterministic_repetition_bit_identical(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        args = [
            "simulate", "--model", "ou", "--N", "100", "--h", "0.5",
            "--n-samples", "3000", "--seed", "42",
        ]
        assert run_cli(*args, "--output", str(out1)) == 0
        assert run_cli(*args, "--output", str(out2)) == 0
        assert (out1 / "durations.csv").read_bytes() == (out2 / "durations.csv").read_bytes()
        assert (out1 / "log_binned_pdf.csv").read_bytes() == (
            out2 / "log_binned_pdf.csv"
        ).read_bytes()

    def test_burst_kind(self, tmp_path):
        out = tmp_path / "b"
        rc = run_cli(
            "simulate", "--model", "imitation", "--epsilon", "1.0", "--N", "100",
            "--h", "0.5", "--kind", "burst", "--n-samples", "500", "--seed", "1",
            "--output", str(out),
        )
        assert rc == 0
        meta = read_json(out / "durations.csv.json")
        assert meta["kind"] == "burst"
        assert meta["threshold_state"] == 50
        assert meta["n_durations"] == 500

    def test_rate_table_model(self, tmp_path):
        from bdfpt import ornstein_uhlenbeck, write_rates_csv

        rates = tmp_path / "rates.csv"
        write_rates_csv(ornstein_uhlenbeck(50), rates)
        out = tmp_path / "t"
        rc = run_cli(
            "simulate", "--model", "table", "--rates", str(rates), "--h", "0.5",
            "--n-samples", "200", "--output", str(out),
        )
        assert rc == 0


class TestFitCommand:
    def test_pipeline_consistent_with_approximation(self, tmp_path):
        # fit simulate's own output; the recovered slow mode must agree with
        # the spectral approximation within the round-trip tolerance
        from bdfpt import bessel_like

        sim_out = tmp_path / "sim"
        rc = run_cli(
            "simulate", "--model", "bessel-like", "--nu", "0.5", "--N", "1000",
            "--h", "0.3", "--n-samples", "30000", "--seed", "7", "--output", str(sim_out),
        )
        assert rc == 0
        fit_out = tmp_path / "fit"
        rc = run_cli("fit", "--input", str(sim_out / "durations.csv"), "--output", str(fit_out))
        assert rc == 0
        result = read_json(fit_out / "fit_result.json")
        assert set(result) == {
            "rho", "lambda1", "lambda2", "lambda_m", "residuals", "converged", "objective",
        }
        expect = approx_pdf_from_spec(bessel_like(0.5, 1000), 300)
        assert result["lambda1"] == pytest.approx(expect.lambda1, rel=0.25)
        assert result["rho"] == pytest.approx(expect.rho, rel=0.25)

    def test_missing_input_is_module_error(self, tmp_path, capsys):
        rc = run_cli("fit", "--input", str(tmp_path / "nope.csv"), "--output", str(tmp_path))
        assert rc == 1
        err = json.loads(capsys.readouterr().out)
        assert "error" in err and "message" in err


class TestBesselCommand:
    def test_series_and_approx_artifacts(self, tmp_path):
        out = tmp_path / "b"
        rc = run_cli(
            "bessel", "--nu", "0.5", "--h", "0.7", "--k-max", "500", "--theta-points",
            "50", "--output", str(out),
        )
        assert rc == 0
        lines = (out / "bessel_series.csv").read_text().splitlines()
        assert lines[0] == "theta,pdf,truncation_error"
        assert len(lines) == 51
        assert (out / "bessel_integral_approx.csv").exists()

    def test_em_simulation_shares_duration_format(self, tmp_path):
        out = tmp_path / "em"
        rc = run_cli(
            "bessel", "--nu", "0.5", "--h", "0.7", "--y0", "0.5", "--dt", "4e-5",
            "--n-samples", "300", "--k-max", "100", "--theta-points", "20",
            "--seed", "3", "--output", str(out),
        )
        assert rc == 0
        meta = read_json(out / "bessel_em_durations.csv.json")
        assert meta["kind"] == "inter_burst"
        assert meta["prng_family"]
        assert (out / "bessel_em_pdf.csv").exists()


class TestConfigHandling:
    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# spectrum of the flat process\n"
            "model = ou\n"
            "N = 100\n"
            "h = 0.5\n"
            "seed = 9\n"
        )
        out = tmp_path / "o"
        rc = run_cli(
            "spectrum", "--config", str(cfg), "--h", "0.3", "--output", str(out)
        )
        assert rc == 0
        manifest = read_json(out / "manifest.json")
        assert manifest["config"]["h"] == 0.3  # flag wins
        assert manifest["config"]["N"] == 100  # file supplies the rest

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("model ou\n")
        rc = run_cli("spectrum", "--config", str(cfg), "--output", str(tmp_path))
        assert rc == 2

    def test_unknown_key_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("modle = ou\n")
        assert run_cli("spectrum", "--config", str(cfg), "--output", str(tmp_path)) == 2

    def test_output_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BDFPT_OUTPUT", str(tmp_path / "envdir"))
        rc = run_cli("spectrum", "--model", "ou", "--N", "50", "--h", "0.5")
        assert rc == 0
        assert (tmp_path / "envdir" / "spectrum.csv").exists()

    def test_module_error_exits_1(self, tmp_path, capsys):
        # eigensolver failure: no absorption path (birth cut below threshold)
        from bdfpt import from_table, write_rates_csv

        spec = from_table([1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 1.0, 1.0])
        rates = tmp_path / "rates.csv"
        write_rates_csv(spec, rates)
        rc = run_cli(
            "spectrum", "--model", "table", "--rates", str(rates), "--state", "3",
            "--output", str(tmp_path),
        )
        assert rc == 1
        err = json.loads(capsys.readouterr().out)
        assert err["error"] in ("SpectrumError", "ValueError")


class TestReproduceFigures:
    def test_generates_all_panels(self, tmp_path):
        out = tmp_path / "figs"
        rc = run_cli(
            "reproduce-figures", "--n-samples", "300", "--seed", "5",
            "--bins-per-decade", "4", "--output", str(out),
        )
        assert rc == 0
        # bessel reference: three indices
        for nu in ("0.5", "1.5", "2.5"):
            assert (out / f"bessel_reference/nu_{nu}/bessel_series.csv").exists()
            assert (out / f"bessel_reference/nu_{nu}/bessel_integral_approx.csv").exists()
        # model figures: three panels each plus the spectrum panel
        for model in ("bessel_like", "ou", "imitation"):
            for panel in ("a", "b", "c"):
                base = out / model / f"panel_{panel}"
                assert (base / "inter_burst_pdf.csv").exists()
                assert (base / "burst_pdf.csv").exists()
                assert (base / "approx_density.csv").exists()
                assert (base / "mixture_params.json").exists()
            assert (out / model / "spectrum_panel_d.csv").exists()
        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "reproduce-figures"
        assert len(manifest["artifacts"]) >= 40
