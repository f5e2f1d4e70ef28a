import hashlib
import importlib.resources
import json

import numpy as np
import pytest

from epinfer import cli
from epinfer.dataio import ingest_cases, load_dataset, read_cases_csv


def run_cli(*argv):
    return cli.main(list(argv))


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run_cli("simulate", "--scenario", "scn1", "--seed", "7",
                   "--out", str(out), "--quiet") == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("fit")
    code = run_cli(
        "fit", "--dataset", str(sim_dir / "dataset.json"), "--chains", "3",
        "--iters", "1500", "--burn-in", "500", "--thin", "5", "--seed", "5",
        "--out", str(out), "--quiet",
    )
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_and_determinism(self, sim_dir, tmp_path):
        again = tmp_path / "again"
        assert run_cli("simulate", "--scenario", "scn1", "--seed", "7",
                       "--out", str(again), "--quiet") == 0
        for name in ("dataset.json", "truth.csv"):
            assert digest(sim_dir / name) == digest(again / name)

    def test_scn3_has_eighty_days(self, tmp_path):
        out = tmp_path / "scn3"
        assert run_cli("simulate", "--scenario", "scn3", "--out", str(out), "--quiet") == 0
        obs = load_dataset(out / "dataset.json")
        assert len(obs.B) == 80

    def test_unknown_scenario_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            run_cli("simulate", "--scenario", "scn9", "--out", str(tmp_path), "--quiet")
        assert err.value.code == 2

    def test_missing_scenario_flag_exits_2(self, tmp_path):
        assert run_cli("simulate", "--out", str(tmp_path), "--quiet") == 2

    def test_stochastic_variant(self, tmp_path):
        out = tmp_path / "stoch"
        assert run_cli("simulate", "--scenario", "scn1", "--stochastic",
                       "--seed", "3", "--out", str(out), "--quiet") == 0
        obs = load_dataset(out / "dataset.json")
        assert np.all(obs.B >= 0.5)

    def test_manifest_digests_match_files(self, sim_dir):
        manifest = json.loads((sim_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 7
        for path, sha in manifest["outputs"].items():
            with open(path, "rb") as fh:
                assert hashlib.sha256(fh.read()).hexdigest() == sha


class TestFit:
    def test_outputs(self, fit_dir, sim_dir):
        draws_lines = (fit_dir / "draws.csv").read_text().splitlines()
        assert len(draws_lines) == 1 + (1500 - 500) // 5
        summary = json.loads((fit_dir / "summary.json").read_text())
        assert summary["n_draws"] == 200
        assert summary["link"] == "logit"
        assert summary["dataset_path"].endswith("dataset.json")
        assert "r0" in summary["acceptance"]
        band_lines = (fit_dir / "re_band.csv").read_text().splitlines()
        obs = load_dataset(sim_dir / "dataset.json")
        assert len(band_lines) == 1 + obs.T + 1

    def test_paper_scale_default_draw_count(self):
        from epinfer.sampler import SamplerConfig

        assert SamplerConfig().n_draws == (50000 - 20000) // 30 == 1000

    def test_missing_dataset_exits_2(self, tmp_path):
        assert run_cli("fit", "--dataset", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path), "--quiet") == 2

    def test_config_file_and_cli_precedence(self, sim_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("chains = 2\niters = 900\nburn_in = 300\nthin = 3\nseed = 9\n")
        out = tmp_path / "fitcfg"
        assert run_cli("fit", "--dataset", str(sim_dir / "dataset.json"),
                       "--config", str(cfg), "--iters", "600",
                       "--out", str(out), "--quiet") == 0
        # CLI --iters 600 wins over config 900; config burn_in/thin apply
        n_rows = len((out / "draws.csv").read_text().splitlines()) - 1
        assert n_rows == (600 - 300) // 3

    def test_unknown_config_key_exits_2(self, sim_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 1\n")
        assert run_cli("fit", "--dataset", str(sim_dir / "dataset.json"),
                       "--config", str(cfg), "--out", str(tmp_path), "--quiet") == 2

    def test_prior_preset_flag(self, sim_dir, tmp_path):
        out = tmp_path / "fitp"
        assert run_cli("fit", "--dataset", str(sim_dir / "dataset.json"),
                       "--preset", "cloglog", "--chains", "2", "--iters", "400",
                       "--burn-in", "200", "--thin", "4", "--seed", "1",
                       "--out", str(out), "--quiet") == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["link"] == "cloglog"


class TestForecast:
    def test_outputs_and_determinism(self, fit_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli("forecast", "--draws", str(fit_dir / "draws.csv"),
                           "--horizon", "10", "--seed", "3",
                           "--out", str(out), "--quiet") == 0
        for name in ("forecast_cases.csv", "forecast_re.csv"):
            assert digest(a / name) == digest(b / name)
        lines = (a / "forecast_cases.csv").read_text().splitlines()
        assert len(lines) == 11
        assert lines[0] == "date,median,lo95,hi95"

    def test_default_horizon_is_thirty(self, fit_dir, tmp_path):
        out = tmp_path / "h30"
        assert run_cli("forecast", "--draws", str(fit_dir / "draws.csv"),
                       "--seed", "1", "--out", str(out), "--quiet") == 0
        assert len((out / "forecast_cases.csv").read_text().splitlines()) == 31

    def test_zero_horizon_exits_2(self, fit_dir, tmp_path):
        assert run_cli("forecast", "--draws", str(fit_dir / "draws.csv"),
                       "--horizon", "0", "--out", str(tmp_path), "--quiet") == 2

    def test_keep_draws(self, fit_dir, tmp_path):
        out = tmp_path / "kd"
        assert run_cli("forecast", "--draws", str(fit_dir / "draws.csv"),
                       "--horizon", "4", "--seed", "2", "--keep-draws",
                       "--out", str(out), "--quiet") == 0
        assert (out / "forecast_cases_draws.csv").exists()
        assert (out / "forecast_re_draws.csv").exists()


class TestDiagnose:
    def test_outputs(self, fit_dir, sim_dir, tmp_path):
        out = tmp_path / "diag"
        assert run_cli("diagnose", "--draws", str(fit_dir / "draws.csv"),
                       "--dataset", str(sim_dir / "dataset.json"),
                       "--out", str(out), "--quiet") == 0
        geweke = (out / "geweke.csv").read_text().splitlines()
        params = [line.split(",")[0] for line in geweke[1:]]
        assert params[0] == "I_U0" and "eta_0" in params
        chi2 = json.loads((out / "chi2_fit.json").read_text())
        assert 0.0 <= chi2["exceed_proportion"] <= 1.0
        assert chi2["threshold"] == pytest.approx(9.487729036781154)
        qq = (out / "qq.csv").read_text().splitlines()
        assert qq[0] == "empirical_quantile,theoretical_quantile"
        assert len(qq) == 201

    def test_empty_draws_exits_2(self, sim_dir, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("r0,alpha_inv,sigma_beta2,rho,sigma_gamma2\n")
        assert run_cli("diagnose", "--draws", str(empty),
                       "--dataset", str(sim_dir / "dataset.json"),
                       "--out", str(tmp_path), "--quiet") == 2


class TestDemoIdentifiability:
    def test_outputs_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli("demo-identifiability", "--out", str(out), "--quiet") == 0
        assert digest(a / "identifiability.csv") == digest(b / "identifiability.csv")
        summary = json.loads((a / "identifiability_summary.json").read_text())
        assert summary["max_relative_B_mismatch"] < 1e-9
        assert summary["max_re_gap"] > 0.2
        assert summary["gamma_2"] == pytest.approx(0.14736842105263157)


class TestBundledExample:
    def test_synthetic_csv_ingests_end_to_end(self, tmp_path):
        ref = importlib.resources.files("epinfer.data") / "synthetic_cases.csv"
        raw = read_cases_csv(str(ref), population=12671821)
        obs = ingest_cases(raw)
        assert obs.I_D0 >= 100
        assert len(obs.B) >= 90
        assert np.all(obs.B > 0)
