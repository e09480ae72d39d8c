import json
from unittest.mock import patch

import pytest

import avgsamp
import config
from avgsamp import (EXIT_ASSERTION, EXIT_OK, EXIT_USAGE, EXPERIMENTS, Experiment, Param, load_config, main,
                     rows_to_csv, run)
from db_config import connect
from exceptions import ConfigError, QuadratureNotConverged
from kernels import SamplingScheme
from services.results_service import ResultService

SMALL_ZAK = ["--set", "M=200", "--set", "xi_points=64", "--set", "t_points=9", "--set", "sup_xi_points=17"]


@pytest.fixture(autouse=True)
def no_ledger(monkeypatch):
    monkeypatch.setattr(config, "DATABASE_URL", None)


def _outputs(directory, kind):
    csv_files = sorted(directory.glob(f"{kind}-*.csv"))
    json_files = sorted(directory.glob(f"{kind}-*.json"))
    assert len(csv_files) == 1 and len(json_files) == 1
    return csv_files[0].read_text(), json.loads(json_files[0].read_text())


def test_catalog(capsys):
    assert set(EXPERIMENTS) == {"kernel-report", "nyquist-recon", "oversampled-recon", "truncation-bound",
                                "aliasing", "zak-check"}
    assert main(["list"]) == EXIT_OK
    assert "zak-check:" in capsys.readouterr().out
    assert main(["list", "--json"]) == EXIT_OK
    catalog = json.loads(capsys.readouterr().out)
    assert catalog["aliasing"]["params"]["a"]["minimum"] == 0.0
    assert catalog["truncation-bound"]["params"]["n_values"]["default"] == [4, 8, 16, 32]


def test_invalid_parameter_names_the_field(capsys):
    with pytest.raises(ConfigError) as excinfo:
        load_config("kernel-report", overrides=["a=-1"])
    assert excinfo.value.field == "a"
    assert main(["kernel-report", "--set", "a=-1"]) == EXIT_USAGE
    assert "a:" in capsys.readouterr().err


def test_unknown_parameter_rejected():
    with pytest.raises(ConfigError) as excinfo:
        load_config("zak-check", overrides=["bogus=1"])
    assert excinfo.value.field == "bogus"
    with pytest.raises(ConfigError):
        load_config("zak-check", overrides=["M"])
    with pytest.raises(ConfigError):
        load_config("no-such-kind")


def test_param_parsing():
    assert Param(3, int).parse("p", "4") == 4
    with pytest.raises(ConfigError):
        Param(3, int).parse("p", 2.5)
    with pytest.raises(ConfigError):
        Param(1.0).parse("x", True)
    with pytest.raises(ConfigError):
        Param([1], list).parse("n_values", [])
    with pytest.raises(ConfigError):
        Param("box", str, choices=("box",)).parse("profile", "gauss")


def test_config_precedence(tmp_path):
    path = tmp_path / "zak.json"
    path.write_text(json.dumps({"seed": 4, "threads": 2, "M": 30, "params": {"xi_points": 8}}))
    cfg = load_config("zak-check", str(path))
    assert (cfg.seed, cfg.threads, cfg.params["M"], cfg.params["xi_points"]) == (4, 2, 30, 8)
    cfg = load_config("zak-check", str(path), overrides=["M=70"], seed=9, threads=1)
    assert (cfg.seed, cfg.threads, cfg.params["M"], cfg.params["xi_points"]) == (9, 1, 70, 8)
    assert cfg.params["t_points"] == EXPERIMENTS["zak-check"].params["t_points"].default
    assert cfg.echo() == {"kind": "zak-check", "seed": 9, "params": cfg.params}


def test_unreadable_config_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError) as excinfo:
        load_config("zak-check", str(path))
    assert excinfo.value.field == "config"
    with pytest.raises(ConfigError):
        load_config("zak-check", seed=-1)


def test_zak_check_writes_outputs(tmp_path, capsys):
    assert main(["zak-check", "--out", str(tmp_path)] + SMALL_ZAK) == EXIT_OK
    table, document = _outputs(tmp_path, "zak-check")
    assert table.splitlines()[0] == "metric,value,target,satisfied"
    assert document["verdict"] is True
    assert document["version"] == config.VERSION
    assert document["config"]["params"]["M"] == 200
    assert "threads" not in document["config"]
    assert "sup|Z_sinc'|" in capsys.readouterr().out


def test_truncation_output_does_not_depend_on_threads(tmp_path):
    args = ["truncation-bound", "--seed", "7", "--set", "trials=100", "--set", "atoms=16",
            "--set", "n_values=[2, 4]"]
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / threads
        assert main(args + ["--out", str(out), "--threads", threads]) in (EXIT_OK, EXIT_ASSERTION)
        outputs.append(_outputs(out, "truncation-bound"))
    assert outputs[0] == outputs[1]


def test_truncation_bound_needs_spectrum_inside_guard_band(tmp_path, capsys):
    args = ["truncation-bound", "--out", str(tmp_path), "--set", "edge=3.14159", "--set", "trials=200",
            "--set", "atoms=64"]
    assert main(args) == EXIT_USAGE
    assert "edge" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))


def test_oversampled_input_files_are_checked(tmp_path, capsys):
    missing = ["oversampled-recon", "--out", str(tmp_path), "--set", "scheme=/nonexistent/scheme.json",
               "--set", "averages=/nonexistent/a.csv"]
    assert main(missing) == EXIT_USAGE
    assert "scheme" in capsys.readouterr().err

    scheme = tmp_path / "scheme.json"
    scheme.write_text(json.dumps(SamplingScheme.uniform(-5.0, 5.0, 0.2, 0.1).to_dict()))
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"centers": [0.0, 1.0], "kernel": {"a": 0.1}}))
    averages = tmp_path / "averages.csv"
    for path, text in ((averages, "n,val\n0,1.0\n"), (tmp_path / "words.csv", "n,value\n0,abc\n")):
        path.write_text(text)
        args = ["oversampled-recon", "--out", str(tmp_path), "--set", f"scheme={scheme}", "--set", f"averages={path}"]
        assert main(args) == EXIT_USAGE
        assert "averages" in capsys.readouterr().err
    args = ["oversampled-recon", "--out", str(tmp_path), "--set", f"scheme={broken}", "--set", f"averages={averages}"]
    assert main(args) == EXIT_USAGE
    assert "scheme" in capsys.readouterr().err
    assert not list(tmp_path.glob("oversampled-recon-*"))


def test_oversampled_recon_reports_stationary_paths(tmp_path):
    args = ["oversampled-recon", "--out", str(tmp_path), "--set", "functions=1", "--set", "path_trials=100",
            "--set", "path_atoms=8"]
    assert main(args) in (EXIT_OK, EXIT_ASSERTION)
    table, document = _outputs(tmp_path, "oversampled-recon")
    assert "wsk_mse" in table.splitlines()[0].split(",")
    path = document["rows"][-1]
    assert path["function"] == "paths"
    assert path["guarantee"] is True
    assert path["satisfied"] is True
    assert path["path_mse"] >= 0 and path["wsk_mse"] > 0
    assert abs(path["path_mse"] - path["path_exact_mse"]) <= 5 * path["path_stderr"]
    assert main(["oversampled-recon", "--out", str(tmp_path), "--set", "path_trials=10"]) == EXIT_USAGE


def test_degenerate_kernel_is_a_usage_error(tmp_path):
    assert main(["kernel-report", "--out", str(tmp_path), "--set", "a=0", "--set", "b=0"]) == EXIT_USAGE
    assert not list(tmp_path.glob("*.csv"))


def test_oversampled_needs_symmetric_kernels(tmp_path):
    assert main(["oversampled-recon", "--out", str(tmp_path), "--set", "b=0.1"]) == EXIT_USAGE


def test_numerical_failure_is_reported(tmp_path):
    def failing(cfg):
        raise QuadratureNotConverged("no convergence")

    cfg = load_config("zak-check", out=str(tmp_path))
    with patch.dict(avgsamp.EXPERIMENTS, {"zak-check": Experiment("claim", {}, failing)}):
        assert run(cfg) == EXIT_USAGE


def test_rows_to_csv():
    rows = [{"n": 1, "ok": True, "gap": None, "mse": 0.5}, {"n": 2, "ok": False, "gap": 0.1, "mse": 1e-9}]
    assert rows_to_csv(rows) == "n,ok,gap,mse\n1,true,,0.5\n2,false,0.1,1e-09\n"
    assert rows_to_csv([]) == "\n"
    assert rows_to_csv([{"n": 1}, {"n": 2, "wsk_mse": 0.25}]) == "n,wsk_mse\n1,\n2,0.25\n"


def test_runs_are_recorded_in_the_ledger(tmp_path):
    url = f"sqlite:///{tmp_path / 'ledger.db'}"
    assert main(["zak-check", "--out", str(tmp_path), "--db", url] + SMALL_ZAK) == EXIT_OK
    with connect(url)() as session:
        runs = ResultService(session).list_runs("zak-check")
        assert len(runs) == 1
        assert runs[0].status == "ok"
        assert json.loads(runs[0].config)["params"]["M"] == 200
        assert [row["metric"] for row in ResultService.payloads(runs[0])] == [
            "max_abs_zak_sinc_t0_minus_1", "sup_abs_zak_sinc_derivative"]
