import json
import os

import pytest

from sembit.cli import main
from sembit.scenario import GenerationConfig, generate_scenario, scenario_to_dict


def test_generate_then_validate_then_run_single(tmp_path, capsys):
    scenario_path = tmp_path / "s.json"
    assert main(["generate", "--mus", "4", "--bss", "2", "--seed", "1",
                 "--out", str(scenario_path)]) == 0
    assert scenario_path.exists()

    assert main(["validate-scenario", str(scenario_path)]) == 0
    out = capsys.readouterr().out
    assert "ok" in out and "8 links" in out

    out_dir = tmp_path / "results"
    assert main(["run", "--experiment", "single-run", "--scenario", str(scenario_path),
                 "--seed", "3", "--out", str(out_dir)]) == 0
    assert (out_dir / "single_run.csv").exists()
    assert (out_dir / "convergence.csv").exists()

    assert main(["summarize", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "proposed" in out


def test_validate_scenario_rejects_bad_file(tmp_path, capsys):
    s = generate_scenario(GenerationConfig(num_users=2, num_stations=1, seed=0))
    doc = scenario_to_dict(s)
    doc["users"][0]["mu_match"] = 10.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate-scenario", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "mu_match" in err


def test_validate_scenario_missing_file(tmp_path):
    assert main(["validate-scenario", str(tmp_path / "nope.json")]) == 2


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "--experiment", "single-run", "--bogus"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_experiment_is_usage_error():
    assert main(["run", "--experiment", "no-such-thing"]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert "generate" in out and "summarize" in out


def test_summarize_empty_dir(tmp_path, capsys):
    assert main(["summarize", str(tmp_path)]) == 0
    assert "no results" in capsys.readouterr().out


def test_run_rerun_byte_identical(tmp_path):
    args = ["run", "--experiment", "validate-scq", "--seed", "5",
            "--grid", "900,1000", "--slots", "20000", "--reps", "3"]
    d1, d2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(d1)]) == 0
    assert main(args + ["--out", str(d2)]) == 0
    f1 = (d1 / "validate_scq.csv").read_bytes()
    f2 = (d2 / "validate_scq.csv").read_bytes()
    assert f1 == f2


def test_run_sweep_smoke_with_threads(tmp_path):
    assert main(["run", "--experiment", "sweep-bs", "--seed", "2",
                 "--grid", "1,2", "--trials", "2", "--mus", "4",
                 "--threads", "2", "--out", str(tmp_path / "a")]) == 0
    body = (tmp_path / "a" / "sweep_bs.csv").read_text().splitlines()
    assert body[0] == "num_stations,scheme,metric,mean,ci_halfwidth,trials"
    # every (grid point, scheme, metric) combination appears exactly once
    assert len(body) == 1 + 2 * 5 * 2
    # worker count must not change the result
    assert main(["run", "--experiment", "sweep-bs", "--seed", "2",
                 "--grid", "1,2", "--trials", "2", "--mus", "4",
                 "--threads", "1", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep_bs.csv").read_bytes() == \
        (tmp_path / "b" / "sweep_bs.csv").read_bytes()


def test_rate_cdf_rows_are_distribution(tmp_path):
    assert main(["run", "--experiment", "rate-cdf", "--seed", "4", "--mus", "5",
                 "--bss", "2", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "rate_cdf.csv").read_text().splitlines()[1:]
    by_scheme = {}
    for row in rows:
        scheme, rate, cdf = row.split(",")
        by_scheme.setdefault(scheme, []).append((float(rate), float(cdf)))
    for scheme, pts in by_scheme.items():
        rates = [r for r, _ in pts]
        cdfs = [c for _, c in pts]
        assert rates == sorted(rates)
        assert cdfs[-1] == pytest.approx(1.0)
