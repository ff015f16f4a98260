import json

import numpy as np
import pytest
from click.testing import CliRunner

from anytime_pt.exceptions import ConfigError, RunAborted
from anytime_pt.harness import (dump_config, get_preset, list_presets, preset_names,
                                report_from_dir, run_experiment, validate_config)
from anytime_pt.harness import cli
from anytime_pt.harness.runner import second_component_threshold, gamma_target

GAMMA = {"degree": 1, "grid": [0.0, 15.0, 0.25], "hold": [0.15, 0.25], "initial": 1.0,
         "psi": 1.0, "sigma": 0.5, "target": [3.0, 0.15, 20.0, 0.25]}


def gamma_cfg(**kw):
    d = dict(experiment="gamma-mixture", algorithm="APTMC-1", budget=2000.0, chains=4,
             delta=5.0, burn_in=100.0, model=dict(GAMMA))
    d.update(kw)
    return d


def errors_of(d):
    with pytest.raises(ConfigError) as info:
        validate_config(d)
    return info.value.errors


# validation --------------------------------------------------------------

def test_valid_config_round_trips_through_toml():
    cfg = validate_config(gamma_cfg(seed=4, record="all"))
    again = validate_config(dump_config(cfg))
    assert again == cfg and again.digest() == cfg.digest()


def test_every_preset_round_trips_through_toml():
    for name in preset_names():
        cfg = get_preset(name)
        assert validate_config(dump_config(cfg)) == cfg


def test_topology_mismatch_names_the_fields():
    errs = errors_of(gamma_cfg(algorithm="APTMC-W", chains=20, workers=4, chains_per_worker=4))
    assert any("workers=4" in e and "chains_per_worker=4" in e and "chains=20" in e
               for e in errs)


def test_one_chain_per_worker_is_rejected_for_anytime_multi():
    errs = errors_of(gamma_cfg(algorithm="APTMC-W", chains=4, workers=4))
    assert any("two chains per worker" in e for e in errs)


def test_unknown_algorithm_suggests_close_names():
    errs = errors_of(gamma_cfg(algorithm="APTMC1"))
    assert any("'APTMC-1'" in e for e in errs)


def test_unknown_field_suggests_close_names():
    errs = errors_of(gamma_cfg(budgte=10.0))
    assert any("'budget'" in e for e in errs)


def test_all_problems_are_reported_together():
    errs = errors_of(gamma_cfg(budget=-1.0, delta=None, tiers="ring"))
    assert len(errs) >= 3


@pytest.mark.parametrize("changes, fragment", [
    ({"burn_in": 5000.0}, "burn_in"),
    ({"delta": None}, "delta"),
    ({"mode": "wall-clock"}, "virtual mode only"),
    ({"algorithm": "ABC"}, "not an ABC experiment"),
    ({"chains": 6, "model": dict(GAMMA, copies=4)}, "multiple of model.copies"),
    ({"model": dict(GAMMA, sigma=-1.0)}, "model.sigma"),
])
def test_validation_messages(changes, fragment):
    assert any(fragment in e for e in errors_of(gamma_cfg(**changes)))


def test_base_preset_with_overrides():
    cfg = validate_config('base = "gamma-p1-corrected-1proc"\nbudget = 5000.0\n'
                          'burn_in = 0.0\n[model]\ndegree = 2\n')
    assert cfg.budget == 5000.0 and cfg.model["degree"] == 2 and cfg.chains == 8


def test_digest_ignores_seed_but_not_settings():
    a = validate_config(gamma_cfg())
    assert a.digest() == a.with_(seed=99).digest()
    assert a.digest() != a.with_(delta=6.0).digest()


def test_unparseable_toml():
    with pytest.raises(ConfigError):
        validate_config("budget = = 1")


# presets -----------------------------------------------------------------

def test_preset_names_are_stable():
    expected = (
        [f"gamma-p{p}-{c}-{w}" for p in range(4) for c in ("corrected", "uncorrected")
         for w in ("1proc", "wproc")]
        + [f"gamma-perf-p{p}-{a}" for p in range(4) for a in ("aptmc1", "aptmcw", "mcmc")]
        + ["idle-w4k5-aptmcw", "idle-w4k5-ptmcw",
           "lv-table2-abc", "lv-table2-aptmc1", "lv-table2-ptmc1",
           "lv-table3-aptmc1", "lv-table3-aptmcw", "lv-table3-ptmc1", "lv-table3-ptmcw",
           "normal-abc-corrected", "normal-abc-uncorrected",
           "normal-abc-virtual-corrected", "normal-abc-virtual-uncorrected"]
    )
    assert preset_names() == sorted(expected)


def test_list_presets_has_descriptions():
    rows = list_presets()
    assert len(rows) == 41 and all(desc for _, desc in rows)


def test_lv_presets_match_their_tables():
    assert get_preset("lv-table2-aptmc1").chains == 6
    multi = get_preset("lv-table3-aptmcw")
    assert (multi.workers, multi.k, multi.tiers, multi.overhead) == (4, 5, "two-tier", 1.1)
    assert all(get_preset(n).budget == 1800.0 for n in preset_names() if n.startswith("lv-"))


def test_perf_presets_record_paper_budget():
    assert get_preset("gamma-perf-p0-mcmc").shrink_factor == 1.0
    assert get_preset("gamma-perf-p2-aptmc1").shrink_factor == 10.0


def test_unknown_preset_suggests():
    with pytest.raises(ConfigError, match="gamma-p1-corrected-1proc"):
        get_preset("gamma-p1-corected-1proc")


def test_second_component_threshold_splits_the_mass():
    # oracle: root of the two weighted component densities, scipy brentq
    target = gamma_target(get_preset("gamma-p1-corrected-1proc"))
    assert second_component_threshold(target) == pytest.approx(1.95519742482, rel=1e-10)


# runs --------------------------------------------------------------------

def test_run_writes_artifacts(tmp_path):
    cfg = validate_config(gamma_cfg(record="all"))
    result = run_experiment(cfg, out_dir=tmp_path / "run")
    out = tmp_path / "run"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["digest"] == cfg.digest() and manifest["seed"] == 0
    for name in ("report.json", "runtime.json", "run_1/timeline.csv", "run_1/chain_4.csv"):
        assert (out / name).is_file()
    assert "tv_target" in result.report["density"]


def test_burn_in_removes_early_samples(tmp_path):
    cfg = validate_config(gamma_cfg())
    result = run_experiment(cfg, out_dir=tmp_path)
    times = np.loadtxt(tmp_path / "run_1" / "chain_4.csv", delimiter=",", skiprows=1,
                       usecols=2)
    kept = int(np.sum(times > cfg.burn_in))
    assert result.report["diagnostics"]["parameters"][0]["n"] == kept
    assert kept < len(times) - 1


def test_virtual_reruns_are_byte_identical(tmp_path):
    cfg = validate_config(gamma_cfg(record="all", repeats=2))
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    for name in manifest["files"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_repeats_use_distinct_seeds(tmp_path):
    cfg = validate_config(gamma_cfg(repeats=2))
    run_experiment(cfg, out_dir=tmp_path)
    a = (tmp_path / "run_1" / "chain_4.csv").read_bytes()
    b = (tmp_path / "run_2" / "chain_4.csv").read_bytes()
    assert a != b


def test_report_is_recomputed_from_directory(tmp_path):
    cfg = validate_config(gamma_cfg())
    result = run_experiment(cfg, out_dir=tmp_path)
    assert report_from_dir(tmp_path) == json.loads(json.dumps(result.report))


# CLI ---------------------------------------------------------------------

def test_cli_list_presets():
    res = CliRunner().invoke(cli.main, ["list-presets"])
    assert res.exit_code == 0
    lines = res.output.splitlines()
    assert len(lines) == 41 and all("\t" in line for line in lines)


def test_cli_run_preset_and_report(tmp_path):
    out = tmp_path / "run"
    res = CliRunner().invoke(cli.main, ["run", "gamma-p1-corrected-1proc", "--budget", "3000",
                                        "--seed", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert f"output\t{out}" in res.output and "tv_target" in res.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 2 and manifest["config"]["burn_in"] == 0.0
    rep = CliRunner().invoke(cli.main, ["report", str(out)])
    assert rep.exit_code == 0
    assert json.loads(rep.output) == json.loads((out / "report.json").read_text())


def test_cli_run_toml_file(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(dump_config(validate_config(gamma_cfg(budget=500.0, burn_in=0.0))))
    res = CliRunner().invoke(cli.main, ["run", str(path), "--uncorrected", "--worst-case",
                                        "--out", str(tmp_path / "o")])
    assert res.exit_code == 0, res.output
    cfg = json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]
    assert cfg["corrected"] is False and cfg["worst_case"] is True


def test_cli_config_errors_exit_2(tmp_path):
    runner = CliRunner()
    assert runner.invoke(cli.main, ["run", "no-such-preset"]).exit_code == cli.EXIT_CONFIG
    assert runner.invoke(cli.main, ["run", str(tmp_path / "missing.toml")]).exit_code == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "gamma-mixture"\nalgorithm = "APTMC-W"\nbudget = 10.0\n'
                   'chains = 20\nworkers = 4\nchains_per_worker = 4\n')
    res = runner.invoke(cli.main, ["run", str(bad)])
    assert res.exit_code == 2 and "chains_per_worker" in res.output
    assert runner.invoke(cli.main, ["report", str(tmp_path)]).exit_code == 2


def test_cli_abort_exits_3(monkeypatch, tmp_path):
    def abort(cfg, out_dir=None):
        raise RunAborted("worker 2 stopped responding")

    monkeypatch.setattr(cli, "run_experiment", abort)
    res = CliRunner().invoke(cli.main, ["run", "idle-w4k5-aptmcw", "--out", str(tmp_path)])
    assert res.exit_code == cli.EXIT_ABORT and "worker 2" in res.output
