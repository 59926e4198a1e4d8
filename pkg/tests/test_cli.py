"""Config parsing, experiment execution, output layout, reproducibility."""

import json

import pytest

from sentinelsim.cli import (
    ConfigError,
    ExperimentSpec,
    load_config,
    main,
    parse_config,
    run_experiment,
)

FAST = """
n_nodes = 40
duration = 200
seed = 9
"""


def test_empty_text_yields_all_defaults():
    spec = parse_config("")
    assert spec.base.n_nodes == 200
    assert spec.base.field_width == 50.0
    assert spec.base.r_sense == 10.0
    assert spec.base.delta == 20.0
    assert spec.base.duration == 6000.0
    assert spec.base.k_probes == 3
    assert spec.base.t_w == 1.0
    assert spec.base.beta == 2.0
    assert spec.base.msg_size == 25
    assert spec.protocol == "sentinel"
    assert spec.replications == 1


def test_simple_overrides():
    spec = parse_config("beta = 1.5\nn_nodes = 300\nprotocol = both\nreplications = 5")
    assert spec.base.beta == 1.5
    assert spec.base.n_nodes == 300
    assert spec.protocol == "both"
    assert spec.replications == 5


def test_invariant_violation_reported():
    with pytest.raises(ConfigError):
        parse_config("delta = 30")  # needs delta <= 2 * r_sense


def test_unknown_key_reported_with_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("n_nodes = 10\n\nbogus_key = 5")


def test_type_mismatch_reported_with_line_number():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("n_nodes = plenty")


def test_energy_section():
    spec = parse_config("[energy]\np_active = 0.02\ninitial_energy = 500")
    assert spec.base.energy.p_active == 0.02
    assert spec.base.energy.initial_energy == 500.0
    with pytest.raises(ConfigError):
        parse_config("[energy]\nvoltage = 3")


def test_sweep_section():
    spec = parse_config("[sweep]\nn_nodes = 100, 200, 300, 400")
    assert spec.sweep == [("n_nodes", [100, 200, 300, 400])]
    with pytest.raises(ConfigError):
        parse_config("[sweep]\nenergy = 1, 2")


def test_failure_injection_parsing():
    spec = parse_config("n_nodes = 50\nfailure_injections = 12@1000, 40@4000")
    assert spec.base.failure_injections == [(12, 1000.0), (40, 4000.0)]
    with pytest.raises(ConfigError):
        parse_config("failure_injections = 12:1000")
    # unknown node id and out-of-duration times die at validation
    with pytest.raises(ConfigError):
        parse_config("n_nodes = 10\nfailure_injections = 99@100")
    with pytest.raises(ConfigError):
        parse_config("n_nodes = 10\nfailure_injections = 3@7000")


def test_comments_and_blank_lines_ignored():
    spec = parse_config("# header\n\nn_nodes = 25  # inline\n")
    assert spec.base.n_nodes == 25


def test_single_run_layout(tmp_path):
    spec = parse_config(FAST)
    spec.output_dir = tmp_path / "out"
    assert run_experiment(spec) == 0
    run_dir = spec.output_dir / "base" / "sentinel_rep0"
    assert (run_dir / "metrics.csv").exists()
    assert (run_dir / "summary.json").exists()
    assert (spec.output_dir / "sweep_summary.csv").exists()
    payload = json.loads((run_dir / "summary.json").read_text())
    assert payload["config"]["protocol"] == "sentinel"
    header = (run_dir / "metrics.csv").read_text().splitlines()[0]
    assert header.startswith("time,active_count,sleeping_count")


def test_replications_get_distinct_seeds(tmp_path):
    spec = parse_config(FAST + "replications = 3")
    spec.output_dir = tmp_path / "out"
    assert run_experiment(spec) == 0
    summary = (spec.output_dir / "sweep_summary.csv").read_text().splitlines()
    seeds = [line.split(",")[3] for line in summary[1:]]
    assert seeds == ["9", "10", "11"]
    metrics = [
        (spec.output_dir / "base" / f"sentinel_rep{i}" / "metrics.csv").read_text()
        for i in range(3)
    ]
    assert len(set(metrics)) == 3


def test_paired_protocols_share_seed_and_report_ratio(tmp_path):
    spec = parse_config(FAST + "protocol = both")
    spec.output_dir = tmp_path / "out"
    assert run_experiment(spec) == 0
    point = spec.output_dir / "base"
    assert (point / "sentinel_rep0" / "metrics.csv").exists()
    assert (point / "peas_rep0" / "metrics.csv").exists()
    sent = json.loads((point / "sentinel_rep0" / "summary.json").read_text())
    assert sent["energy_ratio_vs_baseline"] is not None
    lines = (spec.output_dir / "sweep_summary.csv").read_text().splitlines()
    sent_row = next(line for line in lines[1:] if ",sentinel," in line)
    assert sent_row.split(",")[-1] != ""


def test_sweep_creates_one_directory_per_point(tmp_path):
    spec = parse_config(FAST + "[sweep]\nn_nodes = 10, 20")
    spec.output_dir = tmp_path / "out"
    assert run_experiment(spec) == 0
    assert (spec.output_dir / "n_nodes_10").is_dir()
    assert (spec.output_dir / "n_nodes_20").is_dir()
    lines = (spec.output_dir / "sweep_summary.csv").read_text().splitlines()
    assert len(lines) == 3  # header + one row per point


def test_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        spec = parse_config(FAST)
        spec.output_dir = tmp_path / name
        assert run_experiment(spec) == 0
    read = lambda p: (tmp_path / p).read_bytes()
    assert read("a/base/sentinel_rep0/metrics.csv") == read("b/base/sentinel_rep0/metrics.csv")
    assert read("a/sweep_summary.csv") == read("b/sweep_summary.csv")


def test_main_overrides_and_exit_codes(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(FAST)
    out = tmp_path / "results"
    rc = main(
        [
            "--config", str(cfg),
            "--protocol", "peas",
            "--nodes", "20",
            "--duration", "100",
            "--seed", "4",
            "--output", str(out),
        ]
    )
    assert rc == 0
    assert (out / "base" / "peas_rep0" / "metrics.csv").exists()


def test_main_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("delta = 99")
    assert main(["--config", str(cfg)]) == 1
    assert "config error" in capsys.readouterr().err


def test_spec_validation():
    spec = ExperimentSpec()
    spec.replications = 0
    with pytest.raises(ValueError):
        spec.validate()
    spec = ExperimentSpec()
    spec.sweep = [("not_a_field", [1])]
    with pytest.raises(ValueError):
        spec.validate()


def test_failed_sweep_point_outputs_are_removed(tmp_path, monkeypatch):
    import sentinelsim.cli as cli_mod

    real = cli_mod.simulate

    def exploding(cfg):
        if cfg.n_nodes == 20:
            raise RuntimeError("disk full")
        return real(cfg)

    monkeypatch.setattr(cli_mod, "simulate", exploding)
    spec = parse_config(FAST + "[sweep]\nn_nodes = 10, 20")
    spec.output_dir = tmp_path / "out"
    assert run_experiment(spec) == 2
    assert not (spec.output_dir / "n_nodes_20").exists()
