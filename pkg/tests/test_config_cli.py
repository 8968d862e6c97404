import filecmp
import json
import os

import pytest

from nanosim.cli import main
from nanosim.config import (ConfigError, PRESETS, apply_overrides,
                            load_config_file, preset_config, validate)


def test_all_presets_validate_cleanly():
    assert len(PRESETS) == 8
    for name in PRESETS:
        cfg = preset_config(name)
        assert cfg["scenario"] == name


def test_unknown_scenario_rejected():
    with pytest.raises(ConfigError, match="scenario"):
        validate({"scenario": "nope"})


def test_unknown_field_is_hard_error_with_path():
    with pytest.raises(ConfigError, match="trimmings"):
        validate({"scenario": "incast_ndp", "trimmings": False})


def test_type_mismatch_names_field():
    with pytest.raises(ConfigError, match="clients"):
        validate({"scenario": "incast_ndp", "clients": "eighty"})


def test_positive_validation():
    with pytest.raises(ConfigError, match="rate_rps"):
        validate({"scenario": "chain_replication", "rate_rps": 0})


def test_enum_validation():
    with pytest.raises(ConfigError, match="policies"):
        validate({"scenario": "core_selection", "policies": ["lifo"]})


def test_override_parses_json_values():
    cfg = preset_config("incast_ndp")
    out = apply_overrides(cfg, ["trimming=false", "clients=10"])
    assert out["trimming"] is False and out["clients"] == 10


def test_override_bad_shape():
    with pytest.raises(ConfigError):
        apply_overrides(preset_config("incast_ndp"), ["garbage"])


def test_malformed_config_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_config_file(str(p))


def test_repo_presets_match_package_presets():
    import nanosim
    pkg_dir = os.path.join(os.path.dirname(nanosim.__file__), "presets")
    repo_dir = os.path.join(os.path.dirname(os.path.dirname(
        os.path.dirname(nanosim.__file__))), "presets")
    if not os.path.isdir(repo_dir):
        pytest.skip("repo checkout layout only")
    names = sorted(os.listdir(pkg_dir))
    assert names == sorted(os.listdir(repo_dir))
    for n in names:
        assert filecmp.cmp(os.path.join(pkg_dir, n), os.path.join(repo_dir, n),
                           shallow=False)
        cfg = load_config_file(os.path.join(repo_dir, n))
        assert cfg["scenario"] == n.removesuffix(".json")


def test_cli_list_names_all_presets(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_cli_run_writes_outputs_and_is_deterministic(tmp_path, capsys):
    args = ["run", "--preset", "loopback_latency", "--seed", "3",
            "--out", str(tmp_path)]
    assert main(args + ["--tag", "a"]) == 0
    assert main(args + ["--tag", "b"]) == 0
    a = tmp_path / "loopback_latency" / "a"
    b = tmp_path / "loopback_latency" / "b"
    for fname in ("config.json", "summary.csv", "samples.csv", "metrics.csv"):
        assert (a / fname).exists()
        assert (a / fname).read_bytes() == (b / fname).read_bytes()


def test_cli_config_echo_reproduces_run(tmp_path):
    args = ["run", "--preset", "incast_ndp", "--seed", "9",
            "--out", str(tmp_path)]
    assert main(args + ["--tag", "first"]) == 0
    echo = tmp_path / "incast_ndp" / "first" / "config.json"
    assert main(["run", "--config", str(echo), "--out", str(tmp_path),
                 "--tag", "second"]) == 0
    for fname in ("summary.csv", "samples.csv", "qtrace.csv", "metrics.csv"):
        a = tmp_path / "incast_ndp" / "first" / fname
        b = tmp_path / "incast_ndp" / "second" / fname
        assert a.read_bytes() == b.read_bytes()


def test_cli_override_changes_behavior(tmp_path):
    assert main(["run", "--preset", "incast_ndp", "--set", "trimming=false",
                 "--out", str(tmp_path), "--tag", "x"]) == 0
    metrics = (tmp_path / "incast_ndp" / "x" / "metrics.csv").read_text()
    assert "incast,trimming,0" in metrics
    assert "incast,drops,6" in metrics


def test_cli_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"scenario": "incast_ndp", "clientz": 3}))
    assert main(["run", "--config", str(p)]) == 2
    assert "clientz" in capsys.readouterr().err


def test_cli_sweep_overrides_grid(tmp_path):
    assert main(["sweep", "--preset", "sched_hw_vs_timer", "--grid", "0.3",
                 "--set", 'modes=["hw"]', "--set", "num_requests=1000",
                 "--out", str(tmp_path), "--tag", "g"]) == 0
    summary = (tmp_path / "sched_hw_vs_timer" / "g" / "summary.csv").read_text()
    rows = [l for l in summary.splitlines()[1:] if l]
    assert len(rows) == 2  # one load point x two priorities
    cfg = json.loads((tmp_path / "sched_hw_vs_timer" / "g" / "config.json").read_text())
    assert cfg["loads"] == [0.3]


def test_cli_sweep_empty_grid_errors():
    assert main(["sweep", "--preset", "sched_hw_vs_timer", "--grid", ""]) == 2


def test_cli_sweep_unsupported_scenario_errors():
    assert main(["sweep", "--preset", "loopback_latency", "--grid", "0.5"]) == 2
