import json

import pytest

from dyadic_bump.cli import ConfigError, load_config, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bump_json(capsys):
    code, out, _ = run(["bump", "--seed", "1"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert {"A_p", "joint", "separated_A", "separated_B"} <= set(doc["constants"])
    assert doc["constants"]["A_p"]["estimator"] == "exact"


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["stopping", "--seed", "3", "--out", str(path)]) == 0
    da, db = (json.loads(p.read_text()) for p in (a, b))
    da.pop("wall_time"), db.pop("wall_time")
    assert da == db
    assert a.with_suffix(".csv").read_text() == b.with_suffix(".csv").read_text()
    assert "forest" in da and da["forest"]["tau"] == 1


def test_csv_format(capsys):
    code, out, _ = run(["testing", "--seed", "0", "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "constant,cube,value" and len(lines) == 3


def test_suite_exit_codes(capsys):
    code, out, err = run(["suite", "oracle", "--seed", "0"], capsys)
    assert code == 0 and json.loads(out)["passed"] and "PASS" in err
    code, _, err = run(["suite", "bogus"], capsys)
    assert code == 2 and "unknown suite" in err


def test_config_line_numbers(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 1\nmesh:\n  d: 1\n  L: 6\np: 2\ncolour: red\n")
    code, _, err = run(["bump", "--config", str(cfg)], capsys)
    assert code == 2 and f"{cfg}:6:" in err and "colour" in err
    cfg.write_text("seed: 1\nmesh:\n  d: 1\n  L: 40\n")
    with pytest.raises(ConfigError, match=r":4: depth"):
        load_config(cfg)
    cfg.write_text("seed: 1\nA: 'logbump:p=2'\n")
    with pytest.raises(ConfigError, match=r":2: .*delta"):
        load_config(cfg)
    cfg.write_text("seed: [1\n")
    with pytest.raises(ConfigError, match=r":1:"):
        load_config(cfg)


def test_seed_required_in_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mesh": {"d": 1, "L": 5}}))
    code, _, err = run(["interp", "--config", str(cfg)], capsys)
    assert code == 2 and "seed" in err
    code, out, _ = run(["interp", "--config", str(cfg), "--seed", "2"], capsys)
    assert code == 0 and json.loads(out)["seed"] == 2


def test_weight_error_points_at_line(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 1\nmesh: {d: 1, L: 5}\nsigma: 'cascade:2,1'\n")
    code, _, err = run(["bump", "--config", str(cfg)], capsys)
    assert code == 2 and ":3:" in err


@pytest.mark.parametrize("cmd", ["maximal", "shift-norm", "decay", "interp", "hilbert", "search"])
def test_commands_run(cmd, tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 5\nmesh: {d: 1, L: 6}\nbudget: 4\nshift: {m: 1, n: 0}\n")
    code, out, _ = run([cmd, "--config", str(cfg)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["suite"] == cmd and doc["constants"]


def test_lerner_shift_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 5\nmesh: {d: 1, L: 6}\nshift: {lerner: 2}\n")
    code, out, _ = run(["testing", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["constants"]["testing"]["value"] > 0


def test_suite_params_validated(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 0\nparams:\n  trials: 50\n  wibble: 1\n")
    code, _, err = run(["suite", "holder", "--config", str(cfg)], capsys)
    assert code == 2 and ":4:" in err and "wibble" in err
    cfg.write_text("seed: 0\nsuite: holder\nparams:\n  trials: 50\n")
    code, out, _ = run(["suite", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["config"]["trials"] == 50


def test_failing_verdict_exits_one(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 0\nparams: {trials: 50, constant: 0.5}\n")
    code, out, err = run(["suite", "holder", "--config", str(cfg)], capsys)
    assert code == 1 and not json.loads(out)["passed"] and "FAIL" in err
