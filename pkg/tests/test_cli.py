import csv
import io
import json

import pytest

from percolab.cli import COLUMNS, holding_region_closed, main, resolve_config, ConfigError

CROSS = ["crossing", "--set", "d=2", "--set", "s=1", "--set", "L=6", "--set", "n_samples=40"]


def test_crossing_open_lattice(capsys):
    assert main(CROSS + ["--set", "p=1", "--set", "q=1"]) == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == list(COLUMNS)
    assert float(rows[0]["mean"]) == 1.0


def test_unknown_key_is_config_error(capsys):
    assert main(CROSS + ["--set", "bogus=3"]) == 2
    assert "bogus" in capsys.readouterr().err


def test_bad_value_names_field(capsys):
    assert main(CROSS + ["--set", "p=1.5"]) == 2
    assert "p:" in capsys.readouterr().err
    assert main(["gm-event", "--set", "alpha=x/y"]) == 2


def test_runtime_error_exit_code(capsys):
    # beta n = 1/2 <= m is rejected when the event is built
    assert main(["gm-event", "--set", "beta=1/16", "--set", "n_samples=2"]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_failed_assertion_exit_code():
    base = CROSS + ["--set", "p=0", "--set", "q=0", "--assert"]
    assert main(base + ["--set", "expect_min=0.5"]) == 4
    assert main(base + ["--set", "expect_max=0.0"]) == 0


def test_outputs_identical_across_workers(tmp_path):
    texts = []
    for w in (1, 4, 16):
        stem = tmp_path / f"w{w}"
        argv = ["theta", "--set", "n=2", "--set", "n_samples=3000", "--seed", "11",
                "--workers", str(w), "--out", str(stem)]
        assert main(argv) == 0
        texts.append(((tmp_path / f"w{w}.csv").read_bytes(), (tmp_path / f"w{w}.json").read_bytes()))
    assert texts[0] == texts[1] == texts[2]
    csv_bytes = texts[0][0]
    assert b"\r\n" not in csv_bytes
    row = next(csv.DictReader(io.StringIO(csv_bytes.decode())))
    cfg = json.loads(row["config"])
    assert "workers" not in cfg and cfg["seed"] == 11 and cfg["command"] == "theta"


def test_config_file_round_trip(tmp_path, capsys):
    assert main(CROSS + ["--set", "p=0.4", "--seed", "5", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc["config"]))
    assert main(["crossing", "--config", str(path), "--format", "json"]) == 0
    again = json.loads(capsys.readouterr().out)
    assert again == doc


def test_config_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"p": 0.2, "seed": 3}))
    c = resolve_config("crossing", str(path), ["p=0.3"], {"seed": 9, "workers": None})
    assert (c.p, c.seed, c.workers) == (0.3, 9, 1)
    path.write_text(json.dumps({"command": "theta"}))
    with pytest.raises(ConfigError, match="command"):
        resolve_config("crossing", str(path), [], {})


def test_holding_region_closed():
    ps, qs = [0.1, 0.2], [0.1, 0.2]
    good = {(0.1, 0.1): True, (0.1, 0.2): True, (0.2, 0.1): False, (0.2, 0.2): False}
    assert holding_region_closed(ps, qs, good)
    bad = dict(good)
    bad[(0.1, 0.1)] = False
    assert not holding_region_closed(ps, qs, bad)


def test_oracle_and_mtp_commands(capsys):
    assert main(["oracle", "--set", "d=2", "--set", "s=1", "--set", "p=0.3", "--set", "q=0.6",
                 "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["result"]["value"] == pytest.approx(0.9216)
    assert main(["mtp-check", "--set", "d=2", "--set", "s=1", "--set", "shape=[4,2]",
                 "--set", "mode=exact", "--set", "transport=diagonal", "--assert"]) == 0
    assert main(["mtp-check", "--set", "shape=[4,2]"]) == 2
