import io
import json

import pytest

from qevote.harness import cli
from qevote.harness.inputs import ElectionInput, load_input
from qevote.errors import ConfigError


def run(argv):
    buf = io.StringIO()
    code = cli.main(argv, buf)
    return code, buf.getvalue()


def write_input(tmp_path, **over):
    data = {"n_agents": 4, "votes": [0, 1, 1, 1], "coins": 2, "seed": 3}
    data.update(over)
    p = tmp_path / "input.json"
    p.write_text(json.dumps(data))
    return p


def test_fig1():
    code, out = run(["fig1"])
    assert code == 0
    assert "E = (0,1,1,1)" in out and "T = (1,3)" in out and "winner = 1" in out


def test_bounds_defaults_show_example_numbers():
    code, out = run(["bounds"])
    assert code == 0
    assert "eps_tilde                    0.699714" in out
    assert "M (ceiling, used)            13" in out
    assert "rounding down gives 12" in out
    assert "zeta_tilde                   0.00484136" in out


def test_bounds_from_config(tmp_path):
    code, out = run(["bounds", "--config", str(write_input(tmp_path))])
    assert code == 0 and "coin count overridden to 2" in out


def test_usage_errors_exit_2(tmp_path):
    assert run(["frobnicate"])[0] == 2
    assert run(["bounds", "--epsilon", "0.2"])[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["run", str(bad)])[0] == 2
    assert run(["run", str(write_input(tmp_path, votes=[0, 1]))])[0] == 2


def test_missing_file_exits_1(tmp_path):
    assert run(["run", str(tmp_path / "missing.json")])[0] == 1


def test_run_then_replay(tmp_path):
    inp = write_input(tmp_path, adversary_model="coalition:[1]", source_model="schedule:ideal,eps_far=0.2")
    out_dir = tmp_path / "out"
    code, out = run(["run", str(inp), "--out", str(out_dir), "--level", "full"])
    assert code == 0 and "status=" in out
    assert (out_dir / "transcript.txt").read_text().startswith("seq=0 phase=0 round=0 step=full kind=run.input")
    code, out = run(["replay", str(out_dir / "transcript.txt")])
    assert code == 0 and "replay: identical" in out


def test_replay_detects_tampering(tmp_path):
    out_dir = tmp_path / "out"
    assert run(["run", str(write_input(tmp_path)), "--out", str(out_dir)])[0] == 0
    rec = out_dir / "outcome.txt"
    rec.write_text(rec.read_text().replace("status=accepted", "status=aborted"))
    code, out = run(["replay", str(out_dir / "transcript.txt")])
    assert code == 1 and "outcome record differs" in out


def test_replay_needs_run_input(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("seq=0 phase=0 round=0 step=- kind=x sender=* receiver=* payload=-\n")
    assert run(["replay", str(p)])[0] == 2


def test_seed_flag_and_env(tmp_path, monkeypatch):
    inp = write_input(tmp_path)
    _, a = run(["run", str(inp), "--out", str(tmp_path / "a"), "--seed", "11"])
    monkeypatch.setenv("QEVOTE_SEED", "11")
    _, b = run(["run", str(inp), "--out", str(tmp_path / "b")])
    assert a == b
    monkeypatch.setenv("QEVOTE_SEED", "eleven")
    assert run(["experiment", "example"])[0] == 2


def test_run_refuses_off_level(tmp_path):
    assert run(["run", str(write_input(tmp_path)), "--level", "off"])[0] == 2


def test_experiment_commands(tmp_path):
    js = tmp_path / "rep.json"
    code, out = run(["experiment", "example", "--json", str(js)])
    assert code == 0 and out.startswith("PASS example")
    assert json.loads(js.read_text())[0]["passed"] is True
    code, out = run(["experiment", "logicalor", "--trials", "5000", "--seed", "1"])
    assert code == 0
    code, out = run(["experiment", "verify", "--trials", "20000"])
    assert code == 0 and out.count("PASS verification n=") == 2


def test_multi_and_amplified_inputs(tmp_path):
    p = write_input(tmp_path, n_agents=7, votes=[3, 3, 1, 2, 0, 0, 0], candidates=4, coins=0)
    code, out = run(["run", str(p), "--out", str(tmp_path / "m")])
    assert code == 0 and "T=3,1,1,2" in out
    assert run(["replay", str(tmp_path / "m" / "transcript.txt")])[0] == 0
    p = write_input(tmp_path, amplification_rounds=3, coins=0)
    code, out = run(["run", str(p), "--out", str(tmp_path / "q")])
    assert code == 0 and "part2.E=" in out


def test_input_roundtrip(tmp_path):
    inp = load_input(write_input(tmp_path, source_model="eps_far:0.1"))
    again = ElectionInput.from_mapping(json.loads(inp.compact()))
    assert again == inp
    with pytest.raises(ConfigError):
        ElectionInput.from_mapping({"n_agents": 4})
    with pytest.raises(ConfigError):
        ElectionInput.from_mapping([1, 2])
