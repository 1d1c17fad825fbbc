import json

import pytest

from arwlab.cli import emit_plotdata, main, validate
from arwlab.errors import ConfigSchemaError


def run(argv):
    return main(argv)


def test_unknown_subcommand_usage():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2  # argparse rejects unknown choices


def test_no_subcommand_exit_1(capsys):
    assert run([]) == 1


def test_hitting_tail_hand_value(tmp_path, capsys):
    out = tmp_path / "tail.csv"
    assert run(["hitting-tail", "--n", "2", "--m-max", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,tail"
    assert lines[3] == "2,0.75"


def test_schema_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "lambda": 1.0, "bogus": 3}))
    assert run(["density", "--config", str(cfg)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_schema_rejects_malformed_json(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert run(["density", "--config", str(cfg)]) == 1


def test_schema_rejects_missing_required(capsys):
    assert run(["density", "--reps", "5"]) == 1
    assert "required" in capsys.readouterr().err


def test_schema_rejects_wrong_type():
    with pytest.raises(ConfigSchemaError):
        validate("density", {"n": "four", "lambda": 1.0})


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2, "m_max": 2}))
    out = tmp_path / "tail.csv"
    assert (
        run(["hitting-tail", "--config", str(cfg), "--m-max", "4", "--out", str(out)])
        == 0
    )
    assert len(out.read_text().splitlines()) == 6  # header + m = 0..4


def test_stabilize_json_report(tmp_path):
    out = tmp_path / "stab.json"
    code = run(
        ["stabilize", "--lambda", "1", "--seed", "3", "--init", '[2,0,"s"]', "--out", str(out)]
    )
    assert code == 0
    data = json.loads(out.read_text())
    assert set(data) == {"final", "odometer", "visited", "exits", "topples"}
    assert len(data["final"]) == 3


def test_chain_csv(tmp_path):
    out = tmp_path / "chain.csv"
    assert (
        run(["chain", "--n", "4", "--lambda", "1", "--t", "6", "--seed", "2", "--out", str(out)])
        == 0
    )
    lines = out.read_text().splitlines()
    assert lines[0] == "t,count,exits_left,exits_right"
    assert len(lines) == 8


def test_density_runs(capsys):
    assert run(["density", "--n", "8", "--lambda", "1", "--reps", "30", "--seed", "1"]) == 0
    assert "rho_hat" in capsys.readouterr().out


def test_sample_stationary_csv(tmp_path):
    out = tmp_path / "pi.csv"
    code = run(
        ["sample-stationary", "--n", "4", "--lambda", "1", "--reps", "10", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    assert len(out.read_text().splitlines()) == 11


def test_mixing_sweep_deterministic(tmp_path):
    args = [
        "mixing-sweep", "--n", "5", "--lambda", "1", "--t", "0:6:2",
        "--reps", "200", "--seed", "1",
    ]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    plot = tmp_path / "plot.csv"
    assert run(args + ["--out", str(out1), "--plot-out", str(plot)]) == 0
    assert run(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    plot_lines = plot.read_text().splitlines()
    assert plot_lines[0] == "n,t_over_n,series,value,clamped"
    # one row per (t, series) with all three series present at n <= 10
    assert len(plot_lines) == 1 + 4 * 3


def test_emit_plotdata_empty(tmp_path):
    path = tmp_path / "empty.csv"
    emit_plotdata([], path)
    assert path.read_text().splitlines() == ["n,t_over_n,series,value,clamped"]


def test_emit_plotdata_clamps(tmp_path):
    path = tmp_path / "clamp.csv"
    rows = [{"n": 4, "t": 2, "lower": 0.5, "upper": 1.7, "plugin": ""}]
    emit_plotdata(rows, path)
    lines = path.read_text().splitlines()
    assert lines[1] == "4,0.5,lower,0.5,0"
    assert lines[2] == "4,0.5,upper,1,1"
    assert len(lines) == 3  # empty plugin column skipped


def test_exit_prob_runs(capsys):
    code = run(
        ["exit-prob", "--n", "20", "--lambda", "1", "--particles", "20",
         "--reps", "60", "--seed", "2"]
    )
    assert code == 0
    assert "frequency" in capsys.readouterr().out


def test_verify_abelian_exit_zero(capsys):
    assert run(["verify", "--suite", "abelian", "--instances", "60", "--seed", "7"]) == 0
    assert "verify[abelian]" in capsys.readouterr().out


def test_verify_unknown_suite(capsys):
    assert run(["verify", "--suite", "nonsense"]) == 1


def test_cutoff_runtime_error_exit_2(capsys):
    # replicate budget below the CI floor is a runtime (not schema) failure
    code = run(
        ["cutoff", "--n-grid", "32", "--lambda", "1", "--reps", "50", "--seed", "1"]
    )
    assert code == 2
    assert "replicates" in capsys.readouterr().err
