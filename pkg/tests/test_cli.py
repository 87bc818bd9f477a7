import csv
import io
import json

import pytest

from batchmn import cli


def run(args, capsys):
    code = cli.run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def manifest(text):
    head = {}
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split(": ", 1)
            head[k] = v
    return head


def test_parse_grid():
    assert cli.parse_grid("1,2,3") == [1.0, 2.0, 3.0]
    assert cli.parse_grid("0.5:0.9:0.1") == [0.5, 0.6, 0.7, 0.8, 0.9]
    assert cli.parse_grid("1:10:3,20", int) == [1, 4, 7, 10, 20]
    for bad in ("", "1:2", "3:1:1", "a"):
        with pytest.raises(ValueError):
            cli.parse_grid(bad)
    with pytest.raises(ValueError):
        cli.parse_grid("1.5", int)


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 123456789.125):
        assert float(cli.fmt(v)) == v
    assert cli.fmt(float("inf")) == "inf"
    assert cli.fmt(None) == ""
    assert cli.fmt(True) == "true"


def test_bounds_single_cell(capsys):
    code, out, _ = run(["bounds", "--gamma-grid", "2", "--xi-grid", "0.8", "--b-grid", "1,2"], capsys)
    assert code == 0
    rows = table(out)
    assert float(rows[1]["bmn_ub"]) == pytest.approx(0.725)
    assert float(rows[1]["bmn_lb"]) == pytest.approx(0.6583134105899568)
    assert float(rows[0]["bmn_ub"]) == pytest.approx(float(rows[0]["mn_risk"]))
    head = manifest(out)
    assert head["command"] == "bounds"
    assert json.loads(head["config"])["b-grid"] == [1, 2]


def test_bounds_domain_error_row(capsys):
    code, out, _ = run(["bounds", "--gamma-grid", "0.4", "--xi-grid", "0.8", "--b-grid", "2"], capsys)
    assert code == 0
    row = table(out)[0]
    assert row["error"] and row["bmn_ub"] == ""


def test_opt_batch_families(capsys):
    code, out, _ = run(["opt-batch", "--gamma-grid", "1.1,2,10", "--xi-grid", "0.6"], capsys)
    assert code == 0 and all(r["b_opt"] == "inf" for r in table(out))
    _, out, _ = run(["opt-batch", "--gamma-grid", "1.5", "--xi-grid", "0.95"], capsys)
    assert table(out)[0]["b_opt"] == "1"
    _, out, _ = run(["opt-batch", "--family", "sbmn", "--gamma-grid", "2", "--xi-grid", "0.45"], capsys)
    assert table(out)[0]["b_opt"] == "inf"
    _, out, _ = run(["opt-batch", "--family", "server_avg", "--gamma-grid", "2", "--xi-grid", "0.6"], capsys)
    assert table(out)[0]["b_opt"] == "200"
    code, _, err = run(["opt-batch", "--family", "nope"], capsys)
    assert code == 2 and "family" in err


def test_risk_curve_determinism_and_threads(tmp_path, capsys):
    args = ["risk-curve", "--estimators", "mn,bmn:2,sbmn:2", "--gamma-grid", "2", "--xi-grid", "0.8",
            "--n", "40", "--trials", "8", "--seed", "7"]
    outs = []
    for threads in ("1", "3"):
        path = tmp_path / f"out{threads}.csv"
        assert cli.run(args + ["--threads", threads, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
        assert (tmp_path / f"out{threads}.csv.run.json").exists()
    assert outs[0] == outs[1]
    assert b"\r" not in outs[0]


def test_empty_grid_is_usage_error(capsys):
    code, _, err = run(["risk-curve", "--gamma-grid", ","], capsys)
    assert code == 2 and "gamma-grid" in err


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# demo\nestimators = mn\ngamma_grid = 2\nxi-grid = 0.9\nn = 20\ntrials = 5\n")
    code, out, _ = run(["risk-curve", "--config", str(cfg), "--trials", "3"], capsys)
    assert code == 0
    rows = table(out)
    assert rows[0]["trials"] == "3" and rows[0]["xi"] == "0.9"


def test_config_error_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 20\n\nxi-grid = zero\n")
    code, _, err = run(["risk-curve", "--config", str(cfg)], capsys)
    assert code == 2 and "bad.cfg:3" in err and "xi-grid" in err
    cfg.write_text("colour = red\n")
    code, _, err = run(["risk-curve", "--config", str(cfg)], capsys)
    assert code == 2 and ":1" in err and "colour" in err


def test_preset_and_override(capsys):
    code, out, _ = run(["risk-curve", "--preset", "fig5", "--trials", "2", "--n", "20", "--gamma-grid", "2"],
                       capsys)
    assert code == 0
    labels = [r["estimator"] for r in table(out)]
    assert labels == ["MN", "BMN(b=1)", "BMN(b=2)", "BMN(b=10)", "SBMN(b=1)", "SBMN(b=2)", "SBMN(b=10)"]
    code, _, err = run(["bounds", "--preset", "fig5"], capsys)
    assert code == 2
    code, _, _ = run(["bounds", "--preset", "nosuch"], capsys)
    assert code == 2


def test_verify_pass_and_strict_fail(capsys):
    args = ["verify", "qcov", "--trials", "100000"]
    code, out, _ = run(args, capsys)
    assert code == 0
    assert all(r["pass"] == "true" for r in table(out))
    code, out, _ = run(args + ["--tolerance", "0"], capsys)
    assert code == 1
    assert all(r["pass"] == "false" for r in table(out))


def test_verify_convergence(capsys):
    code, out, _ = run(["verify", "convergence", "--p-list", "100,400,1600", "--trials", "40",
                        "--tolerance", "0.2"], capsys)
    assert code == 0
    assert len(table(out)) == 6


def test_verify_bad_scenario(capsys):
    code, _, _ = run(["verify", "lemma1", "--delta", "0"], capsys)
    assert code == 2


def test_tune_ridge_command(capsys):
    code, out, _ = run(["tune-ridge", "--n", "30", "--gamma", "1.5", "--trials", "5"], capsys)
    assert code == 0
    row = table(out)[0]
    assert float(row["lambda"]) > 0 and row["p"] == "45"


def test_singular_cells_exit_numeric(capsys, monkeypatch):
    from batchmn import montecarlo
    from batchmn.errors import SingularGram

    def boom(*a, **k):
        raise SingularGram("forced")

    monkeypatch.setattr(montecarlo, "trial_risks", boom)
    code, out, _ = run(["risk-curve", "--estimators", "mn", "--gamma-grid", "2", "--n", "10", "--trials", "2"],
                       capsys)
    assert code == 3
    assert table(out)[0]["error"].startswith("SingularGram")


def test_atomic_write_leaves_no_temp(tmp_path):
    path = tmp_path / "x.csv"
    cli.write_output("a\n", str(path))
    assert path.read_text() == "a\n"
    assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]
