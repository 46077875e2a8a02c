# -*- coding: utf-8 -*-
import json
import shutil

import pytest

from cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve(capsys, two_box_path):
    assert run(capsys, "solve", "--instance", str(two_box_path)) == (0, "5/8\n", "")
    code, out, _ = run(capsys, "solve", "--instance", str(two_box_path), "--mode", "classic")
    assert (code, out) == (0, "9/16\n")
    code, out, _ = run(capsys, "classic", "--instance", str(two_box_path))
    assert (code, out) == (0, "9/16\n")


def test_solve_pretty(capsys, two_box_path):
    code, out, _ = run(capsys, "--pretty", "solve", "--instance", str(two_box_path))
    assert (code, out) == (0, "5/8 (0.625)\n")


def test_solve_writes_table(capsys, two_box_path, tmp_path):
    table = tmp_path / "table.json"
    assert run(capsys, "solve", "--instance", str(two_box_path), "--table", str(table))[0] == 0
    records = json.loads(table.read_text())
    assert records[0] == {"unopened": [0, 1], "best": "0", "value": "5/8", "action": {"kind": "open", "box": 0}}


def test_malformed_json(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, out, err = run(capsys, "solve", "--instance", str(path))
    assert code == 2 and out == "" and err


def test_invalid_instance_lists_violations(capsys, tmp_path):
    path = tmp_path / "short.json"
    path.write_text('{"boxes": [{"cost": "-1", "support": [["0", "1/2"], ["1", "2/5"]]}]}')
    code, _, err = run(capsys, "solve", "--instance", str(path))
    assert code == 2
    assert "box 0: cost < 0" in err
    assert "box 0: probabilities sum != 1" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--instance", str(tmp_path / "absent.json"))
    assert code == 2 and err


def test_index_summary(capsys, two_box_path, tmp_path):
    summary = tmp_path / "summary.csv"
    traces = tmp_path / "traces.jsonl"
    code, out, _ = run(capsys, "index", "--instance", str(two_box_path), "--trials", "100",
                       "--summary", str(summary), "--traces", str(traces))
    assert code == 0
    assert out.startswith("exact 9/16\n")
    assert summary.read_text().splitlines()[0] == "policy,trials,seed,mean,stderr"
    assert len(traces.read_text().splitlines()) == 100


def test_structured_then_eval(capsys, two_box_path, tmp_path):
    policy = tmp_path / "policy.json"
    code, out, _ = run(capsys, "structured", "--instance", str(two_box_path), "--out", str(policy))
    assert code == 0 and out.splitlines()[0] == "5/8"
    assert run(capsys, "eval", "--instance", str(two_box_path), "--policy", str(policy))[:2] == (0, "5/8\n")


@pytest.mark.parametrize("partition, answer", [("1,1", "yes"), ("1,2", "no"), ("1,1,2", "yes")])
def test_reduce_answer(capsys, tmp_path, partition, answer):
    out_path = tmp_path / "red.json"
    code, out, _ = run(capsys, "reduce", "--partition", partition, "--out", str(out_path), "--answer")
    assert (code, out) == (0, answer + "\n")
    meta = json.loads((tmp_path / "red.meta.json").read_text())
    assert meta["k2"] and meta["tau_H"]
    assert len(json.loads(out_path.read_text())["boxes"]) == len(partition.split(",")) + 2


def test_reduce_guardrails(capsys):
    assert run(capsys, "reduce", "--partition", "1,1,1,1", "--answer")[0] == 2
    assert run(capsys, "reduce", "--partition", "1,x")[0] == 2
    assert run(capsys, "reduce", "--partition", "9")[0] == 2


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "index-identity", "--cases", "10")
    assert code == 0
    assert "PASS classic optimum = E[max kappa]" in out


def test_verify_unknown_suite(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify", "--suite", "nope"])
    assert info.value.code == 2


def test_ptas_report(capsys, two_box_path, tmp_path):
    report = tmp_path / "report.csv"
    policy = tmp_path / "policy.json"
    code, out, _ = run(capsys, "ptas", "--instance", str(two_box_path), "--epsilon", "1/10",
                       "--report", str(report), "--out", str(policy))
    assert (code, out) == (0, "5/8\n")
    lines = report.read_text().splitlines()
    assert lines[0] == "theta,m,opt_lower,opt_exact,opt_L,lifted_payoff,ratio"
    assert lines[1] == "45/4,1,9/16,5/8,11/20,5/8,1"
    assert json.loads(policy.read_text())[0]["action"] == {"kind": "open", "box": 0}


def test_ptas_bad_epsilon(capsys, two_box_path):
    assert run(capsys, "ptas", "--instance", str(two_box_path), "--epsilon", "3/4")[0] == 2


def test_bench_empty_dir(capsys, tmp_path):
    (tmp_path / "instances").mkdir()
    out = tmp_path / "bench.csv"
    assert run(capsys, "bench", "--dir", str(tmp_path / "instances"), "--out", str(out))[0] == 0
    assert out.read_text() == "instance,method,value,error\n"


def test_bench_rows_and_determinism(capsys, two_box_path, tmp_path):
    folder = tmp_path / "instances"
    folder.mkdir()
    shutil.copy(two_box_path, folder / "two_box.json")
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (first, second):
        assert run(capsys, "bench", "--dir", str(folder), "--methods", "index,dp,half-approx",
                   "--out", str(out))[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().splitlines() == [
        "instance,method,value,error",
        "two_box,dp,5/8,",
        "two_box,half-approx,9/16,",
        "two_box,index,9/16,",
    ]


def test_bench_reports_method_errors(capsys, two_box_path, tmp_path):
    folder = tmp_path / "instances"
    folder.mkdir()
    shutil.copy(two_box_path, folder / "two_box.json")
    out, xlsx = tmp_path / "bench.csv", tmp_path / "bench.xlsx"
    code = run(capsys, "bench", "--dir", str(folder), "--methods", "support01,ptas@1/10",
               "--out", str(out), "--xlsx", str(xlsx), "--timing")[0]
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "instance,method,value,error,wall_ms"
    assert lines[1].startswith("two_box,ptas@1/10,5/8,,")
    assert lines[2].startswith("two_box,support01,5/8,,")
    assert xlsx.exists()


def test_bench_unknown_method(capsys, tmp_path):
    assert run(capsys, "bench", "--dir", str(tmp_path), "--methods", "magic", "--out", str(tmp_path / "x.csv"))[0] == 2
