import csv
import json

import pytest

from mmlab import algorithms as al
from mmlab import cli


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out-dir", str(tmp_path)])


def test_survival_exact(tmp_path, capsys):
    assert run(tmp_path, "survival", "--delta", "2", "--L", "4") == 0
    rows = json.loads((tmp_path / "survival.json").read_text())
    assert rows[0]["exact"] == "9/16" and rows[0]["value"] == 0.5625
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["command"] == "survival" and cfg["L"] == 4


def test_survival_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "survival", "--delta", "3", "--L", "2", "--method", "both", "--trials", "20000", "--seed",
                   "4") == 0
    assert (a / "survival.json").read_bytes() == (b / "survival.json").read_bytes()


def test_survival_csv(tmp_path):
    assert run(tmp_path, "survival", "--delta", "2", "--method", "monte_carlo", "--trials", "10000",
               "--format", "csv") == 0
    rows = list(csv.DictReader((tmp_path / "survival.csv").open()))
    assert abs(float(rows[0]["value"]) - 1 / 3) < 0.03


def test_missing_table(tmp_path, capsys):
    assert run(tmp_path, "survival", "--algo", "table:/no/such/file") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "FileNotFoundError" and err["exit_code"] == 2


def test_usage_error(capsys):
    assert cli.main(["survival", "--bogus"]) == 2


def test_capacity_error(tmp_path, capsys):
    assert run(tmp_path, "survival", "--delta", "3", "--L", "3", "--radius", "2", "--budget", "1000") == 3
    err = json.loads(capsys.readouterr().err)
    assert err["needed"] == 3**21 and err["budget"] == 1000


def test_budget_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MMLL_BUDGET", "10")
    assert run(tmp_path, "survival", "--delta", "2", "--L", "3") == 3


def test_eliminate_greedy(tmp_path, capsys):
    assert run(tmp_path, "eliminate", "--delta", "2", "--L", "2") == 0
    g = al.read_table(tmp_path / "g_r0.mmca")
    assert not g.table.any() and g.status == "verified_exhaustive"
    audit = json.loads((tmp_path / "audit.json").read_text())
    assert all(r["pass"] for r in audit)
    summary = json.loads((tmp_path / "eliminate.json").read_text())
    assert summary["audit_passed"] and summary["terminal_constant_zero"]


def test_eliminate_chain(tmp_path, capsys):
    assert run(tmp_path, "eliminate", "--delta", "2", "--L", "2", "--radius", "2", "--chain") == 0
    summary = json.loads((tmp_path / "eliminate.json").read_text())
    assert summary["radii"] == [2, 1, 0] and summary["ones"][-1] == 0
    assert (tmp_path / "g_r1.mmca").exists() and (tmp_path / "g_r0.mmca").exists()


def test_eliminate_table_input(tmp_path, capsys):
    from mmlab import corpus, labels as la

    path = al.write_table(tmp_path / "f.mmca", corpus.random_certified(la.Shape(3, 1), 2, seed=2))
    assert run(tmp_path / "out", "eliminate", "--algo", f"table:{path}", "--format", "csv") == 0
    header = (tmp_path / "out" / "audit.csv").read_text().splitlines()[0]
    assert header.startswith("id,lhs,rhs,method,pass")


@pytest.mark.parametrize("c5", ["0", "1.5", "-0.1"])
def test_eliminate_c5_validation(tmp_path, capsys, c5):
    assert run(tmp_path, "eliminate", "--delta", "2", "--L", "2", "--c5-override", c5) == 2
    assert "c5" in json.loads(capsys.readouterr().err)["message"]


def test_eliminate_needs_exact_or_mc(tmp_path, capsys):
    assert run(tmp_path, "eliminate", "--delta", "2") == 2
    assert run(tmp_path, "eliminate", "--delta", "2", "--mc", "--outer", "50", "--inner", "32", "--trials",
               "10000") == 0
    rows = json.loads((tmp_path / "audit.json").read_text())
    assert [r["id"] for r in rows] == ["a", "b"] and all(r["advisory"] for r in rows)


def test_graphgen(tmp_path, capsys):
    assert run(tmp_path, "graphgen", "--n", "1000", "--delta", "4", "--girth", "5") == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["girth"] >= 5 and cert["simple"] and cert["regular"]
    from mmlab.graphs import PortGraph

    g = PortGraph.load(tmp_path / "graph.txt")
    assert g.n == 1000 and g.is_regular(4)


def test_graphgen_infeasible(tmp_path, capsys):
    assert run(tmp_path, "graphgen", "--n", "60", "--delta", "3", "--girth", "9", "--gen-method", "reject",
               "--max-tries", "3") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ExhaustionError"


def test_verify(tmp_path, capsys):
    assert run(tmp_path, "verify", "--delta", "3", "--L", "2") == 0
    out = capsys.readouterr().out
    for name in ("edge_flip", "vert_permute", "cond_vert_permute", "f_to_r", "r_to_f", "f_to_f"):
        assert f"{name}" in out
    rows = json.loads((tmp_path / "verify.json").read_text())
    assert sum(r["pass"] for r in rows if r["name"] != "r_to_r") == 6


def test_verify_table(tmp_path, capsys):
    bad = al.write_table(tmp_path / "ones.mmca", al.all_ones(__import__("mmlab").labels.Shape(2, 1), 2))
    assert run(tmp_path, "verify", "--table", str(bad)) == 1


def test_simulate(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--delta", "3", "--n", "200", "--girth", "5", "--trials", "100",
               "--workers", "2") == 0
    lines = (tmp_path / "outcomes.csv").read_text().splitlines()
    assert len(lines) == 101
    s = json.loads((tmp_path / "simulation.json").read_text())
    assert abs(s["mean_unmatched_fraction"] - 0.4) < 0.05


def test_pmf(tmp_path, capsys):
    assert run(tmp_path, "pmf", "--n", "4", "--k", "2") == 0
    rows = json.loads((tmp_path / "pmf.json").read_text())
    assert [r["pmf_exact"] for r in rows] == ["2/3", "1/3"]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 3, "L": 2, "method": "exact"}))
    assert run(tmp_path, "survival", "--config", str(cfg), "--L", "3") == 0
    rows = json.loads((tmp_path / "survival.json").read_text())
    assert rows[0]["exact"] == "64/81"  # the flag wins over the file
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(tmp_path, "survival", "--config", str(cfg)) == 2
