import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
import yaml

from nestedvar.bench.cli import main
from nestedvar.bench.config import PlanError, bundled_config, load_plan, plan_from_dict
from nestedvar.bench.report import (CSV_COLUMNS, emit, read_csv, read_summary_json, summarize,
                                    write_csv, write_json, write_svg)
from nestedvar.bench.runner import ResultRow, execute

SMALL = {
    "name": "small",
    "seed": 7,
    "replications": 3,
    "alpha": 0.975,
    "model": {"kind": "option", "tau": 0.5},
    "accuracies": ["1/8", "1/16"],
    "init": "analytical",
    "schemes": [
        {"name": "sa", "scheme": "sa", "step": {"a": 1, "b": 100}},
        {"name": "mlsa", "scheme": "mlsa", "step": {"a": 1, "b": 100},
         "rows": [{"h0": "1/4"}, {"h0": "1/4"}]},
        {"name": "admlsa", "scheme": "admlsa", "step": {"a": 1, "b": 100}, "scale_c": 5,
         "refinement": {"c_a": 1}, "rows": [{"h0": "1/4"}, {"h0": "1/4"}]},
    ],
}


def _write(tmp_path, doc, name="plan.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


# plans

def test_bundled_option_study_matches_table():
    plan = load_plan("option_study")
    assert plan.replications == 200
    assert plan.accuracies == (1 / 32, 1 / 64, 1 / 128, 1 / 256, 1 / 512)
    assert plan.reference == pytest.approx(2.0119430936574436)
    by = {s.name: s for s in plan.schemes}
    assert set(by) == {"sa", "nsa", "adnsa", "sigma-adnsa", "mlsa", "admlsa", "sigma-admlsa"}
    assert [c.plan.L for c in by["mlsa"].cells] == [1, 1, 2, 3, 4]
    assert [c.plan.L for c in by["admlsa"].cells] == [1, 1, 2, 2, 3]
    assert [c.level for c in by["adnsa"].cells] == [1, 1, 2, 2, 3]
    steps = [(c.config.step.a, c.config.step.b) for c in by["mlsa"].cells]
    assert steps == [(2, 2500), (2, 4000), (0.75, 9000), (0.25, 1e4), (0.09, 1e4)]
    assert [c.config.ladder.K for c in by["mlsa"].cells] == [16, 32, 32, 32, 32]
    assert by["admlsa"].cells[0].config.scale_c == 700
    assert by["admlsa"].cells[0].config.refinement.c_a == 12
    assert by["adnsa"].cells[0].config.scale_c == 2
    assert by["adnsa"].cells[0].config.refinement.c_a == 0.5
    assert by["sigma-admlsa"].cells[0].config.refinement.mode == "sigma"
    assert by["sigma-admlsa"].cells[0].config.refinement.c_p == 3
    assert [c.n_iters for c in by["nsa"].cells] == [1024, 4096, 16384, 65536, 262144]
    assert [c.config.ladder.K for c in by["nsa"].cells] == [32, 64, 128, 256, 512]


def test_bundled_swap_study_matches_table():
    plan = load_plan("swap_study")
    by = {s.name: s for s in plan.schemes}
    assert plan.reference == pytest.approx(219.6363, abs=1e-4)
    assert [c.plan.L for c in by["mlsa"].cells] == [2, 2, 3, 4, 5]
    assert [c.plan.L for c in by["admlsa"].cells] == [2, 2, 2, 3, 4]
    assert [c.level for c in by["adnsa"].cells] == [2, 2, 2, 3, 4]
    assert [(c.config.step.a, c.config.step.b) for c in by["mlsa"].cells] == \
        [(6, 10), (20, 500), (21, 1e3), (20, 2e3), (21, 3e3)]
    assert by["admlsa"].cells[0].config.scale_c == 80
    assert by["admlsa"].cells[0].config.refinement.c_a == 100
    assert by["adnsa"].cells[0].config.refinement.c_a == 300
    assert by["nsa"].cells[0].config.step.a == 50
    assert by["sa"].cells[0].config.step.a == 100


def test_desk_configs_load():
    for name in ("option_desk", "swap_desk"):
        plan = load_plan(name)
        assert plan.replications == 50 and len(plan.accuracies) == 4
        assert bundled_config(name).exists()


def test_replications_default(tmp_path):
    doc = dict(SMALL)
    doc.pop("replications")
    assert load_plan(_write(tmp_path, doc)).replications == 200


@pytest.mark.parametrize("patch,fragment", [
    ({"schemes": []}, "non-empty"),
    ({"accuracies": ["1/16", "1/8"]}, "strictly decreasing"),
    ({"replications": 0}, "replications"),
    ({"alpha": 1.5}, "alpha"),
    ({"model": {"kind": "bond"}}, "model"),
    ({"schemes": [{"scheme": "foo"}]}, "unknown scheme"),
    ({"step": {"a": 1}, "schemes": [{"scheme": "sa"}, {"scheme": "sa"}]}, "duplicate"),
    ({"schemes": [{"scheme": "mlsa", "rows": [{"h0": "1/4"}]}]}, "one entry per accuracy"),
    ({"step": {"a": 1}, "schemes": [{"scheme": "mlsa", "rows": [{}, {}]}]}, "h0"),
])
def test_plan_validation_errors(tmp_path, patch, fragment):
    doc = dict(SMALL)
    doc.update(patch)
    with pytest.raises(PlanError, match=fragment):
        load_plan(_write(tmp_path, doc))


def test_parse_error_reports_location(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("name: x\nschemes: [\n  {a: 1\n")
    with pytest.raises(PlanError, match=r"line \d+, column \d+"):
        load_plan(path)
    with pytest.raises(PlanError, match="no such config"):
        load_plan(tmp_path / "missing.yaml")


def test_seed_precedence(tmp_path, monkeypatch):
    path = _write(tmp_path, SMALL)
    assert load_plan(path).seed == 7
    monkeypatch.setenv("MLSA_SEED", "99")
    assert load_plan(path).seed == 99
    assert load_plan(path, seed=5).seed == 5
    monkeypatch.setenv("MLSA_SEED", "abc")
    with pytest.raises(PlanError):
        load_plan(path)


# execution

def test_execute_cardinality_and_errors(tmp_path):
    doc = dict(SMALL, schemes=SMALL["schemes"][:1], accuracies=["1/8"])
    res = execute(plan_from_dict(doc))
    assert len(res.rows) == 3 and res.ok
    for r in res.rows:
        assert r.abs_error == pytest.approx(abs(r.estimate - 2.0119430936574436), abs=0)


def test_execute_is_deterministic_across_parallelism():
    plan = plan_from_dict(SMALL)
    a = execute(plan, 1).rows
    b = execute(plan, 3).rows
    strip = [(r.scheme, r.epsilon, r.run, r.estimate, r.abs_error, r.inner_evals) for r in a]
    assert strip == [(r.scheme, r.epsilon, r.run, r.estimate, r.abs_error, r.inner_evals) for r in b]
    assert [(r.scheme, r.epsilon, r.run) for r in a] == sorted(
        [(r.scheme, r.epsilon, r.run) for r in a],
        key=lambda t: (["sa", "mlsa", "admlsa"].index(t[0]), -t[1], t[2]))


def test_cells_do_not_share_streams():
    rows = execute(plan_from_dict(SMALL)).rows
    ests = [r.estimate for r in rows if r.scheme == "mlsa"]
    assert len(set(ests)) == len(ests)


def test_cell_failures_are_recorded(tmp_path):
    doc = dict(SMALL, accuracies=["1/8"], schemes=[
        {"name": "broken", "scheme": "adnsa", "step": {"a": 1e9}, "rows": [{"h0": "1/4"}],
         "refinement": {"framework": "gaussian", "c_a": 1}},
        {"name": "sa", "scheme": "sa", "step": {"a": 1, "b": 100}}])
    res = execute(plan_from_dict(doc))
    assert len(res.failures) == 3 and len(res.rows) == 3 and not res.ok
    assert "ConfigurationError" in res.failures[0].error
    path = _write(tmp_path, doc)
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 1
    assert json.loads((tmp_path / "out" / "failures.json").read_text())["schema"] == 1


def test_execute_rejects_bad_parallelism():
    with pytest.raises(ValueError):
        execute(plan_from_dict(SMALL), 0)


# summaries

def _planted(scale=1.0):
    out = []
    for eps in (1 / 8, 1 / 16, 1 / 32, 1 / 64):
        for rep in range(3):
            out.append(ResultRow("p", eps, rep, 0.0, eps * (1 + 0.1 * rep),
                                 int(eps ** -3), scale * eps ** -2))
    return out


def test_summarize_planted_power_law():
    s = summarize(_planted())
    assert s.slope("p", "time_vs_eps") == pytest.approx(-2, abs=1e-12)
    assert s.slope("p", "evals_vs_eps") == pytest.approx(-3, abs=1e-9)
    assert s.slope("p", "time_vs_rmse") == pytest.approx(-2, abs=1e-12)
    with pytest.raises(KeyError):
        s.slope("q")


def test_slopes_invariant_to_time_units():
    a, b = summarize(_planted()), summarize(_planted(scale=1e-6))
    for m in ("time_vs_eps", "time_vs_rmse"):
        assert a.slope("p", m) == pytest.approx(b.slope("p", m), abs=1e-12)


def test_rmse_matches_independent_recomputation():
    rows = execute(plan_from_dict(SMALL)).rows
    s = summarize(rows)
    for r in s.rows:
        errs = [x.abs_error for x in rows if x.scheme == r.scheme and x.epsilon == r.epsilon]
        assert r.rmse == pytest.approx(math.sqrt(sum(e * e for e in errs) / len(errs)), abs=1e-12)
        assert r.replications == 3


def test_single_accuracy_slope_flagged():
    s = summarize([ResultRow("a", 0.1, 0, 1.0, 0.1, 10, 0.5)])
    assert s.slopes[0].slope is None and "fewer" in s.slopes[0].note


# emitters

def test_header_only_csv(tmp_path):
    path = write_csv([], tmp_path / "rows.csv")
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert read_csv(path) == []


def test_csv_round_trip(tmp_path):
    rows = execute(plan_from_dict(SMALL)).rows
    path = write_csv(rows, tmp_path / "rows.csv")
    back = read_csv(path)
    for a, b in zip(rows, back):
        assert (a.scheme, a.epsilon, a.run, a.estimate, a.abs_error, a.inner_evals) == \
            (b.scheme, b.epsilon, b.run, b.estimate, b.abs_error, b.inner_evals)
        assert b.wall_time_s == pytest.approx(a.wall_time_s, abs=1e-6)
    with open(path) as fh:
        assert tuple(next(csv.reader(fh))) == CSV_COLUMNS


def test_csv_errors(tmp_path):
    with pytest.raises(OSError, match="missing"):
        write_csv([], tmp_path / "missing" / "rows.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n")
    with pytest.raises(ValueError):
        read_csv(bad)


def test_json_documents(tmp_path):
    rows = _planted()
    s = summarize(rows)
    doc = json.loads(write_json(tmp_path / "s.json", rows=rows, summary=s).read_text())
    assert doc["schema"] == 1 and len(doc["rows"]) == len(rows)
    back = read_summary_json(tmp_path / "s.json")
    assert back.rows == s.rows and back.slopes == s.slopes
    (tmp_path / "x.json").write_text('{"schema": 2}')
    with pytest.raises(ValueError):
        read_summary_json(tmp_path / "x.json")


def test_svg_structure(tmp_path):
    rows = execute(plan_from_dict(SMALL)).rows
    path = write_svg(summarize(rows), tmp_path / "p.svg", "epsilon", "mean_evals")
    root = ET.parse(path).getroot()
    ns = {"s": "http://www.w3.org/2000/svg"}
    series = root.findall("s:g[@class='series']", ns)
    assert [g.get("data-scheme") for g in series] == ["sa", "mlsa", "admlsa"]
    for g in series:
        assert len(g.findall("s:circle", ns)) == 2
        fits = g.findall("s:line[@class='fit']", ns)
        assert len(fits) == 1 and fits[0].get("stroke-dasharray")
    with pytest.raises(ValueError):
        write_svg(summarize(rows), tmp_path / "q.svg", "nope", "mean_time")


def test_emit_dispatch(tmp_path):
    rows = _planted()
    emit(rows, None, "csv", tmp_path / "a.csv")
    emit(rows, None, "json", tmp_path / "a.json")
    emit(rows, None, "SVG", tmp_path / "a.svg")
    assert all((tmp_path / f).exists() for f in ("a.csv", "a.json", "a.svg"))
    with pytest.raises(ValueError):
        emit(rows, None, "xlsx", tmp_path / "a.xlsx")


# command line

def test_cli_run_summarize_plot(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out), "--parallelism", "2"]) == 0
    for f in ("rows.csv", "rows.json", "summary.json", "rmse_time.svg", "eps_time.svg",
              "eps_evals.svg"):
        assert (out / f).exists()
    assert not (out / "failures.json").exists()
    first = (out / "rows.csv").read_text()
    assert main(["run", str(path), "--out", str(tmp_path / "again")]) == 0
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]
    assert strip(first) == strip((tmp_path / "again" / "rows.csv").read_text())
    assert main(["summarize", str(out / "rows.csv"), "--out", str(tmp_path / "s.json")]) == 0
    assert main(["plot", str(tmp_path / "s.json"), "--out", str(tmp_path / "p.svg"),
                 "--x", "epsilon", "--y", "mean_evals"]) == 0
    assert (tmp_path / "p.svg").exists()
    text = capsys.readouterr().out
    assert "slopes" in text and "admlsa" in text


def test_cli_seed_and_replications(tmp_path):
    path = _write(tmp_path, SMALL)
    assert main(["run", str(path), "--out", str(tmp_path / "a"), "--seed", "1",
                 "--replications", "2"]) == 0
    rows = read_csv(tmp_path / "a" / "rows.csv")
    assert len(rows) == 3 * 2 * 2
    assert main(["run", str(path), "--out", str(tmp_path / "b"), "--seed", "2",
                 "--replications", "2"]) == 0
    assert [r.estimate for r in rows] != [r.estimate for r in read_csv(tmp_path / "b" / "rows.csv")]


def test_cli_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "none.yaml")]) == 2
    assert main(["summarize", str(tmp_path / "none.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_rmse_falls_with_accuracy():
    doc = dict(SMALL, replications=12, accuracies=["1/4", "1/16"], schemes=[
        {"name": "nsa", "scheme": "nsa", "step": {"a": 1, "b": 100}, "init": 0.0}])
    s = summarize(execute(plan_from_dict(doc)).rows)
    coarse, fine = s.rows_for("nsa")
    assert fine.rmse < coarse.rmse
    assert np.isfinite(s.slope("nsa"))
