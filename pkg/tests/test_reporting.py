import re
import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import abs_err, jitter_method, mean_method, sq_err
from simstudy import get_evals, new_aggregator, new_simulation
from simstudy.batches import EvalsBatch
from simstudy.errors import NotComputedError
from simstudy.reporting import (box_stats, build_table, create_scaffold, evals_to_records,
                                format_number, generate_report, plot_eval, plot_eval_by,
                                plot_evals, record_provenance, records_to_csv, sim_records,
                                stale_sources, tabulate_eval)
from simstudy.reporting.plots import read_plot_csv
from simstudy.reporting.tables import TableSpec, render_table


@pytest.fixture
def done(toy_sim):
    toy_sim.run_method([mean_method, jitter_method])
    toy_sim.evaluate([sq_err, abs_err])
    return toy_sim


# -- records -----------------------------------------------------------------

def test_record_count(done):
    rows, varied = sim_records(done)
    # 3 models x 2 methods x 8 draws x 3 metrics (including time)
    assert len(rows) == 3 * 2 * 8 * 3
    assert varied == ["mu"]
    assert {r.metric_name for r in rows} == {"sq_err", "abs_err", "time"}


def test_vector_unrolling():
    b = EvalsBatch("m", 1, "meth", "Method", {"v": "V", "time": "Computing time"},
                   {"v": [np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0])],
                    "time": [0.1, 0.2]})
    rows = evals_to_records([b])
    vec = [r for r in rows if r.metric_name == "v"]
    assert len(vec) == 6
    assert [r.value_index for r in vec] == [1, 2, 3, 1, 2, 3]
    assert [r.draw_id for r in vec[:3]] == ["r1.1"] * 3
    assert [r.value for r in vec] == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


def test_records_csv(done):
    rows, varied = sim_records(done)
    text = records_to_csv(rows, varied)
    lines = text.splitlines()
    assert lines[0] == "model_name,mu,method,draw,metric,value_index,value"
    assert len(lines) == len(rows) + 1
    first = rows[0]
    assert float(lines[1].split(",")[-1]) == first.value


# -- tables ------------------------------------------------------------------

@pytest.mark.parametrize("x,nsmall,digits,text", [
    (1.0, 2, 0, "1.00"), (0.0, 2, 0, "0.00"), (0.003, 2, 0, "0.00"),
    (0.0412, 2, 0, "0.04"), (0.0412, 2, 1, "0.04"), (123.456, 1, 2, "120.0"),
    (-0.001, 2, 0, "0.00"), (2.0 / 3, 3, 0, "0.667"),
])
def test_format_number(x, nsmall, digits, text):
    assert format_number(x, nsmall, digits) == text


def _single_cell_sim(tmp_path, values):
    from simstudy import new_method_spec, new_metric_spec, new_model_spec

    def make(rng=None):
        return new_model_spec("const", "Constant", {"v": 0.0},
                              lambda p, nsim, rng: [float(i) for i in range(nsim)])

    ident = new_method_spec("ident", "Identity", lambda model, draw, rng: {"x": draw})
    metric = new_metric_spec("val", "Value", lambda model, out: values[int(out["x"])])
    sim = new_simulation("one", "One cell", dir=tmp_path)
    sim.generate_model(make)
    sim.simulate_from_model(nsim=len(values))
    sim.run_method([ident])
    sim.evaluate([metric])
    return sim


def test_table_constant_metric(tmp_path):
    sim = _single_cell_sim(tmp_path, [1.0, 1.0, 1.0])
    table = build_table(sim, TableSpec("val"))
    assert table.cells == [["1.00 (0.00)"]]


def test_table_two_values(tmp_path):
    # mean 1, sd sqrt(2), se = sqrt(2)/sqrt(2) = 1
    sim = _single_cell_sim(tmp_path, [0.0, 2.0])
    assert build_table(sim, TableSpec("val")).cells == [["1.00 (1.00)"]]


def test_table_caption_and_shape(done):
    table = build_table(done, TableSpec("sq_err"))
    assert table.caption == "A comparison of Squared error (averaged over 8 replicates)."
    assert table.col_labels == ["Sample mean", "Jittered mean"]
    assert table.row_labels == ["n = 10, mu = 0.0", "n = 10, mu = 1.0", "n = 10, mu = 2.0"]


def test_table_mean_se_oracle(done):
    table = build_table(done, TableSpec("sq_err"))
    evals = get_evals(done)
    for i, model in enumerate(done.model_names()):
        for j, meth in enumerate(["mean", "jitter"]):
            vals = []
            for b in evals:
                if b.model_name == model and b.method_name == meth:
                    vals += list(b.values["sq_err"])
            vals = np.array(vals)
            assert table.centers[i, j] == pytest.approx(vals.mean(), abs=1e-15)
            se = vals.std(ddof=1) / np.sqrt(len(vals))
            assert table.spreads[i, j] == pytest.approx(se, abs=1e-15)


def _cells(text):
    return re.findall(r"-?\d+\.\d+ \(-?\d+\.\d+\)", text)


def test_formats_agree(done):
    texts = {f: tabulate_eval(done, "sq_err", format=f, nsmall=4) for f in
             ("latex", "markdown", "html")}
    cells = {f: _cells(t) for f, t in texts.items()}
    assert len(cells["latex"]) == 6
    assert cells["latex"] == cells["markdown"] == cells["html"]
    assert "\\caption{A comparison of Squared error" in texts["latex"]
    assert texts["markdown"].startswith("Table: A comparison of Squared error")
    assert "<caption>A comparison of Squared error" in texts["html"]
    for label in ("Sample mean", "Jittered mean", "n = 10, mu = 2.0"):
        assert all(label in t for t in texts.values())


def test_latex_layout(done):
    text = tabulate_eval(done, "sq_err", format="latex")
    lines = text.splitlines()
    assert lines[0] == "\\begin{table}"
    assert "\\begin{tabular}[t]{l|l|l}" in lines
    assert "  & Sample mean & Jittered mean\\\\" in lines
    assert lines[-1] == "\\end{table}"


def test_unknown_format(done):
    table = build_table(done, TableSpec("sq_err"))
    with pytest.raises(ValueError):
        render_table(table, "rtf")


def test_custom_aggregators(done):
    median = new_aggregator("Median", np.median)
    iqr = new_aggregator("IQR", lambda v: np.subtract(*np.percentile(v, [75, 25])))
    text = tabulate_eval(done, "sq_err", center=median, spread=iqr, nsmall=6)
    assert len(_cells(text)) == 6


def test_table_missing_metric(done):
    with pytest.raises(NotComputedError, match="evaluate"):
        tabulate_eval(done, "nonexistent")


def test_table_rejects_vector_metric(tmp_path):
    from simstudy import new_method_spec, new_metric_spec, new_model_spec
    sim = new_simulation("v", "V", dir=tmp_path)
    sim.generate_model(lambda rng=None: new_model_spec("m", "M", {}, lambda p, n, r: [0.0] * n))
    sim.simulate_from_model(nsim=2)
    sim.run_method([new_method_spec("z", "Z", lambda model, d, rng: {})])
    sim.evaluate([new_metric_spec("vec", "Vec", lambda m, o: np.zeros(3))])
    with pytest.raises(ValueError, match="vector"):
        tabulate_eval(sim, "vec")


# -- plots -------------------------------------------------------------------

@pytest.mark.parametrize("values", [
    [1, 2, 3, 4, 5],
    [1, 2, 3, 4, 100],
    list(np.random.default_rng(0).normal(size=37)),
    [5, 5, 5],
])
def test_box_stats_oracle(values):
    v = np.array(values, dtype=float)
    st = box_stats(v)
    q1, q2, q3 = np.percentile(v, [25, 50, 75])
    assert (st["q1"], st["median"], st["q3"]) == pytest.approx((q1, q2, q3))
    lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
    assert st["whisker_lo"] == v[v >= lo].min() and st["whisker_hi"] == v[v <= hi].max()
    assert sorted(st["outliers"]) == sorted(v[(v < lo) | (v > hi)].tolist())


def test_box_stats_outlier():
    assert box_stats([1, 2, 3, 4, 100])["outliers"] == [100.0]


def _svg_numbers_match(plot):
    meta, rows = read_plot_csv(plot.csv)
    assert plot.svg.startswith("<svg") and plot.svg.rstrip().endswith("</svg>")
    return meta, rows


def test_plot_eval(done):
    plot = plot_eval(done, "sq_err")
    meta, rows = _svg_numbers_match(plot)
    assert meta["ylabel"] == "Squared error"
    for label in ("Sample mean", "Jittered mean", "n = 10, mu = 1.0", "Squared error"):
        assert label in plot.svg
    # medians equal a direct computation
    evals = get_evals(done, models="mu == 0", methods="mean")
    vals = [v for b in evals for v in b.values["sq_err"]]
    med = [r for r in rows if r["facet"] == "n = 10, mu = 0.0" and r["method"] == "Sample mean"
           and r["stat"] == "median"]
    assert float(med[0]["value"]) == pytest.approx(np.median(vals))


def test_plot_eval_by(done):
    plot = plot_eval_by(done, "sq_err", "mu")
    meta, rows = _svg_numbers_match(plot)
    assert meta["xlabel"] == "mu" and meta["ylabel"] == "Squared error"
    assert len(rows) == 6
    r = [r for r in rows if r["method"] == "Sample mean" and float(r["x"]) == 2.0][0]
    evals = get_evals(done, models="mu == 2", methods="mean")
    vals = np.array([v for b in evals for v in b.values["sq_err"]])
    assert float(r["y"]) == pytest.approx(vals.mean())
    assert float(r["halfwidth"]) == pytest.approx(vals.std(ddof=1) / np.sqrt(8))
    # the same numbers survive the round trip into the SVG
    from simstudy.reporting.plots import render_svg
    assert render_svg(plot.csv) == plot.svg


def test_plot_eval_by_raw(done):
    meta, rows = read_plot_csv(plot_eval_by(done, "sq_err", "mu", type="raw").csv)
    assert meta["kind"] == "eval_by_raw" and len(rows) == 3 * 2 * 8


def test_plot_eval_by_bad_args(done):
    with pytest.raises(ValueError):
        plot_eval_by(done, "sq_err", "mu", type="smooth")
    with pytest.raises(KeyError):
        plot_eval_by(done, "sq_err", "nope")


def test_plot_eval_by_single_draw_warns(tmp_path):
    from conftest import make_normal_model
    sim = new_simulation("w", "W", dir=tmp_path)
    sim.generate_model(make_normal_model, n=3, mu=[0.0, 1.0], vary_along="mu")
    sim.simulate_from_model(nsim=1)
    sim.run_method([mean_method])
    sim.evaluate([sq_err])
    with pytest.warns(UserWarning, match="single draw"):
        plot = plot_eval_by(sim, "sq_err", "mu")
    _, rows = read_plot_csv(plot.csv)
    assert all(float(r["halfwidth"]) == 0 for r in rows)


def test_plot_evals(tmp_path):
    from conftest import make_normal_model
    from simstudy import new_method_spec, new_metric_spec
    path = new_method_spec("path", "Shrinkage path",
                           lambda model, d, rng: {"est": np.mean(d) * np.linspace(0, 1, 5),
                                                  "df": np.arange(5.0)})
    err = new_metric_spec("err", "Error", lambda m, o: (o["est"] - m["mu"]) ** 2)
    dfm = new_metric_spec("df", "Degrees of freedom", lambda m, o: o["df"])
    short = new_metric_spec("short", "Short", lambda m, o: o["df"][:2])
    sim = new_simulation("p", "P", dir=tmp_path)
    sim.generate_model(make_normal_model, n=3, mu=[0.0, 1.0], vary_along="mu")
    sim.simulate_from_model(nsim=2)
    sim.run_method([path])
    sim.evaluate([err, dfm, short])
    plot = plot_evals(sim, "df", "err")
    meta, rows = read_plot_csv(plot.csv)
    assert meta["xlabel"] == "Degrees of freedom" and meta["ylabel"] == "Error"
    assert len(rows) == 2 * 2 * 5
    assert plot.svg.count("<polyline") == 4
    with pytest.raises(ValueError, match="different lengths"):
        plot_evals(sim, "df", "short")


def test_plot_save(done, tmp_path):
    csv_path, svg_path = plot_eval(done, "sq_err").save(tmp_path / "figs", "box")
    assert csv_path.read_text().startswith("# kind: eval_box")
    assert svg_path.exists()


# -- scaffold and reports ----------------------------------------------------

def test_scaffold_runs(tmp_path):
    root = tmp_path / "study"
    files = create_scaffold(root)
    assert sorted(p.name for p in files) == sorted(
        ["model_functions.py", "method_functions.py", "eval_functions.py", "main.py",
         "writeup.md"])
    proc = subprocess.run([sys.executable, "main.py"], cwd=root, capture_output=True, text=True,
                          timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "A comparison of Squared error (averaged over 10 replicates)." in proc.stdout
    from simstudy import load_simulation
    sim = load_simulation("my-simulation", root)
    report = generate_report(sim, root / "writeup.md", root / "writeup_out.md")
    text = report.read_text()
    assert "Warning" not in text
    assert "def simulate_normal_mean" in text and "| Sample mean |" in text


def test_scaffold_refuses_nonempty(tmp_path):
    (tmp_path / "keep.txt").write_text("x")
    with pytest.raises(FileExistsError):
        create_scaffold(tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["keep.txt"]


def test_report_staleness_without_recompute(done, tmp_path, monkeypatch):
    src = tmp_path / "method_functions.py"
    src.write_text("x = 1\n")
    record_provenance(done, [src])
    assert stale_sources(done) == []
    tmpl = tmp_path / "t.md"
    tmpl.write_text("# {{simulation_label}}\n{{staleness}}\n{{table sq_err}}\n"
                    "{{plot_eval_by sq_err mu}}\n")
    fresh = generate_report(done, tmpl, tmp_path / "fresh.md").read_text()
    assert "stale" not in fresh and "# Toy study" in fresh
    assert (tmp_path / "figures").is_dir()

    src.write_text("x = 2\n")
    files_before = {p: p.stat().st_mtime_ns for p in Path(done.dir, "files").rglob("*")}

    from simstudy import engine

    def forbidden(*a, **k):
        raise AssertionError("a stage was rerun")

    for stage in ("_draws_task", "_method_task", "_evals_task"):
        monkeypatch.setattr(engine, stage, forbidden)
    stale = generate_report(done, tmpl, tmp_path / "stale.md").read_text()
    assert "stale results" in stale and "method_functions.py" in stale
    assert {p: p.stat().st_mtime_ns for p in Path(done.dir, "files").rglob("*")} == files_before


def test_report_without_provenance(done, tmp_path):
    text = generate_report(done, out=tmp_path / "r.md").read_text()
    assert "no provenance" in text
