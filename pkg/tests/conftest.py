import numpy as np
import pytest

from simstudy import new_method_spec, new_metric_spec, new_model_spec


def simulate_normal(params, nsim, rng):
    return [params["mu"] + rng.normal(params["n"]) for _ in range(nsim)]


def make_normal_model(n, mu, rng=None):
    return new_model_spec("normal", f"n = {n}, mu = {mu}", {"n": n, "mu": float(mu)},
                          simulate_normal)


def _mean(model, draw, rng):
    return {"est": float(np.mean(draw))}


def _jittered_mean(model, draw, rng):
    # randomized: consumes the method stream
    return {"est": float(np.mean(draw)) + 1e-3 * rng.uniform()}


def _boom(model, draw, rng):
    raise RuntimeError("boom")


mean_method = new_method_spec("mean", "Sample mean", _mean)
jitter_method = new_method_spec("jitter", "Jittered mean", _jittered_mean)
failing_method = new_method_spec("boom", "Always fails", _boom)
sq_err = new_metric_spec("sq_err", "Squared error", lambda m, o: (o["est"] - m["mu"]) ** 2)
abs_err = new_metric_spec("abs_err", "Absolute error", lambda m, o: abs(o["est"] - m["mu"]))


@pytest.fixture
def toy_sim(tmp_path):
    from simstudy import new_simulation

    sim = new_simulation("toy", "Toy study", dir=tmp_path)
    sim.generate_model(make_normal_model, n=10, mu=[0.0, 1.0, 2.0], vary_along="mu")
    sim.simulate_from_model(nsim=4, index=[1, 2])
    return sim


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE[report.nodeid] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.failed:
        _ACCEPTANCE[report.nodeid] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _ACCEPTANCE.items():
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
