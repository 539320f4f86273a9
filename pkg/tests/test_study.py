import math

import numpy as np
import pytest

from simstudy.batches import DrawsBatch
from simstudy.rng import StreamKey, capture_state, derive_chunk_stream, derive_model_stream
from simstudy.study.eval_functions import best_sqr_err, df, sqr_err
from simstudy.study.method_functions import _cv, cv_errors, lasso, make_folds, ridge
from simstudy.study.model_functions import make_sparse_linear_model


def _stream(i=1):
    return derive_chunk_stream(StreamKey(2016, "test", i))


def _model(n=40, p=60, k=5):
    return make_sparse_linear_model(n, p, k, derive_model_stream(2016, f"t{n}_{p}_{k}"))


def test_model_identity():
    m = _model(200, 500, 10)
    assert m.name == "slm"
    assert m.label == "n = 200, p = 500, k = 10"
    x, beta = m["x"], m["beta"]
    assert x.shape == (200, 500) and beta.sum() == 10 and np.all(beta[:10] == 1)
    assert np.allclose(m["mu"], x @ beta)
    assert m["sigma"] == pytest.approx(math.sqrt(np.sum(m["mu"] ** 2) / 400), rel=1e-12)


def test_model_validation():
    with pytest.raises(ValueError):
        make_sparse_linear_model(10, 5, 6, _stream())


def test_simulate_shape_and_noise():
    m = _model(50, 10, 2)
    draws = m.draw(400, _stream())
    assert len(draws) == 400 and draws[0].shape == (50,)
    resid = np.array(draws) - m["mu"]
    assert resid.std() == pytest.approx(m["sigma"], rel=0.02)


def test_sqr_err_oracle():
    m = _model(20, 50, 1)
    out = {"beta": np.zeros((50, 3))}
    out["beta"][:, 1] = m["beta"]
    vals = sqr_err.compute(m, out)
    # k/p = 1/50 for the zero estimate, exactly zero for the truth
    assert np.allclose(vals, [0.02, 0.0, 0.02], atol=1e-15)
    assert best_sqr_err.compute(m, out) == 0.0
    assert sqr_err.compute(m, {"beta": np.zeros(50)}) == pytest.approx(0.02)
    assert np.array_equal(df.compute(m, {"df": np.array([1, 2])}), [1, 2])


def test_lasso_and_ridge_methods():
    m = _model()
    y = m.draw(1, _stream())[0]
    for meth in (lasso, ridge):
        out = meth.run(m, y, None)
        assert out["beta"].shape == (60, 50)
        assert out["yhat"].shape == (40, 50)
        assert len(out["lambda"]) == len(out["df"]) == 50
    r = ridge.run(m, y, None)
    assert r["df"] == pytest.approx(np.linspace(1, 40, 50), abs=1e-6)


@pytest.mark.parametrize("n,nfolds,sizes", [(10, 3, [3, 3, 4]), (200, 5, [40] * 5),
                                            (11, 5, [2, 2, 2, 2, 3]), (7, 2, [4, 3])])
def test_make_folds(n, nfolds, sizes):
    folds = make_folds(n, nfolds, _stream())
    assert [f.size for f in folds] == sizes
    assert sorted(np.concatenate(folds).tolist()) == list(range(n))


def test_make_folds_empty_fold():
    with pytest.raises(ValueError):
        make_folds(3, 5, _stream())


def test_cv_errors_independent_loop():
    m = _model(30, 20, 3)
    y = m.draw(1, _stream())[0]
    base = lasso.run(m, y, None)
    folds = make_folds(30, 5, _stream(2))
    err = cv_errors(m, y, base, lasso, folds, None)
    from simstudy.study.solvers import lasso_fit
    x = m["x"]
    for i, test in enumerate(folds):
        train = np.array([r for r in range(30) if r not in set(test.tolist())])
        fit = lasso_fit(x[train], y[train], base["lambda"])
        for l in range(50):
            pred = x[test] @ fit["beta"][:, l]
            assert abs(err[l, i] - np.mean((pred - y[test]) ** 2)) <= 1e-12


def test_cv_output_and_one_se():
    m = _model(40, 30, 4)
    y = m.draw(1, _stream())[0]
    base = lasso.run(m, y, None)
    out = _cv(m, y, base, lasso, _stream(3))
    assert out["err"].shape == (50, 5)
    assert np.allclose(out["m"], out["err"].mean(axis=1))
    assert np.allclose(out["se"], out["err"].std(axis=1, ddof=1) / math.sqrt(5))
    imin, i1 = out["imin"], out["ioneserule"]
    assert out["m"][imin] == out["m"].min()
    assert out["m"][i1] <= out["m"][imin] + out["se"][imin]
    assert 0 <= i1 < 50
    assert np.array_equal(out["beta"], base["beta"][:, imin])
    assert np.allclose(out["yhat"], m["x"] @ out["beta"])


def test_cv_noiseless_null_model_picks_first():
    # k = 0: y = 0 exactly, every path point gives zero error
    m = _model(20, 10, 0)
    assert m["sigma"] == 0
    y = m.draw(1, _stream())[0]
    assert np.all(y == 0)
    base = lasso.run(m, y, None)
    out = _cv(m, y, base, lasso, _stream(4))
    assert out["imin"] == 0
    assert np.all(out["beta"] == 0)


def test_cv_same_folds_for_every_method():
    from simstudy.rng import method_stream_for
    s = _stream()
    batch = DrawsBatch("m", "M", 1, [0.0], capture_state(s))
    a = make_folds(50, 5, method_stream_for(batch).substream("draw", 1))
    b = make_folds(50, 5, method_stream_for(batch).substream("draw", 1))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_cv_independent_of_stored_base(tmp_path):
    # lasso + cv gives the same bytes whether or not lasso was stored first
    from simstudy import new_simulation
    from simstudy.store import path_for
    from simstudy.study.method_functions import cv as cv_ext

    def build(d, first):
        sim = new_simulation("c", "C", dir=d)
        sim.generate_model(make_sparse_linear_model, n=20, p=15, k=[2, 6], vary_along="k")
        sim.simulate_from_model(nsim=2, index=[1, 2])
        if first:
            sim.run_method([lasso])
        sim.run_method([lasso + cv_ext])
        return sim

    a, b = build(tmp_path / "a", True), build(tmp_path / "b", False)
    outs_a = [path_for(r).read_bytes() for r in a.refs["output"] if r.method_name == "lasso_cv"]
    outs_b = [path_for(r).read_bytes() for r in b.refs["output"] if r.method_name == "lasso_cv"]
    assert len(outs_a) == 4 and outs_a == outs_b
