import numpy as np
import pytest

from stancelab import gbt
from stancelab._kernels import (GAIN_EPS, _best_split_loop, _best_split_numpy,
                                _predict_margin_loop, _predict_margin_numpy)


def exhaustive_best_gain(X, g, h, reg_lambda=1.0, min_child_weight=1.0):
    """Independent oracle: enumerate every (column, midpoint) candidate and
    return the maximum achievable gain with the set of attaining splits."""
    m, p = X.shape
    g_total, h_total = g.sum(), h.sum()
    parent = g_total ** 2 / (h_total + reg_lambda)
    best = 0.0
    argmax = set()
    for j in range(p):
        values = np.unique(X[:, j])
        for a, b in zip(values[:-1], values[1:]):
            thr = (a + b) / 2
            mask = X[:, j] < thr
            gl, hl = g[mask].sum(), h[mask].sum()
            gr, hr = g[~mask].sum(), h[~mask].sum()
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gain = 0.5 * (gl ** 2 / (hl + reg_lambda)
                          + gr ** 2 / (hr + reg_lambda) - parent)
            if gain > best + 1e-10:
                best = gain
                argmax = {(j, thr)}
            elif abs(gain - best) <= 1e-10:
                argmax.add((j, thr))
    return best, argmax


def test_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        m = int(rng.integers(2, 12))
        p = int(rng.integers(1, 5))
        X = rng.integers(0, 4, size=(m, p)).astype(float)
        y = rng.integers(0, 2, size=m).astype(float)
        pr = np.full(m, 0.5)
        g, h = pr - y, pr * (1 - pr)
        col, thr, gain = _best_split_loop(X, g, h, 1.0, 1.0)
        best, argmax = exhaustive_best_gain(X, g, h)
        if best <= GAIN_EPS:
            assert col == -1
        else:
            assert abs(gain - best) < 1e-9
            assert (col, thr) in argmax


def test_numpy_and_loop_kernels_bitwise_equal():
    rng = np.random.default_rng(7)
    for _ in range(500):
        m = int(rng.integers(2, 50))
        p = int(rng.integers(1, 10))
        X = rng.poisson(1.0, size=(m, p)).astype(float)
        g = rng.normal(size=m)
        h = np.abs(rng.normal(size=m)) + 1e-3
        a = _best_split_loop(X, g, h, 1.0, 1.0)
        b = _best_split_numpy(X, g, h, 1.0, 1.0)
        assert a[0] == b[0]
        assert float(a[1]) == float(b[1])
        assert float(a[2]) == float(b[2])


def test_predict_kernels_agree():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 6))
    y = (X[:, 0] > 0).astype(int)
    model = gbt.train(X, y, gbt.BoostParams(n_estimators=10))
    # flatten all trees into one kernel call
    feats, thrs, lefts, rights, vals, starts = [], [], [], [], [], []
    off = 0
    for t in model.trees:
        starts.append(off)
        feats.append(t.feature + np.where(t.feature >= 0, 0, 0))
        thrs.append(t.threshold)
        lefts.append(np.where(t.left >= 0, t.left + off, -1))
        rights.append(np.where(t.right >= 0, t.right + off, -1))
        vals.append(t.value)
        off += t.n_nodes
    args = (np.concatenate(feats), np.concatenate(thrs),
            np.concatenate(lefts), np.concatenate(rights),
            np.concatenate(vals), np.asarray(starts, dtype=np.int64))
    out1 = _predict_margin_loop(X, *args, np.zeros(len(X)))
    out2 = _predict_margin_numpy(X, *args, np.zeros(len(X)))
    assert np.array_equal(out1, out2)
    assert np.allclose(out1 + model.base_score, gbt.predict_margin(model, X))


def separable_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.poisson(1.0, size=(n, 10)).astype(float)
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 0.5, n) > 1.5).astype(int)
    return X, y


def test_train_and_predict():
    X, y = separable_data()
    model = gbt.train(X, y)
    conf = gbt.predict_confidence(model, X)
    assert conf.min() > 0 and conf.max() < 1
    acc = float(((conf > 0.5) == y).mean())
    assert acc > 0.85
    assert model.stopped_at == len(model.trees) <= model.params.n_estimators


def test_train_rejects_single_class():
    X = np.ones((20, 2))
    with pytest.raises(gbt.TrainingError):
        gbt.train(X, np.ones(20, dtype=int))


def test_train_deterministic():
    X, y = separable_data(seed=5)
    m1 = gbt.train(X, y)
    m2 = gbt.train(X, y)
    assert np.array_equal(gbt.predict_margin(m1, X), gbt.predict_margin(m2, X))


def test_max_delta_step_caps_leaves():
    X, y = separable_data()
    params = gbt.BoostParams(max_delta_step=1.0, learning_rate=0.1)
    model = gbt.train(X, y, params)
    for t in model.trees:
        leaf_vals = t.value[t.feature < 0]
        assert np.all(np.abs(leaf_vals) <= params.learning_rate * 1.0 + 1e-12)


def test_save_load_round_trip(tmp_path):
    X, y = separable_data(seed=2)
    model = gbt.train(X, y)
    f = tmp_path / "m.txt"
    model.save(f)
    model2 = gbt.BoostedModel.load(f)
    assert np.array_equal(gbt.predict_margin(model, X),
                          gbt.predict_margin(model2, X))
    assert np.array_equal(model.total_gain(), model2.total_gain())
    f2 = tmp_path / "m2.txt"
    model2.save(f2)
    assert f.read_bytes() == f2.read_bytes()


def test_column_reconciliation():
    from stancelab.features import FeatureColumn, FeatureMatrix
    X, y = separable_data(seed=4)
    cols = tuple(FeatureColumn(f"t{j}", "tweet_term", "word")
                 for j in range(X.shape[1]))
    cells = {(i, j): X[i, j] for i in range(X.shape[0])
             for j in range(X.shape[1]) if X[i, j] > 0}
    m = FeatureMatrix(rows=tuple(f"u{i}" for i in range(X.shape[0])),
                      columns=cols, cells=cells)
    model = gbt.train(m, y)
    base = gbt.predict_margin(model, m)
    # permute columns and add an unseen one: predictions must not change
    perm = (cols[3], cols[0],
            FeatureColumn("new", "tweet_term", "word")) + cols[1:3] + cols[4:]
    remap = {c.identifier: j for j, c in enumerate(perm)}
    cells2 = {}
    for (i, j), v in m.cells.items():
        cells2[(i, remap[cols[j].identifier])] = v
    m2 = FeatureMatrix(rows=m.rows, columns=perm, cells=cells2)
    assert np.array_equal(gbt.predict_margin(model, m2), base)


def test_feature_importance_ranked():
    X, y = separable_data()
    model = gbt.train(X, y)
    imp = gbt.feature_importance(model)
    assert len(imp) == X.shape[1]
    gains = [g for _n, g in imp]
    assert gains == sorted(gains, reverse=True)
    assert imp[0][0] in ("f00000", "f00001")  # the informative columns


def test_cross_validate():
    X, y = separable_data(n=300)
    rep = gbt.cross_validate(X, y, gbt.BoostParams(n_estimators=40), k=5)
    assert rep.k == 5
    assert rep.precision_mean > 0.8
    assert rep.recall_mean > 0.8


def test_cv_needs_enough_per_class():
    X = np.ones((10, 2))
    y = np.array([1, 1, 1, 1, 1, 1, 1, 0, 0, 0])
    with pytest.raises(gbt.TrainingError):
        gbt.cross_validate(X, y, k=5)


def test_accept_by_threshold():
    out = gbt.accept_by_threshold([0.9, 0.7, 0.5, 0.31, 0.2], 0.7)
    assert out == [1, 1, None, None, 0]
    with pytest.raises(ValueError):
        gbt.accept_by_threshold([0.5], 0.5)


def test_one_vs_rest():
    rng = np.random.default_rng(11)
    n = 240
    X = np.zeros((n, 3))
    labels = []
    for i in range(n):
        k = i % 3
        X[i, k] = 1 + rng.poisson(2)
        labels.append(f"c{k}")
    models = gbt.train_one_vs_rest(X, labels,
                                   gbt.BoostParams(n_estimators=30))
    pred = gbt.predict_one_vs_rest(models, X)
    acc = np.mean([p == t for p, t in zip(pred, labels)])
    assert acc > 0.9
    thresholded = gbt.predict_one_vs_rest(models, np.zeros((1, 3)),
                                          threshold=0.99)
    assert thresholded == [None]
