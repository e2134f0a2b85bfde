from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import auc_pairs
from ppminspect import gbdt
from ppminspect.gbdt import BINARY_LOGISTIC, SQUARED_ERROR, BoostedEnsemble, Hyperparams, ModelError
from ppminspect.metrics import auc

SMALL = Hyperparams(n_rounds=20, max_depth=3)


def logistic_data(seed, n=300, m=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=0.7, size=n) > 0).astype(float)
    return X, y


# --- fitting contract ----------------------------------------------------------


def test_constant_regression_target():
    X = np.random.default_rng(0).normal(size=(50, 3))
    model = gbdt.fit(X, np.full(50, 7.25), SMALL, task=SQUARED_ERROR)
    assert model.base_score == 7.25
    assert all(np.all(t.value == 0) for t in model.trees)
    assert np.all(gbdt.predict(model, X) == 7.25)


def test_separable_one_dimensional_data():
    x = np.concatenate([np.linspace(-1, -0.1, 100), np.linspace(0.1, 1, 100)])
    y = (x > 0).astype(float)
    model = gbdt.fit(x[::2, None], y[::2], Hyperparams(n_rounds=10, max_depth=1))
    assert auc(gbdt.predict(model, x[1::2, None]), y[1::2]) == 1.0


def test_base_score_is_log_odds():
    X, y = logistic_data(1)
    model = gbdt.fit(X, y, SMALL)
    p = y.mean()
    assert model.base_score == pytest.approx(np.log(p / (1 - p)), rel=1e-15)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("task", [BINARY_LOGISTIC, SQUARED_ERROR])
def test_objective_history_is_non_increasing_and_recomputable(seed, task):
    X, y = logistic_data(seed, n=200)
    if task == SQUARED_ERROR:
        y = X[:, 0] * 3 + np.random.default_rng(seed).normal(size=len(y))
    model = gbdt.fit(X, y, SMALL, task=task)
    hist = np.array(model.objective_history)
    assert len(hist) == SMALL.n_rounds + 1
    assert np.all(np.diff(hist) <= 1e-9 * np.abs(hist[:-1]))
    for k in (0, 1, 7, SMALL.n_rounds):
        assert gbdt.objective(model, X, y, n_trees=k) == pytest.approx(hist[k], rel=1e-12)


def test_trees_respect_depth_and_width():
    X, y = logistic_data(3, m=7)
    model = gbdt.fit(X, y, Hyperparams(n_rounds=15, max_depth=4))
    for t in model.trees:
        assert t.depth() <= 4
        assert np.all(t.feature < X.shape[1])
        internal = t.feature >= 0
        assert np.all(t.gain[internal] > 0)


def test_min_child_hessian_is_enforced():
    X, y = logistic_data(4)
    hp = Hyperparams(n_rounds=5, max_depth=6, min_child_hessian=10.0)
    model = gbdt.fit(X, y, hp)
    for t in model.trees:
        leaves = t.leaves
        # the first tree sees hessian p(1-p) per row
        assert np.all(t.cover[leaves] >= 10.0 - 1e-9)


def test_fit_errors():
    X = np.zeros((4, 2))
    with pytest.raises(ModelError, match="both classes"):
        gbdt.fit(X, np.ones(4))
    with pytest.raises(ModelError, match="0/1"):
        gbdt.fit(X, np.array([0, 1, 2, 1.0]))
    with pytest.raises(ModelError):
        gbdt.fit(np.zeros((1, 2)), np.array([1.0]), task=SQUARED_ERROR)
    with pytest.raises(ModelError):
        gbdt.fit(np.array([[np.nan], [1.0]]), np.array([0.0, 1.0]))
    with pytest.raises(ModelError):
        gbdt.fit(X, np.zeros(3), task=SQUARED_ERROR)
    with pytest.raises(ModelError):
        gbdt.fit(X, np.array([0, 1, 0, 1.0]), task="poisson")


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_rounds=0), dict(max_depth=0), dict(learning_rate=0.0), dict(learning_rate=1.5), dict(l2_leaf=-1.0),
     dict(min_split_gain=-0.1)],
)
def test_hyperparam_validation(kwargs):
    with pytest.raises(ValueError):
        Hyperparams(**kwargs)


# --- brute-force split oracle -------------------------------------------------------


def naive_root_split(X, g, h, lam, gamma, min_h):
    G, H = g.sum(), h.sum()
    best = (0.0, -1, 0.0)
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for a, b in zip(values[:-1], values[1:]):
            thr = (a + b) / 2
            left = X[:, f] < thr
            gl, hl = g[left].sum(), h[left].sum()
            gr, hr = G - gl, H - hl
            if hl < min_h or hr < min_h:
                continue
            gain = 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam) - G**2 / (H + lam)) - gamma
            if gain > best[0] + 1e-12:
                best = (gain, f, thr)
    return best


@given(st.integers(0, 100_000), st.floats(0.0, 5.0), st.sampled_from([0.0, 0.5, 3.0]))
def test_root_split_matches_exhaustive_search(seed, lam, min_h):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(40, 4)), 1)  # duplicates on purpose
    y = rng.normal(size=40)
    hp = Hyperparams(n_rounds=1, max_depth=1, learning_rate=1.0, l2_leaf=lam, min_child_hessian=min_h)
    model = gbdt.fit(X, y, hp, task=SQUARED_ERROR)
    g, h = model.base_score - y, np.ones(40)
    gain, f, thr = naive_root_split(X, g, h, lam, 0.0, min_h)
    tree = model.trees[0]
    if f < 0:
        assert tree.feature[0] == -1
        return
    assert tree.feature[0] == f
    assert tree.threshold[0] == pytest.approx(thr, rel=1e-12)
    assert tree.gain[0] == pytest.approx(gain, rel=1e-9)
    left = X[:, f] < thr
    for node, rows in ((tree.left[0], left), (tree.right[0], ~left)):
        assert tree.value[node] == pytest.approx(-g[rows].sum() / (rows.sum() + lam), rel=1e-9)


def test_min_split_gain_prunes():
    X, y = logistic_data(5)
    model = gbdt.fit(X, y, Hyperparams(n_rounds=3, min_split_gain=1e6))
    assert all(t.n_nodes == 1 for t in model.trees)


# --- prediction ---------------------------------------------------------------------


def test_zero_tree_model_is_constant():
    model = BoostedEnsemble(SQUARED_ERROR, 3.5, [], Hyperparams(), ["a", "b"])
    assert np.all(gbdt.predict(model, np.random.default_rng(0).normal(size=(5, 2))) == 3.5)


def test_duplicate_rows_and_permutations():
    X, y = logistic_data(6)
    model = gbdt.fit(X, y, SMALL)
    p = gbdt.predict(model, X)
    assert np.all((p > 0) & (p < 1))
    assert np.array_equal(gbdt.predict(model, np.vstack([X[:1], X[:1]])), [p[0], p[0]])
    perm = np.random.default_rng(0).permutation(len(X))
    assert np.array_equal(gbdt.predict(model, X[perm]), p[perm])


def test_width_mismatch():
    X, y = logistic_data(7)
    model = gbdt.fit(X, y, SMALL)
    with pytest.raises(ModelError, match="width"):
        gbdt.predict(model, X[:, :3])


def test_unused_feature_has_no_effect():
    X, y = logistic_data(8, m=6)
    model = gbdt.fit(X, y, Hyperparams(n_rounds=10, max_depth=2))
    unused = sorted(set(range(6)) - model.used_features())
    assert unused
    Xp = X.copy()
    Xp[:, unused] = np.random.default_rng(1).normal(scale=100, size=(len(X), len(unused)))
    assert np.array_equal(gbdt.predict(model, Xp), gbdt.predict(model, X))


def test_training_row_order_does_not_change_predictions():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(150, 4))
    y = X[:, 0] - X[:, 2] ** 2 + rng.normal(scale=0.1, size=150)
    hp = Hyperparams(n_rounds=15, max_depth=3)
    a = gbdt.fit(X, y, hp, task=SQUARED_ERROR)
    perm = rng.permutation(150)
    b = gbdt.fit(X[perm], y[perm], hp, task=SQUARED_ERROR)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(gbdt.predict(b, X), gbdt.predict(a, X))


def test_n_trees_prefix_prediction():
    X, y = logistic_data(10)
    model = gbdt.fit(X, y, SMALL)
    raw0 = gbdt.predict_raw(model, X, n_trees=0)
    assert np.all(raw0 == model.base_score)
    manual = model.base_score + sum(t.value[_leaf(t, X)] for t in model.trees[:3])
    np.testing.assert_allclose(gbdt.predict_raw(model, X, n_trees=3), manual, rtol=0, atol=1e-12)


def _leaf(tree, X):
    out = []
    for x in X:
        node = 0
        while tree.feature[node] >= 0:
            node = tree.left[node] if x[tree.feature[node]] < tree.threshold[node] else tree.right[node]
        out.append(node)
    return np.array(out)


# --- serialisation -------------------------------------------------------------------


def test_json_round_trip(tmp_path):
    X, y = logistic_data(11)
    model = gbdt.fit(X, y, SMALL, feature_names=[f"agg__A{j}|r" for j in range(5)])
    path = tmp_path / "m.json"
    model.save(path)
    back = BoostedEnsemble.load(path)
    assert back.feature_names == model.feature_names
    assert np.array_equal(gbdt.predict(back, X), gbdt.predict(model, X))
    data = json.loads(path.read_text())
    assert data["format"] == gbdt.MODEL_FORMAT and data["version"] == gbdt.MODEL_VERSION
    assert set(data["trees"][0]) >= {"feature", "threshold", "left", "right", "gain", "cover"} or "leaf" in data["trees"][0]


def test_model_format_checks():
    X, y = logistic_data(12)
    data = gbdt.fit(X, y, SMALL).to_dict()
    with pytest.raises(ModelError):
        BoostedEnsemble.from_dict({**data, "format": "xgboost"})
    with pytest.raises(ModelError):
        BoostedEnsemble.from_dict({**data, "version": 99})


def test_fit_is_deterministic():
    X, y = logistic_data(13)
    a, b = gbdt.fit(X, y, SMALL), gbdt.fit(X, y, SMALL)
    assert a.to_dict() == b.to_dict()


def test_auc_of_fitted_model_agrees_with_pairs():
    X, y = logistic_data(14)
    model = gbdt.fit(X, y, SMALL)
    p = gbdt.predict(model, X)
    assert auc(p, y) == auc_pairs(p.tolist(), y.tolist())
