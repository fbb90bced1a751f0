import numpy as np
import pytest

from dp_batcher.engine import ghost_norm_dense, per_example_grads
from dp_batcher.data import Dataset
from dp_batcher.models import (
    LinearRegression,
    LogisticRegression,
    TwoLayerClassifier,
    build_model,
)
from oracles import finite_difference_grad

MODELS = [LinearRegression(), LogisticRegression(), TwoLayerClassifier(hidden=5)]


def _random_point(model, n_features, seed):
    rng = np.random.default_rng(seed)
    theta = 0.5 * rng.normal(size=model.num_params(n_features))
    x = rng.normal(size=n_features)
    y = 1.0 if model.classification else float(rng.normal())
    return theta, x, y


@pytest.mark.parametrize("model", MODELS, ids=lambda m: type(m).__name__)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(model, seed):
    theta, x, y = _random_point(model, 4, seed)
    grad = model.per_example_grad(theta, x, y)
    fd = finite_difference_grad(lambda t: model.per_example_loss(t, x, y), theta, h=1e-6)
    denom = max(np.linalg.norm(grad), 1e-8)
    assert np.linalg.norm(fd - grad) / denom < 1e-5


@pytest.mark.parametrize("model", MODELS, ids=lambda m: type(m).__name__)
def test_ghost_norms_equal_full_gradient_norm(model):
    for seed in range(5):
        theta, x, y = _random_point(model, 6, seed)
        grad_sq = float(np.dot(g := model.per_example_grad(theta, x, y), g))
        ghost_sq = sum(
            ghost_norm_dense(a, e, include_bias=True) ** 2
            for a, e in model.dense_layer_io(theta, x, y)
        )
        assert ghost_sq == pytest.approx(grad_sq, rel=1e-9)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: type(m).__name__)
def test_param_count_matches_init(model):
    rng = np.random.default_rng(0)
    theta = model.init_params(7, rng)
    assert theta.shape == (model.num_params(7),)
    assert np.isfinite(theta).all()


def test_mlp_init_deterministic():
    m = TwoLayerClassifier(hidden=4)
    a = m.init_params(3, np.random.default_rng(11))
    b = m.init_params(3, np.random.default_rng(11))
    assert np.array_equal(a, b)


def test_batch_grads_match_single_calls():
    model = LogisticRegression()
    rng = np.random.default_rng(5)
    data = Dataset(features=rng.normal(size=(10, 3)), labels=(rng.random(10) > 0.5).astype(float))
    theta = rng.normal(size=4)
    batch = per_example_grads(model, data, theta, [3, 7, 1])
    for got, i in zip(batch, [3, 7, 1]):
        single = model.per_example_grad(theta, data.features[i], data.labels[i])
        assert np.array_equal(got, single)


def test_decision_values_align_with_per_example_loss():
    model = LogisticRegression()
    rng = np.random.default_rng(9)
    theta = rng.normal(size=4)
    x = rng.normal(size=3)
    z = model.decision_values(theta, x[None, :])[0]
    # decision > 0 must mean class-1 loss below class-0 loss
    loss1 = model.per_example_loss(theta, x, 1.0)
    loss0 = model.per_example_loss(theta, x, 0.0)
    assert (z > 0) == (loss1 < loss0)


def test_build_model_factory():
    assert isinstance(build_model("linear"), LinearRegression)
    assert isinstance(build_model("logistic"), LogisticRegression)
    mlp = build_model("mlp", hidden=9)
    assert isinstance(mlp, TwoLayerClassifier) and mlp.hidden == 9
    with pytest.raises(ValueError):
        build_model("vit")
    with pytest.raises(ValueError):
        TwoLayerClassifier(hidden=0)
