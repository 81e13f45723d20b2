"""Tests for the numpy MLP, Adam, checkpoints and the gradient check."""

import json

import numpy as np
import pytest

from app.core.errors import ConfigError, TrainingDivergenceError
from app.nn.checkpoint import load_mlp, save_mlp
from app.nn.gradcheck import check_network, numeric_gradients, relative_errors, run_gradcheck
from app.nn.mlp import (
    GradientSet,
    Layer,
    MlpParams,
    backward,
    forward,
    init_mlp,
    predict,
    soft_update,
)
from app.nn.optim import AdamState, adam_step


def _net(seed=0, sizes=(5, 7, 3), acts=("tanh", "tanh")):
    return init_mlp(list(sizes), list(acts), np.random.default_rng(seed))


def _scalar_net(w):
    return MlpParams([Layer(weights=np.array([[w]]), bias=np.zeros(1), activation="linear")])


# ── Forward / backward ─────────────────────────────────────────────

def test_forward_shapes():
    """Single inputs and batches give matching outputs."""
    p = _net()
    y, _ = forward(p, np.zeros(5))
    assert y.shape == (3,)
    y, cache = forward(p, np.zeros((4, 5)))
    assert y.shape == (4, 3)
    assert cache.batched
    assert np.allclose(predict(p, np.ones(5)), forward(p, np.ones((1, 5)))[0][0])


def test_forward_rejects_wrong_input():
    """Input width must match the first layer."""
    with pytest.raises(ValueError):
        forward(_net(), np.zeros(4))


def test_layer_validation():
    """Unknown activations, mismatched shapes and empty networks are rejected."""
    with pytest.raises(ValueError):
        Layer(weights=np.zeros((2, 3)), bias=np.zeros(2), activation="sigmoid")
    with pytest.raises(ValueError):
        Layer(weights=np.zeros((2, 3)), bias=np.zeros(3), activation="tanh")
    with pytest.raises(ValueError):
        MlpParams([])


def test_init_bounds():
    """Hidden layers use fan-in bounds; the output layer uses final_scale."""
    rng = np.random.default_rng(1)
    p = init_mlp([16, 64, 2], ["tanh", "tanh"], rng, final_scale=3e-3)
    assert np.all(np.abs(p.layers[0].weights) <= 1.0 / 4.0)
    assert np.all(np.abs(p.layers[0].bias) <= 1.0 / 4.0)
    assert np.all(np.abs(p.layers[1].weights) <= 3e-3)
    assert np.all(np.abs(p.layers[1].bias) <= 3e-3)
    with pytest.raises(ValueError):
        init_mlp([3, 2], ["tanh", "tanh"], rng)


@pytest.mark.parametrize("acts", [("tanh", "tanh"), ("relu", "linear"), ("tanh", "linear")])
def test_backward_matches_finite_differences(acts):
    """Backprop agrees with numeric gradients for each activation mix."""
    p = _net(seed=3, acts=acts)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 5))
    y, cache = forward(p, x)
    upstream = rng.normal(size=y.shape)
    grads, _ = backward(p, cache, upstream)
    numeric = numeric_gradients(p, x, upstream)
    for a, n in zip(grads.arrays(), numeric):
        assert np.allclose(a, n, rtol=1e-6, atol=1e-9)


def test_backward_input_gradient():
    """Input gradients agree with central differences."""
    p = _net(seed=5)
    x = np.random.default_rng(6).normal(size=5)
    y, cache = forward(p, x)
    upstream = np.array([1.0, -0.5, 2.0])
    _, dx = backward(p, cache, upstream)
    h = 1e-6
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        num = (upstream @ predict(p, x + e) - upstream @ predict(p, x - e)) / (2 * h)
        assert abs(dx[k] - num) < 1e-7


def test_backward_rejects_wrong_upstream():
    """Upstream gradient must match the output shape."""
    p = _net()
    _, cache = forward(p, np.zeros((2, 5)))
    with pytest.raises(ValueError):
        backward(p, cache, np.zeros((2, 2)))


# ── Gradient check ─────────────────────────────────────────────────

def test_relative_errors_skip_negligible():
    """Entries where both gradients are negligible are skipped."""
    errs, skipped = relative_errors(np.array([1.0, 0.0, 1e-10]), np.array([1.0 + 1e-6, 0.0, 0.0]))
    assert skipped == 2
    assert errs.shape == (1,)
    assert abs(errs[0] - 1e-6 / (1.0 + 1e-6)) < 1e-15


def test_check_network_passes():
    """A random network passes its own gradient check."""
    report = check_network(_net(seed=8), np.ones((2, 5)), np.random.default_rng(0))
    assert report.n_checked > 0
    assert report.passed()


def test_run_gradcheck_production_shape():
    """Actor and critic at production width pass the check."""
    reports = run_gradcheck(9, n_nets=2)
    assert set(reports) == {"actor", "critic"}
    assert all(r.passed(1e-4) for r in reports.values())
    with pytest.raises(ValueError):
        run_gradcheck(9, n_nets=0)


# ── Adam ───────────────────────────────────────────────────────────

def test_adam_descends_quadratic():
    """Adam shrinks a quadratic, first step equal to the learning rate."""
    p = _scalar_net(1.0)
    state = AdamState.for_params(p)
    values = [1.0]
    for _ in range(5):
        w = p.layers[0].weights[0, 0]
        p = adam_step(p, GradientSet([np.array([[2.0 * w]])], [np.zeros(1)]), state, 0.1)
        values.append(abs(p.layers[0].weights[0, 0]))
    assert all(b < a for a, b in zip(values, values[1:]))
    # first bias-corrected step moves by the learning rate
    assert abs(values[1] - 0.9) < 1e-6
    assert state.t == 5


def test_adam_rejects_non_finite_gradient():
    """NaN gradients raise divergence."""
    p = _scalar_net(1.0)
    state = AdamState.for_params(p)
    with pytest.raises(TrainingDivergenceError):
        adam_step(p, GradientSet([np.array([[np.nan]])], [np.zeros(1)]), state, 0.1)


def test_adam_rejects_shape_mismatch():
    """Gradients must match the parameter shapes."""
    p = _scalar_net(1.0)
    with pytest.raises(ValueError):
        adam_step(p, GradientSet.zeros_like(_net()), AdamState.for_params(p), 0.1)


# ── Soft update ────────────────────────────────────────────────────

def test_soft_update_formula():
    """Targets move a fraction eta toward the online network."""
    target, online = _net(seed=1), _net(seed=2)
    mixed = soft_update(target, online, 0.25)
    for t, o, m in zip(target.layers, online.layers, mixed.layers):
        assert np.allclose(m.weights, 0.25 * o.weights + 0.75 * t.weights)
        assert np.allclose(m.bias, 0.25 * o.bias + 0.75 * t.bias)
    same = soft_update(target, online, 1.0)
    assert np.array_equal(same.layers[0].weights, online.layers[0].weights)


def test_soft_update_eta_range():
    """eta outside [0, 1] or mismatched shapes are rejected."""
    with pytest.raises(ValueError):
        soft_update(_net(), _net(), 1.5)
    with pytest.raises(ValueError):
        soft_update(_net(), _net(sizes=(5, 4, 3)), 0.5)


# ── Checkpoints ────────────────────────────────────────────────────

def test_checkpoint_is_exact(tmp_path):
    """Checkpoints restore weights bit for bit."""
    p = _net(seed=9, acts=("relu", "linear"))
    path = tmp_path / "net.json"
    save_mlp(p, path)
    back = load_mlp(path)
    for a, b in zip(p.arrays(), back.arrays()):
        assert np.array_equal(a, b)
    assert [l.activation for l in back.layers] == ["relu", "linear"]


@pytest.mark.parametrize(
    "patch",
    [
        {"format": "other"},
        {"version": 2},
        {"layers": []},
    ],
)
def test_checkpoint_rejects_bad_documents(tmp_path, patch):
    """Wrong format, version or empty layer list is a config error."""
    path = tmp_path / "net.json"
    save_mlp(_net(), path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc.update(patch)
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_mlp(path)


def test_checkpoint_rejects_broken_chain(tmp_path):
    """Layers whose shapes do not chain are rejected."""
    path = tmp_path / "net.json"
    save_mlp(_net(), path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["layers"] = [doc["layers"][1], doc["layers"][0]]
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_mlp(path)
