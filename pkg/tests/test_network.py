import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srad.core import RngHandle
from srad.network import (
    AdamState,
    CheckpointError,
    Gradients,
    Model,
    ShapeMismatch,
    adam_step,
    backward,
    forward,
    init_adam,
    init_model,
    load_checkpoint,
    save_checkpoint,
    zero_model,
)

from conftest import central_difference, max_relative_error


def test_init_is_deterministic_and_shaped():
    a = init_model(4, 8, 0.5, RngHandle(3))
    b = init_model(4, 8, 0.5, RngHandle(3))
    assert a.W1.shape == (4, 8) and a.W2.shape == (8, 1)
    assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)
    assert np.all(a.b1 == 0) and np.all(a.b2 == 0)
    lim = np.sqrt(6 / 12)
    assert np.all(np.abs(a.W1) <= lim)


@pytest.mark.parametrize("d,h,p", [(0, 3, 0.0), (3, 0, 0.0), (3, 3, 1.0)])
def test_init_rejects_bad_args(d, h, p):
    with pytest.raises(ValueError):
        init_model(d, h, p, RngHandle(0))


def test_zero_model_scores_half():
    out = forward(zero_model(3, 5), np.random.default_rng(0).normal(size=(4, 3)))
    assert np.all(out.scores == 0.5)


def test_negative_row_is_gated_by_relu():
    model = Model(np.eye(3), np.zeros(3), np.ones((3, 1)), np.zeros(1))
    out = forward(model, np.array([[-1.0, -2.0, -0.5], [1.0, -1.0, 2.0]]))
    assert np.all(out.Z1[0] < 0) and np.all(out.R[0] == 0)
    assert np.array_equal(out.R[1], [1.0, 0.0, 2.0])


def test_no_dropout_train_equals_infer():
    model = init_model(3, 6, 0.0, RngHandle(1))
    x = np.random.default_rng(2).normal(size=(5, 3))
    a = forward(model, x, RngHandle(9), train=True)
    b = forward(model, x)
    assert np.array_equal(a.scores, b.scores)


def test_dimension_mismatch():
    with pytest.raises(ShapeMismatch):
        forward(zero_model(3, 2), np.zeros((2, 4)))


def test_dropout_keeps_expectation():
    """Mean of A1 over 10^4 masks stays within 3 sigma of R."""
    p = 0.4
    model = init_model(3, 6, p, RngHandle(5))
    x = np.abs(np.random.default_rng(1).normal(size=(2, 3)))
    n = 10_000
    acc = np.zeros((2, 6))
    for i in range(n):
        acc += forward(model, x, RngHandle(i), train=True).A1
    R = forward(model, x).R
    mean = acc / n
    # per-entry std of one masked value: R * sqrt(p / (1 - p))
    sigma = R * np.sqrt(p / (1 - p)) / np.sqrt(n)
    assert np.all(np.abs(mean - R) <= 3 * sigma + 1e-12)


def test_dropout_mask_values():
    model = init_model(4, 50, 0.5, RngHandle(0))
    c = forward(model, np.ones((3, 4)), RngHandle(1), train=True)
    assert set(np.unique(c.mask)) <= {0.0, 2.0}


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-1e3, 1e3)), st.integers(0, 1000))
def test_scores_strictly_inside_unit_interval(x, seed):
    model = init_model(3, 5, 0.0, RngHandle(seed))
    model = Model(model.W1 * 50, model.b1, model.W2 * 50, model.b2)
    s = forward(model, x).scores
    assert np.all(np.isfinite(s)) and np.all(s > 0) and np.all(s < 1)


# ---------------------------------------------------------------- backward


def test_zero_upstream_gives_zero_gradients():
    model = init_model(3, 4, 0.0, RngHandle(0))
    c = forward(model, np.ones((2, 3)))
    g = backward(model, c, np.zeros(2), np.zeros((2, 4)))
    assert all(np.all(v == 0) for v in g.as_dict().values())


def test_closed_relu_blocks_representation_gradient():
    model = Model(-np.ones((2, 3)), -np.ones(3), np.ones((3, 1)), np.zeros(1))
    c = forward(model, np.abs(np.random.default_rng(0).normal(size=(4, 2))))
    assert np.all(c.Z1 < 0)
    g = backward(model, c, np.zeros(4), np.ones((4, 3)))
    assert np.all(g.W1 == 0) and np.all(g.b1 == 0)


def test_backward_shape_errors():
    model = init_model(3, 4, 0.0, RngHandle(0))
    c = forward(model, np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        backward(model, c, np.zeros(3))
    with pytest.raises(ShapeMismatch):
        backward(model, c, np.zeros(2), np.zeros((2, 5)))
    with pytest.raises(ShapeMismatch):
        backward(init_model(3, 5, 0.0, RngHandle(0)), c, np.zeros(2))


def _fd_case(seed, dropout=0.0):
    rng = np.random.default_rng(seed)
    model = init_model(3, 5, dropout, RngHandle(seed))
    model = Model(model.W1, rng.normal(size=5) * 0.3, model.W2, rng.normal(size=1), dropout)
    x = rng.normal(size=(4, 3))
    ws = rng.normal(size=4)  # loss = ws . scores + sum(wr * R)
    wr = rng.normal(size=(4, 5))
    return model, x, ws, wr


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(seed):
    model, x, ws, wr = _fd_case(seed)
    cache = forward(model, x)
    g = backward(model, cache, ws, wr)

    def loss(params):
        c = forward(model.with_params(params), x)
        return float(ws @ c.scores + np.sum(wr * c.R))

    num = central_difference(loss, {k: v.copy() for k, v in model.params().items()})
    assert max_relative_error(g.as_dict(), num) < 1e-4


def test_backward_honours_stored_dropout_mask():
    model, x, ws, _ = _fd_case(7, dropout=0.5)
    cache = forward(model, x, RngHandle(3), train=True)
    g = backward(model, cache, ws)

    def loss(params):
        m = model.with_params(params)
        z1 = x @ m.W1 + m.b1
        a1 = np.maximum(z1, 0) * cache.mask
        s = 1 / (1 + np.exp(-(a1 @ m.W2[:, 0] + m.b2[0])))
        return float(ws @ s)

    num = central_difference(loss, {k: v.copy() for k, v in model.params().items()})
    assert max_relative_error(g.as_dict(), num) < 1e-4


# ---------------------------------------------------------------- Adam


def _scalar_model(w):
    return Model(np.array([[w]]), np.zeros(1), np.zeros((1, 1)), np.zeros(1))


def test_adam_first_step_moves_by_learning_rate():
    model = _scalar_model(1.0)
    state = init_adam(model, learning_rate=1e-3)
    grads = Gradients(np.ones((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    new, st1 = adam_step(model, grads, state)
    # m=0.1, v=0.001, m_hat=1, v_hat=1 -> step lr * 1 / (1 + eps)
    assert new.W1[0, 0] == pytest.approx(1.0 - 1e-3 / (1.0 + 1e-8), abs=1e-15)
    assert st1.t == 1
    assert st1.m["W1"][0, 0] == pytest.approx(0.1)
    assert st1.v["W1"][0, 0] == pytest.approx(0.001)


def test_adam_zero_gradient_leaves_params_and_decays_moments():
    model = _scalar_model(2.0)
    state = AdamState(1e-3, 0.9, 0.999, 1e-8, 3,
                      {"W1": np.array([[0.5]]), "b1": np.zeros(1), "W2": np.zeros((1, 1)), "b2": np.zeros(1)},
                      {"W1": np.array([[0.2]]), "b1": np.zeros(1), "W2": np.zeros((1, 1)), "b2": np.zeros(1)})
    zero = Gradients(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    new, st1 = adam_step(_scalar_model(2.0), zero, state)
    # zero gradient but non-zero first moment still moves the weight; only biases with m=0 stay
    assert np.all(new.b1 == model.b1) and np.all(new.b2 == model.b2)
    assert st1.m["W1"][0, 0] == pytest.approx(0.45)
    assert st1.v["W1"][0, 0] == pytest.approx(0.1998)

    fresh = init_adam(model, 1e-3)
    same, _ = adam_step(model, zero, fresh)
    assert all(np.array_equal(a, b) for a, b in zip(same.params().values(), model.params().values()))


def test_adam_is_deterministic():
    model = init_model(3, 4, 0.0, RngHandle(0))
    g = backward(model, forward(model, np.ones((2, 3))), np.ones(2))
    s = init_adam(model, 1e-2)
    a, sa = adam_step(model, g, s)
    b, sb = adam_step(model, g, s)
    assert all(np.array_equal(x, y) for x, y in zip(a.params().values(), b.params().values()))
    assert sa.t == sb.t == 1


def test_adam_shape_mismatch():
    model = init_model(3, 4, 0.0, RngHandle(0))
    bad = Gradients(np.zeros((2, 4)), np.zeros(4), np.zeros((4, 1)), np.zeros(1))
    with pytest.raises(ShapeMismatch):
        adam_step(model, bad, init_adam(model))


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = init_model(5, 7, 0.3, RngHandle(4))
    g = backward(model, forward(model, np.ones((3, 5))), np.ones(3))
    model, state = adam_step(model, g, init_adam(model, 1e-3))
    save_checkpoint(tmp_path / "m.srck", model, state)
    m2, s2 = load_checkpoint(tmp_path / "m.srck")
    for a, b in zip(model.params().values(), m2.params().values()):
        assert a.tobytes() == b.tobytes()
    for n in state.m:
        assert state.m[n].tobytes() == s2.m[n].tobytes()
        assert state.v[n].tobytes() == s2.v[n].tobytes()
    assert (s2.t, s2.learning_rate, m2.dropout_rate) == (1, 1e-3, 0.3)
    save_checkpoint(tmp_path / "again.srck", m2, s2)
    assert (tmp_path / "m.srck").read_bytes() == (tmp_path / "again.srck").read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad.srck").write_bytes(b"XXXX" + bytes(60))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.srck")
    save_checkpoint(tmp_path / "ok.srck", zero_model(2, 2))
    raw = (tmp_path / "ok.srck").read_bytes()
    (tmp_path / "short.srck").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "short.srck")
