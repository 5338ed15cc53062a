import numpy as np
import pytest

from early.nets import (AdamState, Mlp, adam_init, adam_step, grad_check,
                        load_checkpoint, mlp_backward, mlp_forward, mlp_init,
                        param_count, save_checkpoint)

from conftest import make_rng


def reference_forward(mlp, x):
    """Independent straightforward evaluator: explicit loops, no matmul."""
    a = [float(v) for v in x]
    last = len(mlp.layers) - 1
    for li, (w, b) in enumerate(mlp.layers):
        out = []
        for o in range(w.shape[0]):
            s = float(b[o])
            for i in range(w.shape[1]):
                s += float(w[o, i]) * a[i]
            out.append(s if li == last else max(s, 0.0))
        a = out
    return np.array(a)


# ---------------------------------------------------------------------------
# forward


def test_zero_net_gives_zero_output():
    mlp = Mlp((3, 4, 2), np.zeros(param_count((3, 4, 2))))
    out, _ = mlp_forward(mlp, np.array([1.0, -2.0, 3.0]))
    assert np.all(out == 0.0)


def test_single_linear_layer():
    mlp = Mlp((1, 1), np.array([2.0, 1.0]))  # W=[[2]], b=[1]
    out, _ = mlp_forward(mlp, np.array([3.0]))
    assert out == pytest.approx([7.0])


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_reference(seed):
    rng = make_rng(seed)
    mlp = mlp_init((5, 7, 6, 3), rng)
    x = rng.normal(size=5)
    out, _ = mlp_forward(mlp, x)
    assert np.allclose(out, reference_forward(mlp, x), rtol=1e-12, atol=1e-12)


def test_forward_batch_matches_single():
    rng = make_rng(9)
    mlp = mlp_init((4, 8, 2), rng)
    xs = rng.normal(size=(6, 4))
    batch_out, _ = mlp_forward(mlp, xs)
    for i in range(6):
        single, _ = mlp_forward(mlp, xs[i])
        assert np.allclose(batch_out[i], single, rtol=1e-12)


def test_forward_dimension_mismatch():
    mlp = mlp_init((4, 8, 2), make_rng(0))
    with pytest.raises(ValueError, match="input width"):
        mlp_forward(mlp, np.zeros(3))


def test_forward_is_pure():
    rng = make_rng(2)
    mlp = mlp_init((3, 5, 2), rng)
    x = rng.normal(size=3)
    before = mlp.theta.copy()
    a, _ = mlp_forward(mlp, x)
    b, _ = mlp_forward(mlp, x)
    assert np.array_equal(a, b)
    assert np.array_equal(mlp.theta, before)


# ---------------------------------------------------------------------------
# backward


def test_linear_layer_gradients():
    mlp = Mlp((2, 1), np.array([0.5, -0.5, 0.2]))  # W=[[0.5,-0.5]], b=[0.2]
    x = np.array([3.0, 4.0])
    _, cache = mlp_forward(mlp, x)
    grad, gin = mlp_backward(mlp, cache, np.array([1.0]))
    assert grad == pytest.approx([3.0, 4.0, 1.0])  # dW = x, db = 1
    assert gin == pytest.approx([0.5, -0.5])


def test_dead_rectifier_blocks_gradient():
    # single hidden unit with a negative pre-activation
    theta = np.array([1.0, -2.0, 3.0, 0.0])  # W1=[[1]], b1=[-2], W2=[[3]], b2=[0]
    mlp = Mlp((1, 1, 1), theta)
    _, cache = mlp_forward(mlp, np.array([1.0]))  # pre-act = -1 -> dead
    grad, gin = mlp_backward(mlp, cache, np.array([1.0]))
    gw1, gb1 = grad[0], grad[1]
    assert gw1 == 0.0 and gb1 == 0.0
    assert gin == pytest.approx([0.0])


@pytest.mark.parametrize("seed", range(6))
def test_backward_matches_finite_differences(seed):
    rng = make_rng(seed)
    mlp = mlp_init((4, 6, 5, 2), rng)
    xs = rng.normal(size=(3, 4))
    gout = rng.normal(size=(3, 2))

    def f(theta):
        m = mlp.with_theta(theta)
        out, cache = mlp_forward(m, xs)
        grad, _ = mlp_backward(m, cache, gout)
        return float(np.sum(out * gout)), grad

    report = grad_check(f, mlp.theta, tolerance=1e-4, h=1e-5)
    assert report.passed, report


def test_backward_input_gradient_matches_fd():
    rng = make_rng(42)
    mlp = mlp_init((3, 8, 1), rng)
    x = rng.normal(size=3)
    _, cache = mlp_forward(mlp, x)
    _, gin = mlp_backward(mlp, cache, np.array([1.0]))
    h = 1e-6
    for i in range(3):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (mlp_forward(mlp, xp)[0][0] - mlp_forward(mlp, xm)[0][0]) / (2 * h)
        assert gin[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_backward_shape_mismatch():
    mlp = mlp_init((3, 4, 2), make_rng(0))
    _, cache = mlp_forward(mlp, np.zeros((5, 3)))
    with pytest.raises(ValueError, match="output_gradient"):
        mlp_backward(mlp, cache, np.zeros((5, 3)))


# ---------------------------------------------------------------------------
# adam


def test_adam_first_step_delta():
    theta = np.array([1.0])
    state = adam_init(1)
    new_theta, new_state = adam_step(theta, np.array([1.0]), state, lr=0.001)
    assert new_theta[0] == pytest.approx(1.0 - 0.001, abs=1e-9)
    assert new_state.t == 1
    assert state.t == 0  # functional: input state untouched


def test_adam_zero_gradient_is_identity():
    rng = make_rng(1)
    theta = rng.normal(size=10)
    state = adam_init(10)
    new_theta, new_state = adam_step(theta, np.zeros(10), state, lr=0.01)
    assert np.array_equal(new_theta, theta)
    assert new_state.t == 1


def test_adam_two_steps_match_hand_recurrence():
    g = 0.75
    lr = 0.01
    b1, b2, eps = 0.9, 0.999, 1e-8
    # scalar recurrence computed independently
    m = v = 0.0
    w_ref = 2.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w_ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)

    theta = np.array([2.0])
    state = adam_init(1)
    for _ in range(2):
        theta, state = adam_step(theta, np.array([g]), state, lr=lr)
    assert theta[0] == pytest.approx(w_ref, abs=1e-15)


def test_adam_rejects_bad_lr():
    with pytest.raises(ValueError):
        adam_step(np.zeros(1), np.zeros(1), adam_init(1), lr=0.0)


# ---------------------------------------------------------------------------
# grad_check itself


def test_grad_check_passes_on_quadratic():
    def f(w):
        return float(w[0] ** 2), np.array([2.0 * w[0]])

    report = grad_check(f, np.array([3.0]), tolerance=1e-4)
    assert report.passed
    assert report.analytic_at_worst == pytest.approx(6.0)
    assert report.numeric_at_worst == pytest.approx(6.0, rel=1e-6)


def test_grad_check_catches_corrupted_gradient():
    def f(w):
        return float(np.sum(w ** 2)), 2.0 * w + 0.05

    report = grad_check(f, np.arange(4.0), tolerance=1e-4)
    assert not report.passed


def test_grad_check_subsampling():
    rng = make_rng(0)
    theta = rng.normal(size=100)

    def f(w):
        return float(np.sum(w ** 3)), 3.0 * w ** 2

    report = grad_check(f, theta, tolerance=1e-4, max_coords=20, rng=make_rng(1))
    assert report.n_coords == 20
    assert report.passed


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    rng = make_rng(3)
    net = mlp_init((4, 8, 2), rng)
    state = adam_init(net.theta.size)
    state.m[:] = rng.normal(size=state.m.size)
    state = AdamState(m=state.m, v=state.v + 1.0, t=17)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, {"net": net}, adam={"net": state},
                    meta={"note": "x", "n": 3})
    nets, adam, meta = load_checkpoint(path)
    assert nets["net"].sizes == net.sizes
    assert np.array_equal(nets["net"].theta, net.theta)
    assert adam["net"].t == 17
    assert np.array_equal(adam["net"].m, state.m)
    assert meta == {"note": "x", "n": 3}


def test_checkpoint_rejects_future_version(tmp_path):
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, {"net": mlp_init((2, 2), make_rng(0))})
    import numpy as _np
    data = dict(_np.load(path, allow_pickle=False))
    data["version"] = _np.array(99)
    with open(path, "wb") as fh:
        _np.savez(fh, **data)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)
