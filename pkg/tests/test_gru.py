import numpy as np
import pytest

from oracles import gru_step_scalar, max_rel_error, numeric_grad
from tonerec.nn.gru import GruCell, bigru_backward, bigru_forward, gru_backward, gru_forward


def random_cell(rng, D, H, scale=0.5):
    return GruCell(rng.normal(scale=scale, size=(D, 3 * H)),
                   rng.normal(scale=scale, size=(H, 3 * H)),
                   rng.normal(scale=scale, size=3 * H))


def test_zero_cell_stays_at_zero():
    out, (_, _, z, r, c) = gru_forward(GruCell.zeros(4, 3), np.random.default_rng(0).normal(size=(5, 4)))
    assert np.all(out == 0)
    assert np.allclose(z, 0.5) and np.allclose(r, 0.5) and np.all(c == 0)


def test_scalar_hand_value():
    # gate order in the packed matrices is [z | r | c]
    wz, wr, wc, uz, ur, uc, bz, br, bc = 0.3, -0.2, 0.9, 0.5, 0.4, -0.7, 0.1, 0.05, -0.3
    cell = GruCell(np.array([[wz, wr, wc]]), np.array([[uz, ur, uc]]), np.array([bz, br, bc]))
    x, h0 = 0.8, 0.25
    out, _ = gru_forward(cell, np.array([[x]]), h0=np.array([h0]))
    assert out[0, 0] == pytest.approx(gru_step_scalar(x, h0, wz, wr, wc, uz, ur, uc, bz, br, bc), abs=1e-15)


def test_causal():
    rng = np.random.default_rng(1)
    cell = random_cell(rng, 3, 4)
    x = rng.normal(size=(8, 3))
    y = x.copy()
    y[5:] = rng.normal(size=(3, 3))
    assert np.array_equal(gru_forward(cell, x)[0][:5], gru_forward(cell, y)[0][:5])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        gru_forward(GruCell.zeros(4, 3), np.zeros((2, 5)))
    with pytest.raises(ValueError):
        gru_forward(GruCell.zeros(4, 3), np.zeros((2, 4)), h0=np.zeros(2))


def test_gru_gradients():
    rng = np.random.default_rng(2)
    cell = random_cell(rng, 3, 4)
    x, h0, g = rng.normal(size=(6, 3)), rng.normal(size=4), rng.normal(size=(6, 4))
    f = lambda: float(np.sum(gru_forward(cell, x, h0)[0] * g))
    _, cache = gru_forward(cell, x, h0)
    dx, dh0, grads = gru_backward(cell, cache, g)
    for analytic, wrt in ((dx, x), (dh0, h0), (grads.wx, cell.wx), (grads.wh, cell.wh), (grads.b, cell.b)):
        assert max_rel_error(analytic, numeric_grad(f, wrt)) < 1e-6


def test_bigru_single_step():
    rng = np.random.default_rng(3)
    fwd, bwd = random_cell(rng, 2, 3), random_cell(rng, 2, 3)
    x = rng.normal(size=(1, 2))
    out, _ = bigru_forward(fwd, bwd, x)
    assert np.allclose(out, np.concatenate([gru_forward(fwd, x)[0], gru_forward(bwd, x)[0]], axis=1))


def test_bigru_palindrome_symmetry():
    rng = np.random.default_rng(4)
    cell = random_cell(rng, 2, 3)
    half = rng.normal(size=(3, 2))
    x = np.concatenate([half, half[::-1]])
    out, _ = bigru_forward(cell, cell, x)
    swapped = np.concatenate([out[:, 3:], out[:, :3]], axis=1)
    assert np.allclose(swapped[::-1], out, atol=1e-14)


def test_bigru_matches_composition():
    rng = np.random.default_rng(5)
    fwd, bwd = random_cell(rng, 4, 3), random_cell(rng, 4, 3)
    x = rng.normal(size=(7, 4))
    out, _ = bigru_forward(fwd, bwd, x)
    assert np.array_equal(out[:, :3], gru_forward(fwd, x)[0])
    assert np.array_equal(out[:, 3:], gru_forward(bwd, x[::-1])[0][::-1])


def test_bigru_gradients():
    rng = np.random.default_rng(6)
    fwd, bwd = random_cell(rng, 3, 2), random_cell(rng, 3, 2)
    x, g = rng.normal(size=(5, 3)), rng.normal(size=(5, 4))
    f = lambda: float(np.sum(bigru_forward(fwd, bwd, x)[0] * g))
    _, cache = bigru_forward(fwd, bwd, x)
    dx, gf, gb = bigru_backward(fwd, bwd, cache, g)
    assert max_rel_error(dx, numeric_grad(f, x)) < 1e-6
    for cell, grads in ((fwd, gf), (bwd, gb)):
        for name in ("wx", "wh", "b"):
            assert max_rel_error(getattr(grads, name), numeric_grad(f, getattr(cell, name))) < 1e-6
