import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwgf.net import NetworkParams, bias_mask, n_params, net_backprop, net_eval


def _params(H, seed, scale=0.7):
    return NetworkParams.random(H, np.random.default_rng(seed), scale, zero_bias=False)


@given(st.integers(1, 12))
def test_parameter_count(H):
    assert n_params(H) == H * H + 4 * H + 1
    assert bias_mask(H).sum() == 2 * H + 1


@given(st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
def test_flat_roundtrip(H, seed):
    theta = np.random.default_rng(seed).standard_normal(n_params(H))
    assert np.array_equal(NetworkParams.from_flat(theta, H).flatten(), theta)


def test_from_flat_rejects_wrong_length():
    with pytest.raises(ValueError, match="expected"):
        NetworkParams.from_flat(np.zeros(5), 3)


def test_zero_params_give_zero_network():
    ev = net_eval(NetworkParams.zeros(4), np.linspace(-1, 1, 7))
    assert not np.any(ev.g) and not np.any(ev.dg) and not np.any(ev.d2g)


def test_spatial_derivatives_match_finite_differences():
    p = _params(6, 0)
    w = np.linspace(-1.5, 1.5, 41)
    h = 1e-5
    ev, ep, em = net_eval(p, w), net_eval(p, w + h), net_eval(p, w - h)
    assert np.allclose(ev.dg, (ep.g - em.g) / (2 * h), rtol=1e-7, atol=1e-9)
    assert np.allclose(ev.d2g, (ep.dg - em.dg) / (2 * h), rtol=1e-7, atol=1e-9)


def test_scalar_input():
    p = _params(3, 1)
    ev = net_eval(p, 0.3)
    assert np.ndim(ev.g) == 0
    assert ev.g == pytest.approx(net_eval(p, np.array([0.3])).g[0])


def _jet_functional(p, w, c):
    ev = net_eval(p, w)
    return np.sum(c[0] * ev.g + c[1] * ev.dg + c[2] * ev.d2g)


def test_backprop_matches_finite_differences():
    H = 4
    p = _params(H, 2)
    rng = np.random.default_rng(3)
    w = rng.uniform(-1, 1, 9)
    c = rng.standard_normal((3, 9))
    ev = net_eval(p, w)
    grads, w_bar = net_backprop(ev.tape, tuple(c), return_input=True)
    theta = p.flatten()
    h = 1e-6
    fd = np.empty(theta.size)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (_jet_functional(NetworkParams.from_flat(theta + e, H), w, c)
                 - _jet_functional(NetworkParams.from_flat(theta - e, H), w, c)) / (2 * h)
    assert np.allclose(grads.sum(axis=0), fd, rtol=1e-6, atol=1e-8)
    # input adjoint: derivative of the functional with respect to each w_i
    fdw = np.array([(_jet_functional(p, w + h * np.eye(9)[i], c)
                     - _jet_functional(p, w - h * np.eye(9)[i], c)) / (2 * h) for i in range(9)])
    assert np.allclose(w_bar, fdw, rtol=1e-6, atol=1e-8)


def test_grouped_and_first_order_paths_agree():
    p = _params(5, 4)
    rng = np.random.default_rng(5)
    w = rng.uniform(-1, 1, 12)
    c0 = rng.standard_normal(12)
    ev = net_eval(p, w)
    full, wb = net_backprop(ev.tape, (c0, np.zeros(12), np.zeros(12)), return_input=True)
    fast, wb_fast = net_backprop(ev.tape, (c0, None, None), return_input=True)
    assert np.allclose(full, fast, rtol=1e-13, atol=1e-15)
    assert np.allclose(wb, wb_fast, rtol=1e-13, atol=1e-15)
    c = tuple(rng.standard_normal((3, 12)))
    rows = net_backprop(ev.tape, c)
    grouped = net_backprop(ev.tape, c, groups=3)
    assert np.allclose(grouped, rows.reshape(3, 4, -1).sum(axis=1), rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError, match="groups"):
        net_backprop(ev.tape, c, groups=5)


def test_width_mismatch_rejected():
    ev = net_eval(_params(3, 0), np.zeros(2))
    with pytest.raises(ValueError, match="H=3"):
        net_backprop(ev.tape, (np.ones(2), None, None), params=_params(4, 0))
