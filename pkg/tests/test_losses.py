import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from linstack.core import CWS, LSG, WS, LevelOneDataset
from linstack.losses import (
    InvalidCombination,
    LossKind,
    RegKind,
    group_norms,
    hinge_term,
    loss_and_grad,
    ls_term,
    prox,
    prox_weights,
    reg_value,
    risk,
    risk_subgradient,
    smoothed_hinge,
    soft_threshold,
)

vec = arrays(float, st.integers(2, 6), elements=st.floats(-5, 5))


# --- loss terms: spec examples ----------------------------------------------------------


@pytest.mark.parametrize(
    "r, y, expected",
    [([2.0, 0.0], 0, 0.0), ([0.0, 0.0, 0.0], 1, 1.0), ([0.5, 0.2, 0.9], 0, 1.4)],
)
def test_hinge_term_examples(r, y, expected):
    assert hinge_term(r, y) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("r, y, expected", [([0.0, 1.0, 0.0], 1, 0.0), ([0.0, 0.0], 0, 1.0), ([0.5, 0.5], 0, 0.5)])
def test_ls_term_examples(r, y, expected):
    assert ls_term(r, y) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("term", [hinge_term, ls_term])
def test_single_class_rejected(term):
    with pytest.raises(ValueError):
        term([1.0], 0)
    with pytest.raises(ValueError):
        term([1.0, 2.0], 2)


@given(vec, st.data())
def test_hinge_zero_iff_margin(r, data):
    y = data.draw(st.integers(0, r.size - 1))
    other = np.delete(r, y).max()
    h = hinge_term(r, y)
    assert h >= 0
    assert (h == 0) == (r[y] >= 1 + other)


@given(arrays(float, (5, 3), elements=st.floats(-3, 3)), st.floats(1e-4, 1.0))
def test_smoothed_hinge_brackets_exact(R, mu):
    y = np.arange(5) % 3
    smooth, _, exact = smoothed_hinge(R, y, mu)
    assert exact == pytest.approx(np.mean([hinge_term(r, t) for r, t in zip(R, y)]), abs=1e-12)
    assert exact - 1e-12 <= smooth <= exact + mu * np.log(3) + 1e-12


# --- regularizers ---------------------------------------------------------------------------


def test_reg_value_examples():
    assert reg_value(CWS([[3.0, 4.0]]), RegKind.GROUP) == pytest.approx(5.0)
    assert reg_value(WS([1.0, -2.0, 0.5], 2), RegKind.L1) == pytest.approx(3.5)
    for model in (WS.zeros(3, 2), CWS.zeros(3, 2), LSG.zeros(3, 2)):
        for kind in RegKind:
            if isinstance(model, WS) and kind is RegKind.GROUP:
                continue
            assert reg_value(model, kind) == 0.0


def test_group_on_ws_is_rejected():
    with pytest.raises(InvalidCombination):
        reg_value(WS([1.0], 2), RegKind.GROUP)
    with pytest.raises(InvalidCombination):
        prox_weights(np.ones(2), RegKind.GROUP, 0.1, WS)


def test_bias_excluded_from_every_regularizer():
    m = LSG(np.zeros((2, 4)), np.array([5.0, -7.0]))
    assert all(reg_value(m, k) == 0.0 for k in RegKind)
    np.testing.assert_array_equal(prox(m, RegKind.L1, 100.0).b, [5.0, -7.0])
    np.testing.assert_array_equal(prox(m, RegKind.GROUP, 100.0).b, [5.0, -7.0])


def test_l2_is_squared_norm():
    assert reg_value(CWS([[3.0, 4.0]]), RegKind.L2) == pytest.approx(25.0)


def test_lsg_group_norms_are_block_frobenius():
    rng = np.random.default_rng(0)
    m = LSG(rng.standard_normal((3, 6)), np.zeros(3))
    expect = [np.linalg.norm(m.block(k)) for k in range(2)]
    np.testing.assert_allclose(group_norms(m), expect)
    assert reg_value(m, RegKind.GROUP) == pytest.approx(sum(expect))


@given(arrays(float, (4, 3), elements=st.floats(-5, 5)))
def test_group_le_l1(V):
    assert reg_value(CWS(V), RegKind.GROUP) <= reg_value(CWS(V), RegKind.L1) + 1e-12


# --- prox ---------------------------------------------------------------------------------


def test_prox_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    np.testing.assert_array_equal(prox_weights(np.array([[3.0, 4.0]]), RegKind.GROUP, 5.0, CWS), [[0, 0]])
    np.testing.assert_allclose(prox_weights(np.array([[3.0, 4.0]]), RegKind.GROUP, 2.5, CWS), [[1.5, 2.0]])


def test_prox_argument_checks():
    with pytest.raises(ValueError):
        prox_weights(np.ones((1, 2)), RegKind.L1, -0.1, CWS)
    with pytest.raises(ValueError):
        prox_weights(np.ones((1, 2)), RegKind.L2, 0.1, CWS)


def test_zero_group_stays_zero():
    out = prox_weights(np.zeros((2, 3)), RegKind.GROUP, 0.5, CWS)
    assert np.all(out == 0) and np.all(np.isfinite(out))


@given(arrays(float, (3, 2), elements=st.floats(-4, 4)), st.floats(0, 3))
def test_group_prox_all_or_nothing(V, t):
    out = prox_weights(V, RegKind.GROUP, t, CWS)
    for row, src in zip(out, V):
        assert np.all(row == 0) or np.all((row != 0) == (src != 0))


@given(arrays(float, 2, elements=st.floats(-4, 4)), st.floats(0, 3))
@settings(max_examples=60)
def test_group_prox_beats_perturbations(z, t):
    """The prox output minimizes 0.5*|x - z|^2 + t*|x| among nearby points."""
    x = prox_weights(z[None], RegKind.GROUP, t, CWS)[0]
    obj = lambda v: 0.5 * np.sum((v - z) ** 2) + t * np.linalg.norm(v)  # noqa: E731
    rng = np.random.default_rng(0)
    for d in rng.standard_normal((50, 2)) * 1e-3:
        assert obj(x) <= obj(x + d) + 1e-12


# --- subgradients ---------------------------------------------------------------------------


def test_subgradient_single_instance_example():
    data = LevelOneDataset(np.array([[[0.6, 0.4]]]), [0], 2)
    g = risk_subgradient(WS.zeros(1, 2), data, LossKind.HINGE)
    np.testing.assert_allclose(g.u, [-0.2])


def test_separated_data_has_zero_subgradient():
    F = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    data = LevelOneDataset(F, [0, 1], 2)
    g = risk_subgradient(WS(np.array([3.0]), 2), data, LossKind.HINGE)
    assert np.all(g.u == 0)


def test_ls_gradient_zero_at_exact_fit():
    F = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    data = LevelOneDataset(F, [0, 1], 2)
    model = WS(np.array([1.0]), 2)
    assert risk(model, data, LossKind.LEAST_SQUARES) == 0.0
    assert np.all(risk_subgradient(model, data, LossKind.LEAST_SQUARES).u == 0)


def test_hinge_tie_uses_lowest_wrong_class():
    R = np.array([[0.0, 0.5, 0.5]])
    _, G = loss_and_grad(R, np.array([0]), LossKind.HINGE)
    np.testing.assert_array_equal(G, [[-1.0, 1.0, 0.0]])


@st.composite
def model_and_data(draw):
    variant = draw(st.sampled_from([WS, CWS, LSG]))
    M, N, I = draw(st.integers(1, 3)), draw(st.integers(2, 4)), draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    F = rng.dirichlet(np.ones(N), size=(I, M))
    y = rng.integers(0, N, I)
    zeros = variant.zeros(M, N)
    model = variant.from_params(tuple(rng.standard_normal(p.shape) for p in zeros.params), N)
    direction = tuple(rng.standard_normal(p.shape) for p in zeros.params)
    return model, LevelOneDataset(F, y, N), direction


@given(model_and_data(), st.sampled_from(list(LossKind)))
@settings(max_examples=100, deadline=None)
def test_subgradient_inequality(case, loss):
    model, data, d = case
    g = risk_subgradient(model, data, loss)
    gd = sum(float(np.vdot(a, b)) for a, b in zip(g.params, d))
    base = risk(model, data, loss)
    for eps in (1e-4, 1e-3):
        moved = model.from_params(tuple(p + eps * q for p, q in zip(model.params, d)), model.n_count)
        assert risk(moved, data, loss) >= base + eps * gd - 1e-8


@given(model_and_data())
@settings(max_examples=60, deadline=None)
def test_ls_gradient_matches_finite_differences(case):
    model, data, d = case
    g = risk_subgradient(model, data, LossKind.LEAST_SQUARES)
    h = 1e-6

    def at(s):
        return risk(
            model.from_params(tuple(p + s * q for p, q in zip(model.params, d)), model.n_count),
            data,
            LossKind.LEAST_SQUARES,
        )

    fd = (at(h) - at(-h)) / (2 * h)
    an = sum(float(np.vdot(a, b)) for a, b in zip(g.params, d))
    assert fd == pytest.approx(an, rel=1e-5, abs=1e-7)
