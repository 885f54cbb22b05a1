import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bochnerlab.errors import DimensionMismatchError, MetricDefinitenessError
from bochnerlab.fields import (
    MetricField,
    MetricKind,
    Normalization,
    SlicingScene,
    comass,
    eval_metric,
    make_scene,
    metric_from_dict,
    metric_to_dict,
    random_scene,
    scene_from_json,
    scene_to_json,
)
from bochnerlab.jetcalc import Coordinate, Polynomial, TrigPolynomial, jet_eval
from bochnerlab.slicing import slicing


def zero_derivatives(j):
    return not (j.grad.any() or j.hess.any() or j.cubic.any())


def test_flat_metric_is_identity():
    mj = eval_metric(MetricField.flat(4), np.array([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_array_equal(mj.g.value, np.eye(4))
    np.testing.assert_array_equal(mj.ginv.value, np.eye(4))
    assert zero_derivatives(mj.g) and zero_derivatives(mj.ginv)


def test_conformal_zero_factor_is_identity():
    phi = TrigPolynomial(3, (((1, 0, 0), 0.0, 0.0),))
    mj = eval_metric(MetricField.conformal(phi), (0.3, -0.2, 1.0))
    np.testing.assert_array_equal(mj.g.value, np.eye(3))
    assert zero_derivatives(mj.g)


def test_conformal_constant_factor():
    c = 0.4
    phi = Polynomial(3, (((0, 0, 0), c),))
    mj = eval_metric(MetricField.conformal(phi), (0.0, 0.0, 0.0))
    np.testing.assert_allclose(mj.g.value, np.exp(2 * c) * np.eye(3), rtol=1e-15)
    assert zero_derivatives(mj.g)


def test_warped_metric_is_diagonal_square():
    w = [Polynomial(2, (((0, 0), 1.0), ((1, 0), 0.5))), Polynomial(2, (((0, 0), 2.0),))]
    mj = eval_metric(MetricField.warped(w), (0.4, 0.0))
    np.testing.assert_allclose(mj.g.value, np.diag([1.2 ** 2, 4.0]))
    np.testing.assert_allclose(mj.g.grad[0, 0], [2 * 1.2 * 0.5, 0.0])


def _random_h(rng, n, amplitude=1.0):
    h = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            modes = tuple((tuple(int(k) for k in rng.integers(-2, 3, n)), float(rng.uniform(-1, 1)),
                           float(rng.uniform(-1, 1))) for _ in range(3))
            h[i][j] = h[j][i] = TrigPolynomial(n, modes)
    return h


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
@settings(max_examples=40, deadline=None)
def test_inverse_jet_product_is_identity(seed, n):
    rng = np.random.default_rng(seed)
    metric = MetricField.perturbed(_random_h(rng, n), 0.1 / 3)
    mj = eval_metric(metric, rng.uniform(-np.pi, np.pi, n))
    prod = (mj.g.expand(-1) * mj.ginv.expand(-3)).sum(-2)
    eye = np.eye(n)
    np.testing.assert_allclose(prod.value, eye, atol=1e-11)
    for comp in (prod.grad, prod.hess, prod.cubic):
        np.testing.assert_allclose(comp, 0.0, atol=1e-11)
    np.testing.assert_array_equal(mj.g.value, np.swapaxes(mj.g.value, -1, -2))
    np.testing.assert_array_equal(mj.ginv.cubic, np.swapaxes(mj.ginv.cubic, 0, 1))


def test_perturbation_losing_definiteness_is_rejected():
    one = Polynomial(2, (((0, 0), 1.0),))
    zero = Polynomial(2, (((0, 0), 0.0),))
    metric = MetricField.perturbed([[one, zero], [zero, zero]], -2.0)  # g_00 = -1
    with pytest.raises(MetricDefinitenessError) as info:
        eval_metric(metric, (0.0, 0.0))
    assert info.value.smallest_minor == pytest.approx(-1.0)


def test_asymmetric_perturbation_is_rejected():
    a, b = Coordinate(0, 2), Coordinate(1, 2)
    with pytest.raises(ValueError):
        MetricField.perturbed([[a, a], [b, a]], 0.1)


def test_metric_point_dimension_checked():
    with pytest.raises(DimensionMismatchError):
        eval_metric(MetricField.flat(3), (0.0, 0.0))


def test_random_scene_flat_construction():
    metric, us, p = random_scene(1, 3, 2, MetricKind.FLAT)
    assert metric.kind is MetricKind.FLAT and len(us) == 2
    mj = eval_metric(metric, p, 0)
    jets = [jet_eval(u, p, 1) for u in us]
    du = np.array([j.grad for j in jets])
    # linear parts are x0 and x1; the quadratic and cubic corrections are small
    assert np.max(np.abs(du - np.eye(3)[:2])) < 0.5
    assert comass(du @ mj.ginv.value @ du.T) > 0.5


def test_random_scene_deterministic():
    for kind in MetricKind:
        assert random_scene(42, 4, 2, kind) == random_scene(42, 4, 2, kind)
    assert random_scene(1, 4, 2) != random_scene(2, 4, 2)


def test_hundred_perturbed_scenes_generate():
    for seed in range(100):
        metric, us, p = random_scene(seed, 4, 3, MetricKind.PERTURBED)
        mj = eval_metric(metric, p, 0)
        gram = np.array([[jet_eval(a, p, 1).grad @ mj.ginv.value @ jet_eval(b, p, 1).grad for b in us] for a in us])
        assert comass(gram) > 0.5


def test_random_scene_argument_checks():
    with pytest.raises(ValueError):
        random_scene(0, 3, 3)
    with pytest.raises(ValueError):
        random_scene(0, 7, 2)


def test_scene_validation():
    metric = MetricField.flat(3)
    with pytest.raises(ValueError):
        SlicingScene(3, 2, metric, (Coordinate(0, 3),), (0.0, 0.0, 0.0))
    with pytest.raises(DimensionMismatchError):
        SlicingScene(3, 1, metric, (Coordinate(0, 2),), (0.0, 0.0, 0.0))


@pytest.mark.parametrize("kind", list(MetricKind))
@pytest.mark.parametrize("normalization", list(Normalization))
def test_scene_json_roundtrip_is_bit_exact(kind, normalization):
    scene = make_scene(9, 4, 2, kind, normalization)
    text = scene_to_json(scene)
    back = scene_from_json(text)
    assert back == scene
    assert scene_to_json(back) == text
    np.testing.assert_array_equal(slicing(back).div_values(), slicing(scene).div_values())


def test_metric_dict_roundtrip():
    for kind in MetricKind:
        metric = make_scene(3, 3, 1, kind).g
        assert metric_from_dict(metric_to_dict(metric)) == metric
