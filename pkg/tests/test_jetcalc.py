import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bochnerlab.errors import DimensionMismatchError, InsufficientOrderError, SingularJetError
from bochnerlab.jetcalc import (
    Coordinate,
    Jet,
    Polynomial,
    Product,
    Scale,
    Sum,
    TrigPolynomial,
    field_from_dict,
    field_to_dict,
    field_value,
    jet_arith,
    jet_eval,
    jet_fd_crosscheck,
    jet_unary,
)


def random_trig(rng, dim, n_modes=3):
    modes = []
    for _ in range(n_modes):
        k = rng.integers(-2, 3, size=dim)
        modes.append((tuple(int(x) for x in k), float(rng.normal()), float(rng.normal())))
    return TrigPolynomial(dim, tuple(modes), float(rng.normal()))


def random_poly(rng, dim, n_terms=6):
    terms = []
    for _ in range(n_terms):
        e = np.zeros(dim, dtype=int)
        for i in rng.integers(0, dim, size=rng.integers(0, 5)):
            e[i] += 1
        terms.append((tuple(int(x) for x in e), float(rng.normal())))
    return Polynomial(dim, tuple(terms))


def random_jet(rng, dim, order=3):
    """Jet of a random polynomial, so every derivative slot is populated and symmetric."""
    return jet_eval(random_poly(rng, dim, 10), rng.uniform(-1, 1, dim), order)


def assert_symmetric(j):
    axes = j.hess.ndim
    np.testing.assert_array_equal(j.hess, np.swapaxes(j.hess, axes - 1, axes - 2))
    for perm in itertools.permutations(range(3)):
        np.testing.assert_array_equal(j.cubic, np.transpose(j.cubic, tuple(range(axes - 2)) + tuple(axes - 2 + q for q in perm)))


# ---------------------------------------------------------------------------
# jet_eval


def test_monomial_hand_derivatives():
    u = Polynomial(3, (((2, 1, 0), 1.0),))  # x0^2 x1
    j = jet_eval(u, (1.0, 2.0, 0.0))
    assert j.value == 2.0
    np.testing.assert_array_equal(j.grad, [4.0, 1.0, 0.0])
    np.testing.assert_array_equal(j.hess, [[4, 2, 0], [2, 0, 0], [0, 0, 0]])
    expected = np.zeros((3, 3, 3))
    for perm in set(itertools.permutations((0, 0, 1))):
        expected[perm] = 2.0
    np.testing.assert_array_equal(j.cubic, expected)


def test_coordinate_jet_is_linear():
    p = np.array([0.3, -1.2, 2.5, 0.1])
    j = jet_eval(Coordinate(2, 4), p)
    assert j.value == p[2]
    np.testing.assert_array_equal(j.grad, np.eye(4)[2])
    assert not j.hess.any() and not j.cubic.any()


def test_single_trig_mode_chain_rule():
    j = jet_eval(TrigPolynomial(2, (((1, 2), 0.0, 1.0),)), (0.0, 0.0))  # sin(x0 + 2 x1)
    k = np.array([1.0, 2.0])
    assert j.value == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(j.grad, k)
    np.testing.assert_allclose(j.hess, 0.0, atol=1e-15)
    np.testing.assert_allclose(j.cubic, -np.einsum("i,j,k->ijk", k, k, k))


def test_batched_points_match_single_points():
    rng = np.random.default_rng(3)
    f = random_trig(rng, 3) * random_poly(rng, 3)
    pts = rng.uniform(-1, 1, (5, 3))
    batch = jet_eval(f, pts)
    for b, p in enumerate(pts):
        single = jet_eval(f, p)
        for x, y in zip(batch.components(), single.components()):
            np.testing.assert_allclose(x[b], y, rtol=1e-14, atol=1e-14)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionMismatchError):
        jet_eval(Coordinate(0, 3), (0.0, 0.0))
    with pytest.raises(DimensionMismatchError):
        Polynomial(2, (((1, 0, 0), 1.0),))
    with pytest.raises(ValueError):
        Polynomial(2, (((3, 2), 1.0),))


def test_trig_fields_are_2pi_periodic():
    rng = np.random.default_rng(0)
    f = random_trig(rng, 3)
    x = rng.uniform(-3, 3, (20, 3))
    for i in range(3):
        np.testing.assert_allclose(field_value(f, x + 2 * np.pi * np.eye(3)[i]), field_value(f, x), atol=1e-12)


def test_polynomial_center_shifts_argument():
    f = Polynomial(2, (((2, 0), 1.0),), center=(1.0, 0.0))
    j = jet_eval(f, (3.0, 5.0))
    assert j.value == 4.0
    np.testing.assert_array_equal(j.grad, [4.0, 0.0])


# ---------------------------------------------------------------------------
# arithmetic


def test_constant_product():
    c = jet_arith("mul", Jet.constant(3.0, 2), Jet.constant(4.0, 2))
    assert c.value == 12.0
    assert not c.grad.any() and not c.hess.any() and not c.cubic.any()


def test_quotient_of_jet_by_itself():
    rng = np.random.default_rng(1)
    a = random_jet(rng, 3)
    assert a.value != 0
    q = jet_arith("div", a, a)
    assert q.value == pytest.approx(1.0, rel=1e-14)
    scale = max(1.0, float(np.max(np.abs(a.cubic)))) / abs(float(a.value)) ** 3
    for comp in (q.grad, q.hess, q.cubic):
        np.testing.assert_allclose(comp, 0.0, atol=1e-12 * scale)


def test_coordinate_product():
    p = (1.0, 1.0)
    j = jet_arith("mul", Jet.coordinate(0, p), Jet.coordinate(1, p))
    assert j.value == 1.0
    np.testing.assert_array_equal(j.grad, [1.0, 1.0])
    np.testing.assert_array_equal(j.hess, [[0, 1], [1, 0]])
    assert not j.cubic.any()


def test_division_by_zero_value():
    z = Jet.coordinate(0, (0.0, 1.0))
    with pytest.raises(SingularJetError):
        jet_arith("div", Jet.constant(1.0, 2), z)


def test_arith_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        jet_arith("add", Jet.constant(1.0, 2), Jet.constant(1.0, 3))


def test_unknown_operations():
    with pytest.raises(ValueError):
        jet_arith("pow", Jet.constant(1.0, 2), Jet.constant(1.0, 2))
    with pytest.raises(ValueError):
        jet_unary("tan", Jet.constant(1.0, 2))


# ---------------------------------------------------------------------------
# unary functions


def test_log_of_e():
    j = jet_unary("log", Jet.constant(math.e, 3))
    assert j.value == pytest.approx(1.0, rel=1e-15)
    assert not j.grad.any() and not j.hess.any() and not j.cubic.any()


def test_sqrt_of_square_is_absolute_value():
    x = Jet.coordinate(0, (2.0,))
    r = jet_unary("sqrt", jet_unary("square", x))
    assert r.value == pytest.approx(2.0)
    np.testing.assert_allclose(r.grad, [1.0])
    np.testing.assert_allclose(r.hess, [[0.0]], atol=1e-15)
    np.testing.assert_allclose(r.cubic, [[[0.0]]], atol=1e-15)


def test_unary_domain_errors_carry_value():
    neg = Jet.constant(-2.0, 2)
    for op in ("sqrt", "log"):
        with pytest.raises(SingularJetError) as info:
            jet_unary(op, neg)
        assert info.value.value == -2.0
    with pytest.raises(SingularJetError):
        jet_unary("recip", Jet.constant(0.0, 2))


def test_neg_and_recip():
    rng = np.random.default_rng(7)
    a = random_jet(rng, 2)
    one = jet_unary("recip", a) * a
    assert one.value == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(one.cubic, 0.0, atol=1e-9)
    z = jet_unary("neg", a) + a
    assert not z.value and not z.grad.any()


@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 5))
@settings(max_examples=60, deadline=None)
def test_log_exp_roundtrip(seed, dim):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, dim) * 0.1
    back = a.exp().log()
    scale = max(1.0, max(float(np.max(np.abs(c))) for c in a.components()))
    for x, y in zip(back.components(), a.components()):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12 * scale)


@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_symmetry_preserved_exactly(seed, dim):
    rng = np.random.default_rng(seed)
    a, b = random_jet(rng, dim), random_jet(rng, dim)
    pos = a * a + Jet.constant(1.0, dim)
    for j in (a + b, a * b, a / pos, pos.sqrt(), pos.log(), pos.recip(), a.sin(), a.exp(), pos ** 1.5, a.square()):
        assert_symmetric(j)
        assert all(np.all(np.isfinite(c)) for c in j.components())


@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_product_spec_matches_jet_multiplication(seed, dim):
    rng = np.random.default_rng(seed)
    f, g = random_trig(rng, dim), random_poly(rng, dim)
    p = rng.uniform(-1, 1, dim)
    lhs = jet_eval(f * g, p)
    rhs = jet_arith("mul", jet_eval(f, p), jet_eval(g, p))
    for x, y in zip(lhs.components(), rhs.components()):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(np.abs(y)))))


def test_sum_and_scale_specs():
    p = (0.2, -0.4)
    f = Sum((Coordinate(0, 2), Scale(3.0, Coordinate(1, 2))))
    j = jet_eval(f, p)
    assert j.value == pytest.approx(0.2 - 1.2)
    np.testing.assert_array_equal(j.grad, [1.0, 3.0])
    assert isinstance(Coordinate(0, 2) * Coordinate(1, 2), Product)


def test_truncate_and_derivative_orders():
    j = jet_eval(Polynomial(2, (((3, 0), 1.0),)), (1.0, 0.0))
    assert j.order == 3
    dj = j.d()
    assert dj.order == 2
    np.testing.assert_array_equal(dj.value, j.grad)
    np.testing.assert_array_equal(dj.grad, j.hess)
    assert j.truncate(1).order == 1
    with pytest.raises(InsufficientOrderError):
        j.truncate(0).d()


# ---------------------------------------------------------------------------
# finite-difference crosscheck


def test_fd_crosscheck_polynomial_gradient():
    f = Polynomial(3, (((1, 0, 0), 2.0), ((0, 1, 0), -1.0), ((1, 1, 1), 0.5)))
    dev = jet_fd_crosscheck(f, (0.2, 0.3, -0.4), 1e-4)
    assert dev["gradient"] <= 1e-9


def test_fd_crosscheck_trig_hessian():
    f = random_trig(np.random.default_rng(5), 3)
    dev = jet_fd_crosscheck(f, (0.1, 0.7, -0.3), 1e-4)
    assert dev["hessian"] <= 1e-6
    assert dev["cubic"] <= 1e-6


def test_fd_crosscheck_coordinate_is_exact():
    dev = jet_fd_crosscheck(Coordinate(1, 3), (0.5, 0.5, 0.5), 1e-4)
    assert dev["gradient"] <= 1e-11
    assert dev["hessian"] <= 1e-11


def test_fd_crosscheck_step_bounds():
    with pytest.raises(ValueError):
        jet_fd_crosscheck(Coordinate(0, 2), (0.0, 0.0), 1e-2)


# ---------------------------------------------------------------------------
# serialization


def test_field_dict_roundtrip():
    rng = np.random.default_rng(11)
    f = Sum((random_trig(rng, 3), Scale(-2.0, Product((Coordinate(1, 3), random_poly(rng, 3))))))
    g = Polynomial(3, (((1, 1, 0), 1.5),), center=(0.1, 0.2, 0.3))
    for spec in (f, g):
        assert field_from_dict(field_to_dict(spec)) == spec
