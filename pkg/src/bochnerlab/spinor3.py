"""Flat 3-d spinors in the Pauli representation, their currents and the Kato-type checks.

A spinor is ``psi = (a + i b, c + i d)`` stored as four real fields.  Clifford
multiplication is ``e_k = i sigma_k`` and the Hermitian product is conjugate
linear in its first slot.  Coordinates are indexed ``0, 1, 2`` here; the
field ``x_3`` of a hand computation is ``Coordinate(2, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import DimensionMismatchError, PreconditionError
from .jetcalc import Polynomial, jet_eval, stack

__all__ = [
    "CLIFFORD",
    "PAULI",
    "CauchyRiemannReport",
    "CurrentTriple",
    "SpinorField",
    "SpinorReport",
    "cauchy_riemann_pair_check",
    "currents",
    "dirac_apply",
    "dirac_constraint_matrix",
    "divfree_quadruple",
    "harmonic_linear_spinor",
    "hermitian",
    "spinor_from_linear",
    "spinor_property_suite",
]

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
CLIFFORD = 1j * PAULI


def hermitian(x, y):
    """``<x, y>``, conjugate linear in ``x``; batched over leading axes."""
    return np.sum(np.conj(x) * y, axis=-1)


@dataclass(frozen=True)
class SpinorField:
    a: object
    b: object
    c: object
    d: object

    def __post_init__(self):
        if any(f.dim != 3 for f in self.components):
            raise DimensionMismatchError("spinor components must live on a 3-d chart")

    @property
    def components(self):
        return (self.a, self.b, self.c, self.d)

    def jets(self, p, order=2):
        return [jet_eval(f, p, order) for f in self.components]

    def value(self, p):
        a, b, c, d = (j.value for j in self.jets(p, 0))
        return np.stack([a + 1j * b, c + 1j * d], axis=-1)


def _derivatives(psi, p):
    """``d_k psi`` as an array ``(..., 3, 2)`` of complex numbers."""
    a, b, c, d = psi.jets(p, 1)
    return np.stack([a.grad + 1j * b.grad, c.grad + 1j * d.grad], axis=-1)


def dirac_apply(psi: SpinorField, p):
    """``D psi = sum_k e_k d_k psi`` at ``p`` (flat connection)."""
    return np.einsum("kij,...kj->...i", CLIFFORD, _derivatives(psi, p))


def divfree_quadruple(psi: SpinorField, p):
    """Divergences of ``(-d, c, -b)``, ``(c, d, a)``, ``(-b, -a, d)``, ``(a, -b, -c)``."""
    a, b, c, d = (j.grad for j in psi.jets(p, 1))
    return np.stack([
        -d[..., 0] + c[..., 1] - b[..., 2],
        c[..., 0] + d[..., 1] + a[..., 2],
        -b[..., 0] - a[..., 1] + d[..., 2],
        a[..., 0] - b[..., 1] - c[..., 2],
    ], axis=-1)


@dataclass(frozen=True)
class CurrentTriple:
    X: object  # jet vectors, value axis of length 3
    A: object
    B: object


def currents(psi: SpinorField, p, order=2) -> CurrentTriple:
    """Dirac current ``X`` and the quaternionic currents ``A``, ``B`` as jets."""
    a, b, c, d = psi.jets(p, order)
    X = stack([-2 * a * c - 2 * b * d, -2 * a * d + 2 * b * c, -a * a - b * b + c * c + d * d], -1)
    A = stack([-2 * a * b + 2 * c * d, -a * a + b * b - c * c + d * d, 2 * a * d + 2 * b * c], -1)
    B = stack([-a * a + b * b + c * c - d * d, 2 * a * b + 2 * c * d, 2 * a * c - 2 * b * d], -1)
    return CurrentTriple(X, A, B)


def _div(V):
    return np.trace(V.d().value, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class SpinorReport:
    n_points: int
    max_dirac: float
    max_div: dict  # current name -> max |div|
    min_kato_slack: float
    min_lichnerowicz_slack: float
    max_orthogonality: float
    max_length_defect: float
    tolerance: float

    @property
    def passed(self):
        return (max(self.max_div.values()) <= self.tolerance
                and self.min_kato_slack >= -self.tolerance
                and self.min_lichnerowicz_slack >= -self.tolerance
                and self.max_orthogonality <= self.tolerance
                and self.max_length_defect <= self.tolerance)


def spinor_property_suite(psi: SpinorField, points, tolerance=1e-10) -> SpinorReport:
    """Divergence, orthogonality, length and Kato/Lichnerowicz slacks for a harmonic spinor.

    Flat space, so the curvature term of the Lichnerowicz-type inequality is zero.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dirac = np.abs(dirac_apply(psi, points))
    scale = max(1.0, float(np.max(np.abs(_derivatives(psi, points)))))
    if np.max(dirac) > tolerance * scale:
        raise PreconditionError(f"spinor is not harmonic at the sample points (|D psi| up to {np.max(dirac):.3e})")
    cur = currents(psi, points)
    a, b, c, d = psi.jets(points, 2)
    rho = a * a + b * b + c * c + d * d  # |psi|^2
    if np.min(rho.value) <= 1e-14:
        raise PreconditionError("spinor vanishes at a sample point")
    kato = 2 * np.trace(rho.hess, axis1=-2, axis2=-1) - np.sum(rho.grad ** 2, axis=-1) / rho.value
    Xn2 = (cur.X * cur.X).sum(-1)
    Xn = Xn2.sqrt()
    lich = (2 * np.trace(Xn.hess, axis1=-2, axis2=-1)
            - np.sum(cur.X.grad ** 2, axis=(-1, -2)) / Xn.value)
    vals = {k: getattr(cur, k).value for k in "XAB"}
    ortho = max(float(np.max(np.abs(np.sum(vals[x] * vals[y], axis=-1)))) for x, y in ("XA", "XB", "AB"))
    lengths = max(float(np.max(np.abs(np.linalg.norm(v, axis=-1) - rho.value) / rho.value)) for v in vals.values())
    return SpinorReport(
        n_points=len(points),
        max_dirac=float(np.max(dirac)),
        max_div={k: float(np.max(np.abs(_div(getattr(cur, k))))) for k in "XAB"},
        min_kato_slack=float(np.min(kato)),
        min_lichnerowicz_slack=float(np.min(lich)),
        max_orthogonality=ortho,
        max_length_defect=lengths,
        tolerance=tolerance,
    )


def dirac_constraint_matrix():
    """Real ``4 x 12`` matrix of ``phi -> sum_k e_k phi_k`` on ``phi = (phi_1, phi_2, phi_3)``."""
    cols = []
    for k in range(3):
        for comp in range(2):
            for unit in (1.0, 1j):
                phi = np.zeros(2, dtype=complex)
                phi[comp] = unit
                out = CLIFFORD[k] @ phi
                cols.append(np.concatenate([out.real, out.imag]))
    return np.array(cols).T


def _linear_component(const, coeffs):
    terms = [((0, 0, 0), float(const))]
    terms += [(tuple(int(i == k) for i in range(3)), float(coeffs[k])) for k in range(3)]
    return Polynomial(3, tuple(t for t in terms if t[1] != 0.0) or (((0, 0, 0), 0.0),))


def spinor_from_linear(psi0, phis):
    """``psi(x) = psi0 + sum_k x_k phi_k`` for complex 2-vectors ``psi0`` and ``phis[k]``."""
    psi0 = np.asarray(psi0, dtype=complex)
    phis = np.asarray(phis, dtype=complex)
    parts = []
    for comp in range(2):
        parts.append(_linear_component(psi0[comp].real, phis[:, comp].real))
        parts.append(_linear_component(psi0[comp].imag, phis[:, comp].imag))
    return SpinorField(*parts)


def _unpack(vec):
    """12 real unknowns -> three complex 2-vectors (ordering of :func:`dirac_constraint_matrix`)."""
    v = np.asarray(vec).reshape(3, 2, 2)
    return v[..., 0] + 1j * v[..., 1]


def harmonic_linear_spinor(seed) -> SpinorField:
    """Random linear spinor with ``D psi = 0``, drawn from the 8-dimensional kernel."""
    rng = np.random.default_rng(seed)
    kernel = null_space(dirac_constraint_matrix())
    phis = _unpack(kernel @ rng.standard_normal(kernel.shape[1]))
    psi0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return spinor_from_linear(psi0, phis)


@dataclass(frozen=True)
class CauchyRiemannReport:
    max_laplacian: float
    max_inner: float
    max_length_defect: float
    tolerance: float

    @property
    def passed(self):
        return max(self.max_laplacian, self.max_inner, self.max_length_defect) <= self.tolerance


def cauchy_riemann_pair_check(u, v, points, tolerance=1e-10) -> CauchyRiemannReport:
    """Gradients of a Cauchy-Riemann pair: divergence free, orthogonal and of equal length."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if u.dim != 2 or v.dim != 2:
        raise DimensionMismatchError("Cauchy-Riemann pairs live on a 2-d chart")
    U, V = jet_eval(u, points, 2), jet_eval(v, points, 2)
    scale = np.maximum(1.0, np.maximum(np.max(np.abs(U.grad), axis=-1), np.max(np.abs(V.grad), axis=-1)))
    cr = np.maximum(np.abs(U.grad[..., 0] - V.grad[..., 1]), np.abs(U.grad[..., 1] + V.grad[..., 0])) / scale
    if np.max(cr) > tolerance:
        raise PreconditionError(f"pair violates the Cauchy-Riemann equations (defect {np.max(cr):.3e})")
    hscale = np.maximum(scale, np.max(np.abs(np.concatenate([U.hess, V.hess], -1)), axis=(-1, -2)))
    lap = np.maximum(np.abs(np.trace(U.hess, axis1=-2, axis2=-1)), np.abs(np.trace(V.hess, axis1=-2, axis2=-1)))
    inner = np.abs(np.sum(U.grad * V.grad, axis=-1)) / scale ** 2
    length = np.abs(np.linalg.norm(U.grad, axis=-1) - np.linalg.norm(V.grad, axis=-1)) / scale
    return CauchyRiemannReport(float(np.max(lap / hscale)), float(np.max(inner)), float(np.max(length)), tolerance)
