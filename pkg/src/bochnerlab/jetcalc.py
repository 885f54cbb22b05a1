"""Truncated third-order Taylor jets and exactly differentiable scalar fields.

A :class:`Jet` carries, for every entry of an array-valued quantity, the
value together with its gradient, Hessian and fully symmetric third
derivative with respect to the chart coordinates.  Arrays of jets share one
object: ``value`` has shape ``S``, ``grad`` has ``S + (d,)``, ``hess``
``S + (d, d)`` and ``cubic`` ``S + (d, d, d)``.  Leading axes of ``S`` may be
used as a batch axis; every operation broadcasts over them.

Differentiating a jet (:meth:`Jet.d`) lowers its order by one, so quantities
built from derivatives carry exactly the orders that are actually known.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, InsufficientOrderError, SingularJetError

__all__ = [
    "Jet",
    "Jet3",
    "Coordinate",
    "Polynomial",
    "TrigPolynomial",
    "Sum",
    "Product",
    "Scale",
    "ScalarFieldSpec",
    "jet_eval",
    "jet_arith",
    "jet_unary",
    "jet_fd_crosscheck",
    "field_value",
    "field_to_dict",
    "field_from_dict",
    "contract",
    "linear",
    "stack",
]

_D = "XYZ"


@functools.lru_cache(maxsize=None)
def _canonical_gather(dim):
    """Flat gather indices mapping every index tuple onto its sorted representative."""
    i, j = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    h_idx = (lo * dim + hi).ravel()
    i, j, k = np.meshgrid(np.arange(dim), np.arange(dim), np.arange(dim), indexing="ij")
    s = np.sort(np.stack([i, j, k]), axis=0)
    c_idx = (s[0] * dim * dim + s[1] * dim + s[2]).ravel()
    return h_idx, c_idx


def _sym_hess(h):
    d = h.shape[-1]
    h_idx, _ = _canonical_gather(d)
    return h.reshape(h.shape[:-2] + (d * d,))[..., h_idx].reshape(h.shape)


def _sym_cubic(c):
    d = c.shape[-1]
    _, c_idx = _canonical_gather(d)
    return c.reshape(c.shape[:-3] + (d ** 3,))[..., c_idx].reshape(c.shape)


def _expand(arr, k):
    arr = np.asarray(arr, dtype=float)
    return arr.reshape(arr.shape + (1,) * k)


class Jet:
    """Array of truncated Taylor jets of order ``order`` (at most 3)."""

    __slots__ = ("value", "grad", "hess", "cubic", "order", "dim")
    __array_priority__ = 100

    def __init__(self, value, grad=None, hess=None, cubic=None, *, order=None, dim=None):
        self.value = np.asarray(value, dtype=float)
        comps = [grad, hess, cubic]
        if order is None:
            order = 0
            for c in comps:
                if c is None:
                    break
                order += 1
        self.order = order
        self.grad = np.asarray(grad, dtype=float) if order >= 1 else None
        self.hess = np.asarray(hess, dtype=float) if order >= 2 else None
        self.cubic = np.asarray(cubic, dtype=float) if order >= 3 else None
        if dim is None:
            if self.grad is None:
                raise ValueError("dim is required for order-0 jets")
            dim = self.grad.shape[-1]
        self.dim = dim

    # -- construction ---------------------------------------------------
    @classmethod
    def constant(cls, value, dim, order=3):
        value = np.asarray(value, dtype=float)
        s = value.shape
        return cls(
            value,
            np.zeros(s + (dim,)) if order >= 1 else None,
            np.zeros(s + (dim,) * 2) if order >= 2 else None,
            np.zeros(s + (dim,) * 3) if order >= 3 else None,
            order=order,
            dim=dim,
        )

    @classmethod
    def coordinate(cls, index, point, order=3):
        """Jet of the coordinate function ``x[index]`` at ``point`` (shape ``B + (d,)``)."""
        point = np.asarray(point, dtype=float)
        dim = point.shape[-1]
        if not 0 <= index < dim:
            raise DimensionMismatchError(f"coordinate index {index} outside dimension {dim}")
        value = point[..., index]
        grad = np.zeros(value.shape + (dim,))
        grad[..., index] = 1.0
        return cls(
            value,
            grad,
            np.zeros(value.shape + (dim, dim)) if order >= 2 else None,
            np.zeros(value.shape + (dim,) * 3) if order >= 3 else None,
            order=order,
            dim=dim,
        )

    # -- introspection --------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    def components(self):
        return [c for c in (self.value, self.grad, self.hess, self.cubic)[: self.order + 1]]

    def truncate(self, order):
        order = min(order, self.order)
        c = self.components()[: order + 1] + [None] * (3 - order)
        return Jet(c[0], c[1], c[2], c[3], order=order, dim=self.dim)

    def __repr__(self):
        return f"Jet(shape={self.shape}, dim={self.dim}, order={self.order}, value={self.value!r})"

    # -- structural operations -------------------------------------------
    def _map(self, fn):
        comps = [fn(c, k) for k, c in enumerate(self.components())]
        comps += [None] * (4 - len(comps))
        return Jet(*comps, order=self.order, dim=self.dim)

    def sel(self, *index):
        """Select along the trailing axes of the value shape."""
        return self._map(lambda c, k: c[(Ellipsis,) + index + (slice(None),) * k])

    def expand(self, axis=-1):
        """Insert a unit axis into the value shape (negative axes count from its end)."""
        nd = self.value.ndim
        ax = axis if axis >= 0 else nd + 1 + axis
        return self._map(lambda c, k: np.expand_dims(c, ax))

    def sum(self, axis=-1):
        nd = self.value.ndim
        ax = axis if axis >= 0 else nd + axis
        return self._map(lambda c, k: c.sum(axis=ax))

    def d(self):
        """Jet of the coordinate gradient; the new derivative axis is appended to the value shape."""
        if self.order < 1:
            raise InsufficientOrderError("cannot differentiate an order-0 jet")
        return Jet(self.grad, self.hess, self.cubic, None, order=self.order - 1, dim=self.dim)

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise DimensionMismatchError(f"jet dimensions differ: {self.dim} vs {other.dim}")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            value = self.value + np.asarray(other, dtype=float)
            nd = self.value.ndim
            comps = [value] + [np.broadcast_to(c, value.shape + c.shape[nd:]) for c in self.components()[1:]]
            comps += [None] * (4 - len(comps))
            return Jet(*comps, order=self.order, dim=self.dim)
        order = min(self.order, o.order)
        a, b = self.components(), o.components()
        c = [a[k] + b[k] for k in range(order + 1)] + [None] * (3 - order)
        return Jet(*c, order=order, dim=self.dim)

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda c, k: -c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return self._map(lambda c, k: c * _expand(other, k))
        return _mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            if np.any(other == 0):
                raise SingularJetError("division by zero constant", value=0.0)
            return self * (1.0 / other)
        return _mul(self, o.recip())

    def __rtruediv__(self, other):
        return self.recip() * other

    def recip(self):
        v = self.value
        if np.any(v == 0):
            raise SingularJetError("reciprocal of a jet with zero value", value=0.0)
        r = 1.0 / v
        return _compose(self, r, -r * r, 2 * r ** 3, -6 * r ** 4)

    def sqrt(self):
        v = self.value
        if np.any(v <= 0):
            raise SingularJetError("sqrt of a jet with non-positive value", value=float(np.min(v)))
        s = np.sqrt(v)
        return _compose(self, s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))

    def log(self):
        v = self.value
        if np.any(v <= 0):
            raise SingularJetError("log of a jet with non-positive value", value=float(np.min(v)))
        r = 1.0 / v
        return _compose(self, np.log(v), r, -r * r, 2 * r ** 3)

    def exp(self):
        e = np.exp(self.value)
        return _compose(self, e, e, e, e)

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return _compose(self, s, c, -s, -c)

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return _compose(self, c, -s, -c, s)

    def square(self):
        return _mul(self, self)

    def __pow__(self, k):
        if k == 2:
            return self.square()
        v = self.value
        if np.any(v <= 0):
            raise SingularJetError("real power of a jet with non-positive value", value=float(np.min(v)))
        return _compose(self, v ** k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2),
                        k * (k - 1) * (k - 2) * v ** (k - 3))


Jet3 = Jet


def _mul(a, b):
    order = min(a.order, b.order)
    av, bv = a.value, b.value
    value = av * bv
    grad = hess = cubic = None
    if order >= 1:
        ag, bg = a.grad, b.grad
        grad = ag * bv[..., None] + av[..., None] * bg
    if order >= 2:
        ah, bh = a.hess, b.hess
        t = ag[..., :, None] * bg[..., None, :]
        hess = _sym_hess(ah * bv[..., None, None] + t + np.swapaxes(t, -1, -2) + av[..., None, None] * bh)
    if order >= 3:
        t1 = ah[..., :, :, None] * bg[..., None, None, :]
        t2 = ag[..., :, None, None] * bh[..., None, :, :]
        cubic = (a.cubic * bv[..., None, None, None] + av[..., None, None, None] * b.cubic
                 + t1 + np.einsum("...xzy->...xyz", t1) + np.einsum("...yzx->...xyz", t1)
                 + t2 + np.einsum("...yxz->...xyz", t2) + np.einsum("...zxy->...xyz", t2))
        cubic = _sym_cubic(cubic)
    return Jet(value, grad, hess, cubic, order=order, dim=a.dim)


def _compose(a, f0, f1, f2, f3):
    """Apply a univariate function elementwise given its derivatives at ``a.value``."""
    value = np.asarray(f0, dtype=float)
    grad = hess = cubic = None
    if a.order >= 1:
        ag = a.grad
        grad = f1[..., None] * ag
    if a.order >= 2:
        gg = ag[..., :, None] * ag[..., None, :]
        hess = _sym_hess(f2[..., None, None] * gg + f1[..., None, None] * a.hess)
    if a.order >= 3:
        ggg = gg[..., None] * ag[..., None, None, :]
        t = a.hess[..., :, :, None] * ag[..., None, None, :]
        mixed = t + np.einsum("...xzy->...xyz", t) + np.einsum("...yzx->...xyz", t)
        cubic = _sym_cubic(f3[..., None, None, None] * ggg + f2[..., None, None, None] * mixed
                           + f1[..., None, None, None] * a.cubic)
    return Jet(value, grad, hess, cubic, order=a.order, dim=a.dim)


def _split(subscripts):
    ins, out = subscripts.replace(" ", "").split("->")
    return ins.split(","), out


def contract(subscripts, a, b):
    """Bilinear einsum of two jets (or a jet and a constant array) with the Leibniz rule."""
    (sa, sb), so = _split(subscripts)
    if not isinstance(a, Jet):
        return linear(f"{sb}->{so}", b, const=(sa, a))
    if not isinstance(b, Jet):
        return linear(f"{sa}->{so}", a, const=(sb, b), const_first=False)
    if a.dim != b.dim:
        raise DimensionMismatchError(f"jet dimensions differ: {a.dim} vs {b.dim}")
    E = np.einsum
    order = min(a.order, b.order)
    value = E(f"{sa},{sb}->{so}", a.value, b.value)
    grad = hess = cubic = None
    if order >= 1:
        grad = E(f"{sa}X,{sb}->{so}X", a.grad, b.value) + E(f"{sa},{sb}X->{so}X", a.value, b.grad)
    if order >= 2:
        t = E(f"{sa}X,{sb}Y->{so}XY", a.grad, b.grad)
        hess = _sym_hess(E(f"{sa}XY,{sb}->{so}XY", a.hess, b.value) + t + np.swapaxes(t, -1, -2)
                         + E(f"{sa},{sb}XY->{so}XY", a.value, b.hess))
    if order >= 3:
        t1 = E(f"{sa}XY,{sb}Z->{so}XYZ", a.hess, b.grad)
        t2 = E(f"{sa}X,{sb}YZ->{so}XYZ", a.grad, b.hess)
        cubic = (E(f"{sa}XYZ,{sb}->{so}XYZ", a.cubic, b.value)
                 + E(f"{sa},{sb}XYZ->{so}XYZ", a.value, b.cubic)
                 + t1 + E("...xzy->...xyz", t1) + E("...yzx->...xyz", t1)
                 + t2 + E("...yxz->...xyz", t2) + E("...zxy->...xyz", t2))
        cubic = _sym_cubic(cubic)
    return Jet(value, grad, hess, cubic, order=order, dim=a.dim)


def linear(subscripts, a, const=None, const_first=True):
    """Apply a linear einsum to every jet component (optionally against a constant array)."""
    (sa,), so = _split(subscripts)

    def fn(c, k):
        d = _D[:k]
        if const is None:
            return np.einsum(f"{sa}{d}->{so}{d}", c)
        sc, arr = const
        if const_first:
            return np.einsum(f"{sc},{sa}{d}->{so}{d}", arr, c)
        return np.einsum(f"{sa}{d},{sc}->{so}{d}", c, arr)

    return a._map(fn)


def stack(jets, axis=-1):
    """Stack jets of equal shape along a new value axis."""
    jets = list(jets)
    order = min(j.order for j in jets)
    dim = jets[0].dim
    nd = jets[0].value.ndim
    ax = axis if axis >= 0 else nd + 1 + axis
    comps = []
    for k in range(order + 1):
        arrs = [j.components()[k] for j in jets]
        arrs = np.broadcast_arrays(*arrs)
        comps.append(np.stack(arrs, axis=ax))
    comps += [None] * (4 - len(comps))
    return Jet(*comps, order=order, dim=dim)


def jet_arith(op, a, b):
    """Binary jet arithmetic: ``op`` is one of add, sub, mul, div."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"jet dimensions differ: {a.dim} vs {b.dim}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if np.any(b.value == 0):
            raise SingularJetError("division by a jet with zero value", value=0.0)
        return a / b
    raise ValueError(f"unknown jet operation {op!r}")


def jet_unary(op, a):
    """Unary jet function: sqrt, log, recip, neg, square (and exp, sin, cos)."""
    if op == "neg":
        return -a
    if op in ("sqrt", "log", "recip", "square", "exp", "sin", "cos"):
        return getattr(a, op)()
    raise ValueError(f"unknown unary jet operation {op!r}")


# ---------------------------------------------------------------------------
# scalar field specifications


class ScalarFieldSpec:
    """Base class for exactly differentiable scalar fields on a chart."""

    dim: int

    def __add__(self, other):
        return Sum((self, other))

    def __mul__(self, other):
        if isinstance(other, ScalarFieldSpec):
            return Product((self, other))
        return Scale(float(other), self)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Coordinate(ScalarFieldSpec):
    index: int
    dim: int


@dataclass(frozen=True)
class Polynomial(ScalarFieldSpec):
    """Polynomial of total degree <= 4 in ``x - center``.

    ``terms`` is a tuple of ``(exponents, coefficient)`` pairs.
    """

    dim: int
    terms: tuple
    center: tuple | None = None

    def __post_init__(self):
        terms = tuple((tuple(int(e) for e in exps), float(c)) for exps, c in self.terms)
        for exps, _ in terms:
            if len(exps) != self.dim:
                raise DimensionMismatchError(f"exponent vector {exps} does not match dim {self.dim}")
            if min(exps, default=0) < 0 or sum(exps) > 4:
                raise ValueError(f"monomial {exps} outside total degree 4")
        object.__setattr__(self, "terms", terms)
        if self.center is not None:
            center = tuple(float(x) for x in self.center)
            if len(center) != self.dim:
                raise DimensionMismatchError("polynomial center has the wrong dimension")
            object.__setattr__(self, "center", center)


@dataclass(frozen=True)
class TrigPolynomial(ScalarFieldSpec):
    """``constant + sum(a cos(k.x) + b sin(k.x))`` over integer frequency vectors ``k``."""

    dim: int
    modes: tuple
    constant: float = 0.0

    def __post_init__(self):
        modes = tuple((tuple(int(k) for k in freq), float(a), float(b)) for freq, a, b in self.modes)
        for freq, _, _ in modes:
            if len(freq) != self.dim:
                raise DimensionMismatchError(f"frequency {freq} does not match dim {self.dim}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "constant", float(self.constant))


@dataclass(frozen=True)
class Sum(ScalarFieldSpec):
    terms: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "dim", _common_dim(self.terms))


@dataclass(frozen=True)
class Product(ScalarFieldSpec):
    factors: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "dim", _common_dim(self.factors))


@dataclass(frozen=True)
class Scale(ScalarFieldSpec):
    factor: float
    base: ScalarFieldSpec
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "factor", float(self.factor))
        object.__setattr__(self, "dim", self.base.dim)


def _common_dim(parts):
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise DimensionMismatchError(f"combined fields have different dimensions {sorted(dims)}")
    return dims.pop()


def _falling(e, k):
    out = np.ones_like(e, dtype=float)
    for i in range(k):
        out = out * (e - i)
    return out


@functools.lru_cache(maxsize=None)
def _sorted_multi_indices(dim, order):
    return [tuple(c) for c in itertools.combinations_with_replacement(range(dim), order)]


def _poly_jet(spec, x, order):
    dim = spec.dim
    if spec.center is not None:
        x = x - np.asarray(spec.center)
    batch = x.shape[:-1]
    if not spec.terms:
        return Jet.constant(np.zeros(batch), dim, order)
    E = np.array([t[0] for t in spec.terms], dtype=float)  # (T, d)
    C = np.array([t[1] for t in spec.terms])

    def deriv(alpha):
        counts = np.bincount(np.asarray(alpha, dtype=int), minlength=dim) if alpha else np.zeros(dim, int)
        factor = np.prod([_falling(E[:, k], counts[k]) for k in range(dim)], axis=0) * C
        powers = np.maximum(E - counts, 0)
        mono = np.prod(x[..., None, :] ** powers, axis=-1)  # B + (T,)
        return mono @ factor

    value = deriv(())
    comps = [value]
    for k in range(1, order + 1):
        arr = np.zeros(batch + (dim,) * k)
        for alpha in _sorted_multi_indices(dim, k):
            v = deriv(alpha)
            for perm in set(itertools.permutations(alpha)):
                arr[(Ellipsis,) + perm] = v
        comps.append(arr)
    comps += [None] * (4 - len(comps))
    return Jet(*comps, order=order, dim=dim)


def _trig_jet(spec, x, order):
    dim = spec.dim
    batch = x.shape[:-1]
    if not spec.modes:
        return Jet.constant(np.full(batch, spec.constant), dim, order)
    K = np.array([m[0] for m in spec.modes], dtype=float)  # (M, d)
    a = np.array([m[1] for m in spec.modes])
    b = np.array([m[2] for m in spec.modes])
    theta = x @ K.T  # B + (M,)
    c, s = np.cos(theta), np.sin(theta)
    # successive theta-derivatives of a cos + b sin
    phases = [a * c + b * s, -a * s + b * c, -a * c - b * s, a * s - b * c]
    comps = [phases[0].sum(-1) + spec.constant]
    E = np.einsum
    if order >= 1:
        comps.append(E("...m,mi->...i", phases[1], K))
    if order >= 2:
        comps.append(E("...m,mi,mj->...ij", phases[2], K, K))
    if order >= 3:
        comps.append(E("...m,mi,mj,mk->...ijk", phases[3], K, K, K))
    comps += [None] * (4 - len(comps))
    return Jet(*comps, order=order, dim=dim)


def jet_eval(spec, p, order=3):
    """Exact jet of ``spec`` at the point(s) ``p`` (shape ``(d,)`` or ``B + (d,)``)."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != spec.dim:
        raise DimensionMismatchError(f"point of dimension {p.shape[-1]} for a field of dimension {spec.dim}")
    if isinstance(spec, Coordinate):
        return Jet.coordinate(spec.index, p, order)
    if isinstance(spec, Polynomial):
        return _poly_jet(spec, p, order)
    if isinstance(spec, TrigPolynomial):
        return _trig_jet(spec, p, order)
    if isinstance(spec, Sum):
        out = jet_eval(spec.terms[0], p, order)
        for t in spec.terms[1:]:
            out = out + jet_eval(t, p, order)
        return out
    if isinstance(spec, Product):
        out = jet_eval(spec.factors[0], p, order)
        for f in spec.factors[1:]:
            out = out * jet_eval(f, p, order)
        return out
    if isinstance(spec, Scale):
        return jet_eval(spec.base, p, order) * spec.factor
    raise TypeError(f"unsupported field spec {type(spec).__name__}")


def field_value(spec, x):
    """Plain pointwise evaluation, independent of the jet machinery."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, Coordinate):
        return x[..., spec.index]
    if isinstance(spec, Polynomial):
        if spec.center is not None:
            x = x - np.asarray(spec.center)
        total = np.zeros(x.shape[:-1])
        for exps, c in spec.terms:
            term = np.full(x.shape[:-1], c)
            for k, e in enumerate(exps):
                if e:
                    term = term * x[..., k] ** e
            total = total + term
        return total
    if isinstance(spec, TrigPolynomial):
        total = np.full(x.shape[:-1], spec.constant)
        for freq, a, b in spec.modes:
            theta = sum(k * x[..., i] for i, k in enumerate(freq) if k)
            total = total + a * np.cos(theta) + b * np.sin(theta)
        return total
    if isinstance(spec, Sum):
        return sum(field_value(t, x) for t in spec.terms)
    if isinstance(spec, Product):
        return math.prod(field_value(f, x) for f in spec.factors)
    if isinstance(spec, Scale):
        return spec.factor * field_value(spec.base, x)
    raise TypeError(f"unsupported field spec {type(spec).__name__}")


def jet_fd_crosscheck(spec, p, h=1e-4):
    """Compare jet derivatives against central finite differences of pointwise values.

    Returns a dict with the maximum relative deviation for the gradient and
    Hessian (from function values) and for the third derivatives (central
    differences of the jet Hessian, which the second-order check validates).
    """
    if not 1e-5 <= h <= 1e-3:
        raise ValueError("finite-difference step must lie in [1e-5, 1e-3]")
    p = np.asarray(p, dtype=float)
    d = spec.dim
    jet = jet_eval(spec, p)
    f = functools.partial(field_value, spec)
    eye = np.eye(d) * h
    grad = np.array([(f(p + eye[i]) - f(p - eye[i])) / (2 * h) for i in range(d)])
    hess = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            hess[i, j] = (f(p + eye[i] + eye[j]) - f(p + eye[i] - eye[j])
                          - f(p - eye[i] + eye[j]) + f(p - eye[i] - eye[j])) / (4 * h * h)
    cubic = np.empty((d, d, d))
    for k in range(d):
        cubic[:, :, k] = (jet_eval(spec, p + eye[k], 2).hess - jet_eval(spec, p - eye[k], 2).hess) / (2 * h)

    def rel(exact, approx):
        return float(np.max(np.abs(exact - approx)) / max(1.0, float(np.max(np.abs(exact)))))

    return {
        "gradient": rel(jet.grad, grad),
        "hessian": rel(jet.hess, hess),
        "cubic": rel(jet.cubic, cubic),
    }


# ---------------------------------------------------------------------------
# serialization


def field_to_dict(spec):
    if isinstance(spec, Coordinate):
        return {"kind": "coordinate", "dim": spec.dim, "index": spec.index}
    if isinstance(spec, Polynomial):
        return {
            "kind": "polynomial",
            "dim": spec.dim,
            "terms": [[list(e), c] for e, c in spec.terms],
            "center": None if spec.center is None else list(spec.center),
        }
    if isinstance(spec, TrigPolynomial):
        return {
            "kind": "trig",
            "dim": spec.dim,
            "constant": spec.constant,
            "modes": [[list(k), a, b] for k, a, b in spec.modes],
        }
    if isinstance(spec, Sum):
        return {"kind": "sum", "terms": [field_to_dict(t) for t in spec.terms]}
    if isinstance(spec, Product):
        return {"kind": "product", "factors": [field_to_dict(f) for f in spec.factors]}
    if isinstance(spec, Scale):
        return {"kind": "scale", "factor": spec.factor, "field": field_to_dict(spec.base)}
    raise TypeError(f"unsupported field spec {type(spec).__name__}")


def field_from_dict(data):
    kind = data["kind"]
    if kind == "coordinate":
        return Coordinate(int(data["index"]), int(data["dim"]))
    if kind == "polynomial":
        return Polynomial(int(data["dim"]), tuple((tuple(e), c) for e, c in data["terms"]),
                          None if data.get("center") is None else tuple(data["center"]))
    if kind == "trig":
        return TrigPolynomial(int(data["dim"]), tuple((tuple(k), a, b) for k, a, b in data["modes"]),
                              data.get("constant", 0.0))
    if kind == "sum":
        return Sum(tuple(field_from_dict(t) for t in data["terms"]))
    if kind == "product":
        return Product(tuple(field_from_dict(f) for f in data["factors"]))
    if kind == "scale":
        return Scale(data["factor"], field_from_dict(data["field"]))
    raise ValueError(f"unknown field kind {kind!r}")


def as_points(p: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(p, dtype=float)
