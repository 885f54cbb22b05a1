"""Nested level-set slicings, the Z cascade and induced geometry at a point.

Every submanifold quantity is an ambient jet expression contracted with the
projection fields ``P_m = Id - sum_{k<=m} nu_k (x) nu_k^flat``.  Because the
normals are built from the gradients of the ``u``'s at every nearby point,
``P_m`` is the tangential projection of the whole foliation by joint level
sets, and tangential derivatives of composite quantities are exact.

Index conventions: ``nu[m]`` is the unit normal of ``Sigma_{m+1}`` inside
``Sigma_m`` (``m = 0..s-1``).  The adapted frame at ``p`` has columns
``F_0..F_{s-1} = nu[0..s-1]`` followed by an orthonormal completion tangent to
``Sigma_s``, so ``Sigma_m`` is spanned by columns ``m..n-1``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .curvature import christoffel, curvature_at, frame_components
from .errors import DegenerateSlicingError, InsufficientOrderError, SolverError
from .fields import Normalization, SlicingScene, eval_metric
from .jetcalc import Jet, Polynomial, Scale, Sum, contract, jet_eval, stack

__all__ = [
    "DEGENERACY_THRESHOLD",
    "AdaptedFrame",
    "LevelGeometry",
    "SliceGeometry",
    "Slicing",
    "adapted_frame",
    "divergence_data",
    "enforce_pointwise_divfree",
    "fundamental_forms",
    "induced_curvature",
    "lemma_divergence_witness",
    "normal_jet_fields",
    "pde_residuals",
    "sigma_ops",
    "slicing",
    "y_fields",
    "z_cascade",
]

DEGENERACY_THRESHOLD = 1e-8


def cov_deriv(V, gamma):
    """``(nabla V)^i_j = d_j V^i + Gamma^i_jk V^k`` as a jet with value axes ``[i, j]``."""
    dV = V.d()
    order = min(dV.order, gamma.order)
    return dV.truncate(order) + contract("...ijk,...k->...ij", gamma.truncate(order), V.truncate(order))


def tangential_div(P, V, gamma):
    """``tr(P nabla V)``: divergence along the leaves of ``P`` of an ambient vector field."""
    DV = cov_deriv(V, gamma)
    return contract("...ij,...ji->...", DV, P.truncate(DV.order))


class Slicing:
    """Jets of every slicing quantity near ``p`` plus derived values at ``p``.

    ``u_jets`` may carry a leading batch axis (used by the divergence
    enforcement to evaluate several candidate scenes at once).
    """

    def __init__(self, scene: SlicingScene, u_jets=None):
        self.scene = scene
        self.n, self.s = scene.n, scene.s
        self.normalization = scene.normalization
        p = np.asarray(scene.p, dtype=float)
        self.mj = eval_metric(scene.g, p, order=3)
        self.gamma = christoffel(self.mj)
        self.u = list(u_jets) if u_jets is not None else [jet_eval(f, p, 3) for f in scene.u]
        self._build()

    # -- jets ----------------------------------------------------------
    def _build(self):
        n, s = self.n, self.s
        g, gi = self.mj.g, self.mj.ginv
        eye = np.eye(n)
        P = Jet.constant(eye, n, 2)
        self.P = [P]
        self.grad_u, self.v, self.vnorm, self.log_vnorm, self.nu = [], [], [], [], []
        for m in range(s):
            du = self.u[m].d()
            grad = contract("...ij,...j->...i", gi.truncate(2), du)
            v = contract("...ij,...j->...i", P, grad)
            norm2 = contract("...i,...i->...", contract("...ij,...j->...i", g.truncate(2), v), v)
            if np.any(norm2.value <= DEGENERACY_THRESHOLD ** 2):
                raise DegenerateSlicingError(
                    f"|grad_Sigma_{m} u_{m}| = {float(np.sqrt(np.min(np.maximum(norm2.value, 0)))):.3e} "
                    f"is below {DEGENERACY_THRESHOLD:g}")
            vnorm = norm2.sqrt()
            nu = v * vnorm.recip().expand(-1)
            nu_flat = contract("...ij,...j->...i", g.truncate(2), nu)
            P = P - contract("...i,...j->...ij", nu, nu_flat)
            self.grad_u.append(grad)
            self.v.append(v)
            self.vnorm.append(vnorm)
            self.log_vnorm.append(0.5 * norm2.log())
            self.nu.append(nu)
            self.P.append(P)
        # |Z_m| for m = 0..s
        zero = self.log_vnorm[0] * 0.0
        if self.normalization is Normalization.UNIT_TOP:
            logs = [zero] * (s + 1)
            for m in range(s - 1, -1, -1):
                logs[m] = logs[m + 1] + self.log_vnorm[m]
        else:
            logs = [zero]
            for m in range(s):
                logs.append(logs[m] - self.log_vnorm[m])
        self.log_z = logs
        self.z_norm = [lz.exp() for lz in logs]
        self.Z = [self.v[m] * self.z_norm[m + 1].expand(-1) for m in range(s)]

    # -- frame ----------------------------------------------------------
    @functools.cached_property
    def frame(self):
        n, s = self.n, self.s
        N = np.stack([nu.value for nu in self.nu], axis=-1)  # (..., n, s)
        g = np.broadcast_to(self.mj.g.value, N.shape[:-2] + (n, n))
        L = np.linalg.cholesky(g)
        Lt = np.swapaxes(L, -1, -2)
        Nt = Lt @ N
        M = np.concatenate([Nt, np.broadcast_to(np.eye(n), Nt.shape[:-1] + (n,))], axis=-1)
        Q, _ = np.linalg.qr(M)
        Q = np.concatenate([Nt, Q[..., :, s:]], axis=-1)
        return np.linalg.solve(Lt, Q)

    @functools.cached_property
    def gval(self):
        return np.broadcast_to(self.mj.g.value, self.frame.shape)

    def frame_d(self, f):
        """Frame components ``df(F_a)`` of the differential of an ambient scalar jet at ``p``."""
        if f.order < 1:
            raise InsufficientOrderError("need a jet of order >= 1")
        return np.einsum("...i,...ia->...a", f.grad, self.frame)

    def frame_hess(self, f):
        """Covariant Hessian of an ambient scalar jet in the adapted frame."""
        if f.order < 2:
            raise InsufficientOrderError("need a jet of order >= 2")
        H = f.hess - np.einsum("...kij,...k->...ij", self.gamma.value, f.grad)
        F = self.frame
        return np.einsum("...ia,...ij,...jb->...ab", F, H, F)

    def frame_vector(self, V):
        """Frame components ``<V, F_a>`` of an ambient vector."""
        return np.einsum("...i,...ij,...ja->...a", V, self.gval, self.frame)

    @functools.cached_property
    def dnu(self):
        """``K[m][a, b] = <nabla_{F_a} nu_m, F_b>`` at ``p``."""
        F, g = self.frame, self.gval
        out = []
        for nu in self.nu:
            D = cov_deriv(nu.truncate(1), self.gamma.truncate(0)).value
            out.append(np.einsum("...ja,...ij,...li,...lb->...ab", F, D, g, F))
        return out

    @functools.cached_property
    def curvature(self):
        return curvature_at(self.mj)

    @functools.cached_property
    def riemann_frame(self):
        return frame_components(self.curvature, self.frame)

    @functools.cached_property
    def induced_riemann(self):
        """Riemann tensors of ``Sigma_0..Sigma_s`` in the adapted frame via the Gauss equation."""
        R = [self.riemann_frame]
        for k in range(self.s):
            A = self.dnu[k]
            gauss = (np.einsum("...ac,...bd->...abcd", A, A) - np.einsum("...ad,...bc->...abcd", A, A))
            R.append(R[k] + gauss)
        return R

    # -- per level -------------------------------------------------------
    def second_fundamental_form(self, m):
        """``A`` and ``H`` of ``Sigma_{m+1}`` inside ``Sigma_m`` (frame block ``m+1..n-1``)."""
        A = self.dnu[m][..., m + 1:, m + 1:]
        A = 0.5 * (A + np.swapaxes(A, -1, -2))  # symmetric up to roundoff; make it exact
        return A, np.trace(A, axis1=-2, axis2=-1)

    def mean_curvature_vector_terms(self, m):
        """``tr_{Sigma_m} <nabla nu_k, .>`` for the normals ``k < m`` of ``Sigma_m``."""
        return [np.trace(self.dnu[k][..., m:, m:], axis1=-2, axis2=-1) for k in range(m)]

    def sigma_hessian(self, m, f):
        """Hessian of ``f`` restricted to the leaf ``Sigma_m`` (frame block ``m..n-1``)."""
        Hf = self.frame_hess(f)
        df = self.frame_d(f)
        out = Hf
        for k in range(m):
            out = out - self.dnu[k] * df[..., k, None, None]
        return out[..., m:, m:]

    def sigma_laplacian(self, m, f):
        return np.trace(self.sigma_hessian(m, f), axis1=-2, axis2=-1)

    def sigma_laplacian_div(self, m, f):
        """``div_{Sigma_m}(P_m grad f)``: the divergence route to the leaf Laplacian."""
        grad = contract("...ij,...j->...i", self.mj.ginv.truncate(f.order - 1), f.d())
        V = contract("...ij,...j->...i", self.P[m].truncate(grad.order), grad)
        return tangential_div(self.P[m], V, self.gamma).value

    def sigma_gradient(self, m, f):
        """Frame components of ``grad_{Sigma_m} f`` (block ``m..n-1``)."""
        return self.frame_d(f)[..., m:]

    @functools.cached_property
    def div_z(self):
        """Jets (order 1) of ``div_{Sigma_m} Z_m`` for ``m = 0..s-1``."""
        return [tangential_div(self.P[m], self.Z[m], self.gamma) for m in range(self.s)]

    def div_values(self):
        return np.stack([d.value for d in self.div_z], axis=-1)

    def divergence_derivative(self, m):
        """``nabla^{Sigma_m}_{nu_{m+1}} div_{Sigma_m} Z_m`` at ``p``."""
        return self.frame_d(self.div_z[m])[..., m]

    def ricci_sigma_normal(self, m):
        """``Ric_{Sigma_m}(nu_{m+1}, nu_{m+1})`` from the Gauss recursion."""
        R = self.induced_riemann[m]
        return sum(R[..., a, m, a, m] for a in range(m, self.n))

    def nu_grad_norm2(self, m):
        """``|nabla^{Sigma_m} (Z_m/|Z_m|)|^2`` over the tangent space of ``Sigma_m``."""
        K = self.dnu[m][..., m:, m:]
        return np.sum(K * K, axis=(-1, -2))


@functools.lru_cache(maxsize=128)
def slicing(scene: SlicingScene) -> Slicing:
    """Cached :class:`Slicing` of a scene (scenes are immutable)."""
    return Slicing(scene)


def _geo(scene_or_geo):
    return scene_or_geo if isinstance(scene_or_geo, Slicing) else slicing(scene_or_geo)


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class AdaptedFrame:
    normals: np.ndarray  # (s, n) ambient components of nu_1..nu_s
    tangents: np.ndarray  # (n - s, n)
    matrix: np.ndarray  # (n, n), columns are the frame vectors

    def gram(self, g):
        return self.matrix.T @ g @ self.matrix


def adapted_frame(scene) -> AdaptedFrame:
    geo = _geo(scene)
    F = geo.frame
    return AdaptedFrame(F[:, : geo.s].T.copy(), F[:, geo.s:].T.copy(), F.copy())


def normal_jet_fields(scene):
    """Jets (order 2) of the normals ``nu_1..nu_s`` and projections ``P_0..P_s``."""
    geo = _geo(scene)
    return list(geo.nu), list(geo.P)


@dataclass(frozen=True)
class ZCascade:
    z_norm: list  # jets |Z_0..Z_s|
    z_dir: list  # jets Z_m / |Z_m|, m < s
    z: list  # jets Z_m, m < s


def z_cascade(scene) -> ZCascade:
    geo = _geo(scene)
    return ZCascade(list(geo.z_norm), list(geo.nu), list(geo.Z))


@dataclass(frozen=True)
class SigmaOps:
    gradient: np.ndarray  # ambient components of grad_{Sigma_m} f
    laplacian: float
    hessian: np.ndarray  # frame block m..n-1


def sigma_ops(scene, m, f) -> SigmaOps:
    """Tangential gradient, Laplacian and Hessian of ``f`` on the leaf ``Sigma_m``."""
    geo = _geo(scene)
    if not 0 <= m <= geo.s:
        raise ValueError(f"level {m} outside 0..{geo.s}")
    if not isinstance(f, Jet):
        f = jet_eval(f, geo.scene.p, 3)
    if f.order < 2:
        raise InsufficientOrderError("sigma_ops needs a jet of order >= 2")
    grad = geo.P[m].value @ (geo.mj.ginv.value @ f.grad)
    hess = geo.sigma_hessian(m, f)
    return SigmaOps(grad, float(np.trace(hess)), hess)


def fundamental_forms(scene, m):
    """``(A, H)`` of ``Sigma_{m+1}`` in ``Sigma_m``; ``A(X, Y) = <nabla_X nu_{m+1}, Y>``."""
    geo = _geo(scene)
    if not 0 <= m < geo.s:
        raise ValueError(f"level {m} outside 0..{geo.s - 1}")
    A, H = geo.second_fundamental_form(m)
    return A.copy(), float(H)


def induced_curvature(scene, m):
    """Induced curvature data of ``Sigma_m``: ``Ric(nu_{m+1}, nu_{m+1})`` and, for surfaces, ``K``."""
    geo = _geo(scene)
    out = {}
    if m < geo.s:
        out["ricci_normal"] = float(geo.ricci_sigma_normal(m))
    if geo.n - m == 2:
        R = geo.induced_riemann[m]
        out["gauss_curvature"] = float(R[m, m + 1, m, m + 1])
    if m <= geo.s:
        out["riemann"] = geo.induced_riemann[m][m:, m:, m:, m:].copy()
    return out


def divergence_data(scene, m):
    """``(div_{Sigma_m} Z_m, nabla^{Sigma_m}_{nu_{m+1}} div_{Sigma_m} Z_m)`` at ``p``."""
    geo = _geo(scene)
    if not 0 <= m < geo.s:
        raise ValueError(f"level {m} outside 0..{geo.s - 1}")
    return float(geo.div_z[m].value), float(geo.divergence_derivative(m))


def _tangent_square(direction_covector, p):
    """``(l . (x - p))^2`` as a polynomial centered at ``p``."""
    n = len(p)
    terms = []
    for i in range(n):
        for j in range(i, n):
            c = direction_covector[i] * direction_covector[j] * (1.0 if i == j else 2.0)
            if c != 0.0:
                e = [0] * n
                e[i] += 1
                e[j] += 1
                terms.append((tuple(e), float(c)))
    return Polynomial(n, tuple(terms), tuple(p))


def enforce_pointwise_divfree(scene: SlicingScene, targets=None, tol=1e-12):
    """Add ``c_m (l.(x-p))^2`` to each ``u_m`` so that ``div_{Sigma_m} Z_m(p)`` hits ``targets``.

    The corrections have zero gradient at ``p``, so the frame, ``|Z_m|(p)`` and
    the comass are unchanged.  At fixed first derivatives every divergence at
    ``p`` is affine in the second derivatives of the ``u``'s, so the
    coefficients follow from one linear solve; the Jacobian is obtained from a
    single batched evaluation of the unit perturbations.
    """
    geo = slicing(scene)
    s = scene.s
    target = np.zeros(s) if targets is None else np.asarray(targets, dtype=float)
    res0 = geo.div_values()
    if np.max(np.abs(res0 - target)) <= tol:
        return scene
    p = np.asarray(scene.p)
    F = geo.frame
    g = geo.mj.g.value
    candidates = [F[:, a] for a in range(s, scene.n)]
    candidates += [F[:, a] + F[:, b] for a in range(s, scene.n) for b in range(a + 1, scene.n)]
    for direction in candidates:
        q = _tangent_square(g @ direction, p)
        qj = jet_eval(q, p, 3)
        onehot = np.eye(s + 1, s)[[s] + list(range(s))]  # row 0 is the base scene
        batched = [geo.u[m] + qj * onehot[:, m] for m in range(s)]
        R = Slicing(scene, u_jets=batched).div_values()
        J = (R[1:] - R[0]).T
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
            continue
        c = np.linalg.solve(J, target - R[0])
        new_u = [u if c[m] == 0.0 else Sum((u, Scale(float(c[m]), q))) for m, u in enumerate(scene.u)]
        adjusted = scene.with_u(new_u)
        if np.max(np.abs(slicing(adjusted).div_values() - target)) <= 1e-10 * max(1.0, float(np.max(np.abs(target)))):
            return adjusted
    raise SolverError("no correction direction gave a solvable divergence system")


@dataclass(frozen=True)
class YFields:
    vectors: np.ndarray  # (k, n) ambient components
    norms: np.ndarray
    gram: np.ndarray
    z0: float


def y_fields(scene) -> YFields:
    """``Y_m = Z_m |Z_m|^{-1} |Z_0|`` at ``p`` (and ``Y_{n-1}`` along ``Sigma_{n-1}`` when ``s = n-1``)."""
    geo = _geo(scene)
    z0 = float(geo.z_norm[0].value)
    vecs = [nu.value * z0 for nu in geo.nu]
    if geo.s == geo.n - 1:
        vecs.append(geo.frame[:, -1] * z0)
    Y = np.array(vecs)
    g = geo.mj.g.value
    gram = Y @ g @ Y.T
    return YFields(Y, np.sqrt(np.diag(gram)), gram, z0)


@dataclass(frozen=True)
class WitnessResult:
    divergence_out: float
    expected: float
    residual: float
    relative: float
    divergence_in: float
    w_scale: float


def lemma_divergence_witness(scene, m, seed=0, delta=0.0, field=None) -> WitnessResult:
    """Check ``div_{Sigma_m}(|grad_{Sigma_m} u_m| W) = |grad_{Sigma_m} u_m| div_{Sigma_{m+1}} W``.

    ``W`` is the projection onto the leaves of ``Sigma_{m+1}`` of an ambient
    field (random polynomial by default, or ``field``: a list of ``n`` specs),
    shifted along the radial field so that ``div_{Sigma_{m+1}} W(p) = delta``.
    """
    geo = _geo(scene)
    n = geo.n
    if not 0 <= m < geo.s:
        raise ValueError(f"level {m} outside 0..{geo.s - 1}")
    p = np.asarray(geo.scene.p)
    if field is None:
        rng = np.random.default_rng([int(seed), m, n])
        monos = [e for e in itertools.product(range(3), repeat=n) if sum(e) <= 2]
        field = [Polynomial(n, tuple((e, float(rng.uniform(-1, 1))) for e in monos), tuple(p)) for _ in range(n)]
    V = stack([jet_eval(f, p, 3) for f in field], -1)
    radial = stack([jet_eval(Polynomial(n, (((0,) * i + (1,) + (0,) * (n - i - 1), 1.0),), tuple(p)), p, 3)
                    for i in range(n)], -1)
    P1, P0 = geo.P[m + 1], geo.P[m]
    WV = contract("...ij,...j->...i", P1, V.truncate(2))
    WR = contract("...ij,...j->...i", P1, radial.truncate(2))
    dV = tangential_div(P1, WV, geo.gamma).value
    dR = tangential_div(P1, WR, geo.gamma).value
    c = (delta - dV) / dR
    W = WV + WR * c
    div_in = float(tangential_div(P1, W, geo.gamma).value)
    out = float(tangential_div(P0, W * geo.vnorm[m].expand(-1), geo.gamma).value)
    expected = float(geo.vnorm[m].value) * div_in
    scale = max(1.0, float(np.max(np.abs(W.grad))), float(np.max(np.abs(W.value))))
    return WitnessResult(out, expected, out - expected, abs(out - expected) / scale, div_in, scale)


@dataclass(frozen=True)
class PDEResiduals:
    residuals: np.ndarray  # log-gradient form
    residuals_bare: np.ndarray  # with grad|.| in place of grad log|.|
    normalization: Normalization


def pde_residuals(scene) -> PDEResiduals:
    """Residuals of the divergence system written purely in terms of the ``u``'s."""
    geo = _geo(scene)
    s = geo.s
    top = geo.normalization is Normalization.UNIT_TOP
    res, bare = [], []
    for m in range(s):
        lap = geo.sigma_laplacian(m, geo.u[m])
        grad_u = geo.sigma_gradient(m, geo.u[m])
        ks = range(m + 1, s) if top else range(0, m + 1)
        sign = 1.0 if top else -1.0
        acc = lap
        acc_bare = lap
        for k in ks:
            acc = acc + sign * np.sum(grad_u * geo.sigma_gradient(m, geo.log_vnorm[k]), axis=-1)
            acc_bare = acc_bare + sign * np.sum(grad_u * geo.sigma_gradient(m, geo.vnorm[k]), axis=-1)
        res.append(acc)
        bare.append(acc_bare)
    return PDEResiduals(np.array(res, dtype=float), np.array(bare, dtype=float), geo.normalization)


@dataclass(frozen=True)
class LevelGeometry:
    level: int
    z_norm: float
    z_next: float
    A: np.ndarray
    H: float
    div_z: float
    div_z_deriv: float
    ricci_normal: float
    nu_grad_norm2: float
    grad_log_z_norm2: float  # |grad_{Sigma_m} log|Z_m||^2
    grad_log_z_next_norm2: float  # |grad_{Sigma_{m+1}} log|Z_{m+1}||^2
    cross_log: float  # <grad_{Sigma_{m+1}} log|grad u_m|, grad_{Sigma_{m+1}} log|Z_{m+1}|>
    cross_bare: float  # same with |Z_{m+1}| in place of log|Z_{m+1}|


@dataclass(frozen=True)
class SliceGeometry:
    levels: list
    z_top: float
    grad_log_z_top_norm2: float


def slice_geometry(scene) -> SliceGeometry:
    geo = _geo(scene)
    levels = []
    for m in range(geo.s):
        A, H = geo.second_fundamental_form(m)
        w = geo.sigma_gradient(m + 1, geo.log_vnorm[m])
        a_log = geo.sigma_gradient(m + 1, geo.log_z[m + 1])
        a_bare = geo.sigma_gradient(m + 1, geo.z_norm[m + 1])
        levels.append(LevelGeometry(
            level=m,
            z_norm=float(geo.z_norm[m].value),
            z_next=float(geo.z_norm[m + 1].value),
            A=A,
            H=float(H),
            div_z=float(geo.div_z[m].value),
            div_z_deriv=float(geo.divergence_derivative(m)),
            ricci_normal=float(geo.ricci_sigma_normal(m)),
            nu_grad_norm2=float(geo.nu_grad_norm2(m)),
            grad_log_z_norm2=float(np.sum(geo.sigma_gradient(m, geo.log_z[m]) ** 2)),
            grad_log_z_next_norm2=float(np.sum(a_log ** 2)),
            cross_log=float(np.sum(w * a_log)),
            cross_bare=float(np.sum(w * a_bare)),
        ))
    top = geo.sigma_gradient(geo.s, geo.log_z[geo.s])
    return SliceGeometry(levels, float(geo.z_norm[geo.s].value), float(np.sum(top ** 2)))
