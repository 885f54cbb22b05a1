"""Pointwise residuals of the slicing Bochner identities and inequalities.

Every equality is evaluated two-sided: the left side only uses Laplacians and
gradients of the ambient ``|Z_m|`` jets, the right side only uses curvature,
second fundamental forms and divergence data.  Nothing is moved across before
comparison.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .jetcalc import contract
from .errors import PreconditionError
from .fields import Normalization
from .slicing import Slicing, cov_deriv, slicing

__all__ = [
    "EQUALITY_TOLERANCE",
    "INEQUALITY_TOLERANCE",
    "GLOBAL_IDENTITIES",
    "INEQUALITIES",
    "LEVEL_IDENTITIES",
    "IdentityName",
    "IdentityReport",
    "applicable_identities",
    "check_global_identity",
    "check_inequality",
    "check_level_identity",
    "conditioning",
    "evaluate",
]

EQUALITY_TOLERANCE = 1e-8
INEQUALITY_TOLERANCE = 1e-9
DIVERGENCE_PRECONDITION = 1e-9


class IdentityName(str, enum.Enum):
    LemmaH = "LemmaH"
    LemmaHGeneral = "LemmaHGeneral"
    LemmaAH = "LemmaAH"
    LemmaMain = "LemmaMain"
    CorollaryMain = "CorollaryMain"
    TheoremMainGeneral = "TheoremMainGeneral"
    TheoremMainInequality = "TheoremMainInequality"
    TheoremSpinorsCompensated = "TheoremSpinorsCompensated"
    TheoremIntermediate = "TheoremIntermediate"
    IteratedGaussFull = "IteratedGaussFull"
    IteratedGaussCodim2 = "IteratedGaussCodim2"
    SternLocal = "SternLocal"
    ClassicalBochner = "ClassicalBochner"


LEVEL_IDENTITIES = (IdentityName.LemmaH, IdentityName.LemmaHGeneral, IdentityName.LemmaAH,
                    IdentityName.LemmaMain, IdentityName.CorollaryMain)
GLOBAL_IDENTITIES = (IdentityName.TheoremMainGeneral, IdentityName.TheoremIntermediate,
                     IdentityName.IteratedGaussFull, IdentityName.IteratedGaussCodim2,
                     IdentityName.SternLocal, IdentityName.ClassicalBochner)
INEQUALITIES = (IdentityName.TheoremMainInequality, IdentityName.TheoremSpinorsCompensated)


@dataclass
class IdentityReport:
    name: IdentityName
    level: int | None
    lhs: float
    rhs: float
    residual: float
    relative: float
    tolerance: float
    passed: bool
    variant: str = ""
    extras: dict = field(default_factory=dict)
    seed: int | None = None

    @classmethod
    def equality(cls, name, level, lhs, rhs, tolerance, variant="", extras=None, seed=None):
        lhs, rhs = float(lhs), float(rhs)
        res = lhs - rhs
        rel = abs(res) / max(1.0, abs(lhs), abs(rhs))
        return cls(IdentityName(name), level, lhs, rhs, res, rel, tolerance, bool(rel <= tolerance),
                   variant, dict(extras or {}), seed)

    @classmethod
    def inequality(cls, name, lhs, rhs, tolerance, variant="", extras=None, seed=None, extra_ok=True):
        lhs, rhs = float(lhs), float(rhs)
        res = lhs - rhs
        rel = abs(res) / max(1.0, abs(lhs), abs(rhs))
        return cls(IdentityName(name), None, lhs, rhs, res, rel, tolerance,
                   bool(res >= -tolerance and extra_ok), variant, dict(extras or {}), seed)

    def to_dict(self):
        d = asdict(self)
        d["name"] = self.name.value
        d["extras"] = {k: _jsonable(v) for k, v in self.extras.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _geo(scene):
    return scene if isinstance(scene, Slicing) else slicing(scene)


def conditioning(geo):
    """Scale factor ``max(1, max|A|, 1/comass)`` applied to the default tolerances."""
    amax = max((float(np.max(np.abs(geo.second_fundamental_form(m)[0]), initial=0.0))
                for m in range(geo.s)), default=0.0)
    comass = float(np.prod([v.value for v in geo.vnorm]))
    return max(1.0, amax, 1.0 / comass)


def _require_divfree(geo):
    div = geo.div_values()
    worst = float(np.max(np.abs(div)))
    if worst > DIVERGENCE_PRECONDITION * conditioning(geo):
        raise PreconditionError(
            f"div_Sigma_m Z_m(p) does not vanish (max {worst:.3e}); enforce the divergence condition first")


# ---------------------------------------------------------------------------
# shared terms


def _level_terms(geo, m):
    """All per-level ingredients at ``p``; names describe the geometric object."""
    A, H = geo.second_fundamental_form(m)
    z = float(geo.z_norm[m].value)
    w = geo.sigma_gradient(m + 1, geo.log_vnorm[m])
    a_log = geo.sigma_gradient(m + 1, geo.log_z[m + 1])
    a_bare = geo.sigma_gradient(m + 1, geo.z_norm[m + 1])
    return dict(
        A2=float(np.sum(A * A)),
        H=float(H),
        z=z,
        div=float(geo.div_z[m].value),
        div_term=float(geo.divergence_derivative(m)) / z,
        ricci=float(geo.ricci_sigma_normal(m)),
        nu_grad2=float(geo.nu_grad_norm2(m)),
        cross_log=float(np.sum(w * a_log)),
        cross_bare=float(np.sum(w * a_bare)),
        grad_log_next2=float(np.sum(a_log ** 2)),
        grad_log_z2=float(np.sum(geo.sigma_gradient(m, geo.log_z[m]) ** 2)),
        dnu_log_z=float(geo.frame_d(geo.log_z[m])[m]),
        lap_log_z=float(geo.sigma_laplacian(m, geo.log_z[m])),
        lap_log_next=float(geo.sigma_laplacian(m + 1, geo.log_z[m + 1])),
    )


def _summed_gauss(geo):
    """``sum_m Ric_{Sigma_m}(nu_{m+1}, nu_{m+1}) + |A|^2/2 - H^2/2``."""
    total = 0.0
    for m in range(geo.s):
        A, H = geo.second_fundamental_form(m)
        total += float(geo.ricci_sigma_normal(m)) + 0.5 * float(np.sum(A * A)) - 0.5 * float(H) ** 2
    return total


def _gauss_curvature_top(geo):
    m = geo.n - 2
    return float(geo.induced_riemann[m][m, m + 1, m, m + 1])


def _scal(geo):
    return float(geo.curvature.scal)


def _bochner_sum_sides(geo):
    """Both sides of the summed corollary, ``2 log``-Laplacians vs. curvature and slack terms."""
    s = geo.s
    z0 = float(geo.z_norm[0].value)
    lap_z0 = float(geo.sigma_laplacian(0, geo.z_norm[0]))
    lap_top = float(geo.sigma_laplacian(s, geo.log_z[s]))
    div_terms = sum(float(geo.divergence_derivative(m)) / float(geo.z_norm[m].value) for m in range(s))
    lhs = 2.0 * lap_z0 / z0 - 2.0 * lap_top - 2.0 * div_terms
    nu_terms = sum(float(geo.nu_grad_norm2(m)) for m in range(s))
    top_grad2 = float(np.sum(geo.sigma_gradient(s, geo.log_z[s]) ** 2))
    bottom_grad2 = float(np.sum(geo.sigma_gradient(0, geo.log_z[0]) ** 2))
    return lhs, nu_terms, top_grad2, bottom_grad2, div_terms


# ---------------------------------------------------------------------------
# level identities


def check_level_identity(scene, m, name, tolerance=None) -> IdentityReport:
    geo = _geo(scene)
    name = IdentityName(name)
    if name not in LEVEL_IDENTITIES:
        raise ValueError(f"{name.value} is not a level identity")
    if not 0 <= m < geo.s:
        raise ValueError(f"level {m} outside 0..{geo.s - 1}")
    if name is not IdentityName.LemmaHGeneral:
        _require_divfree(geo)
    tol = (EQUALITY_TOLERANCE if tolerance is None else tolerance) * conditioning(geo)
    t = _level_terms(geo, m)
    seed = geo.scene.seed

    if name is IdentityName.LemmaHGeneral:
        return IdentityReport.equality(name, m, -t["dnu_log_z"], t["H"] - t["div"] / t["z"], tol,
                                       "no divergence hypothesis; the -|Z_m|^-1 div term is kept",
                                       {"div": t["div"]}, seed)

    if name is IdentityName.LemmaH:
        # second part: |A|^2 through the leaf Hessian of u_m
        vm = float(geo.vnorm[m].value)
        hess = geo.sigma_hessian(m, geo.u[m])
        dlog = geo.sigma_gradient(m, geo.log_vnorm[m])
        a2_rhs = float(np.sum(hess * hess)) / vm ** 2 - 2.0 * float(np.sum(dlog ** 2)) + float(dlog[0]) ** 2
        second = IdentityReport.equality(name, m, t["A2"], a2_rhs, tol)
        rep = IdentityReport.equality(name, m, t["H"], -t["dnu_log_z"], tol,
                                      "mean curvature part; the |A|^2 part is in extras",
                                      {"A2_lhs": second.lhs, "A2_rhs": second.rhs,
                                       "A2_relative": second.relative}, seed)
        rep.passed = rep.passed and second.passed
        return rep

    if name is IdentityName.LemmaAH:
        lhs = t["A2"] - t["H"] ** 2
        base = t["nu_grad2"] + t["grad_log_next2"] - t["grad_log_z2"]
        rhs_log = base + 2.0 * t["cross_log"]
        rhs_bare = base + 2.0 * t["cross_bare"]
        bare = IdentityReport.equality(name, m, lhs, rhs_bare, tol)
        return IdentityReport.equality(
            name, m, lhs, rhs_log, tol,
            "cross term with grad log|Z_{m+1}| (the bare |Z_{m+1}| form is in extras)",
            {"rhs_bare": bare.rhs, "relative_bare": bare.relative, "passed_bare": bare.passed}, seed)

    lhs = t["lap_log_z"] - t["lap_log_next"]
    if name is IdentityName.LemmaMain:
        rhs = t["ricci"] + t["A2"] - t["H"] ** 2 + t["div_term"] - t["cross_log"]
        return IdentityReport.equality(name, m, lhs, rhs, tol, "", {}, seed)

    # CorollaryMain
    rhs = (t["ricci"] + 0.5 * t["A2"] - 0.5 * t["H"] ** 2 + t["div_term"]
           + 0.5 * t["nu_grad2"] + 0.5 * t["grad_log_next2"] - 0.5 * t["grad_log_z2"])
    return IdentityReport.equality(name, m, lhs, rhs, tol, "|grad nu_m|^2 read as the unit direction of Z_m",
                                   {}, seed)


# ---------------------------------------------------------------------------
# global identities


def _require_s(geo, name, s_required, extra=""):
    if geo.s != s_required:
        raise PreconditionError(f"{name.value} needs s = {s_required}{extra}, got s = {geo.s}")


def check_global_identity(scene, name, tolerance=None) -> IdentityReport:
    geo = _geo(scene)
    name = IdentityName(name)
    if name not in GLOBAL_IDENTITIES:
        raise ValueError(f"{name.value} is not a global identity")
    n, s = geo.n, geo.s
    seed = geo.scene.seed
    if name is IdentityName.TheoremMainGeneral:
        _require_s(geo, name, n - 1)
    elif name in (IdentityName.IteratedGaussCodim2, IdentityName.SternLocal):
        _require_s(geo, name, n - 2)
    elif name is IdentityName.IteratedGaussFull:
        _require_s(geo, name, n - 1)
    elif name is IdentityName.ClassicalBochner:
        _require_s(geo, name, 1)
        if geo.normalization is not Normalization.UNIT_TOP:
            raise PreconditionError("ClassicalBochner needs the unit_top normalization")
    if name is IdentityName.SternLocal and geo.normalization is not Normalization.UNIT_TOP:
        raise PreconditionError("SternLocal is evaluated with |Z_{n-2}| = 1 (unit_top)")
    if name not in (IdentityName.IteratedGaussFull, IdentityName.IteratedGaussCodim2):
        _require_divfree(geo)
    tol = (EQUALITY_TOLERANCE if tolerance is None else tolerance) * conditioning(geo)

    if name is IdentityName.IteratedGaussFull:
        return IdentityReport.equality(name, None, _summed_gauss(geo), 0.5 * _scal(geo), tol, "", {}, seed)
    if name is IdentityName.IteratedGaussCodim2:
        return IdentityReport.equality(name, None, _summed_gauss(geo),
                                       0.5 * _scal(geo) - _gauss_curvature_top(geo), tol, "", {}, seed)

    if name in (IdentityName.TheoremMainGeneral, IdentityName.SternLocal):
        lhs, nu_terms, top2, bottom2, _ = _bochner_sum_sides(geo)
        curv = _scal(geo)
        notes = "correction terms sum_m |Z_m|^-1 d_nu div kept on the left"
        extras = {}
        if name is IdentityName.SternLocal:
            K = _gauss_curvature_top(geo)
            curv -= 2.0 * K
            notes += "; normalization |Z_{n-2}| = 1 (stated hypothesis reads |Z_{s-2}| = 1)"
            extras["gauss_curvature"] = K
        return IdentityReport.equality(name, None, lhs, curv + nu_terms + top2 + bottom2, tol, notes,
                                       extras, seed)

    if name is IdentityName.TheoremIntermediate:
        lhs = float(geo.sigma_laplacian(0, geo.log_z[0])) - float(geo.sigma_laplacian(s, geo.log_z[s]))
        R = geo.riemann_frame
        C = sum(float(R[p, q, p, q]) for p in range(s) for q in range(p + 1, n))
        extrinsic = 0.0
        for k in range(1, s):
            # second fundamental form of Sigma_k in Sigma_{k-1}, in ambient frame indices
            A = geo.dnu[k - 1]
            for p in range(k, s):
                for q in range(p + 1, n):
                    extrinsic += float(A[p, p] * A[q, q] - A[p, q] ** 2)
        rhs = C + extrinsic
        for m in range(s):
            t = _level_terms(geo, m)
            rhs += t["A2"] - t["H"] ** 2 + t["div_term"] - t["cross_log"]
        return IdentityReport.equality(name, None, lhs, rhs, tol, "", {"intermediate_curvature": C}, seed)

    # ClassicalBochner: |grad u| Lap |grad u| = Ric(grad u, grad u) + |Hess u|^2 - |grad |grad u||^2
    #                   + <grad u, grad Lap u>
    vn = geo.vnorm[0]
    v = float(vn.value)
    lhs = v * float(geo.sigma_laplacian(0, vn))
    grad_u = geo.grad_u[0].value
    ric = float(grad_u @ geo.curvature.ricci @ grad_u)
    hess = geo.frame_hess(geo.u[0])
    dv = geo.frame_d(vn)
    lap_u = contract("...ij,...ji->...", cov_deriv(geo.grad_u[0], geo.gamma), _identity_jet(geo))
    correction = float(np.einsum("i,i->", grad_u, lap_u.grad))
    rhs = ric + float(np.sum(hess * hess)) - float(np.sum(dv ** 2)) + correction
    return IdentityReport.equality(name, None, lhs, rhs, tol, "<grad u, grad Lap u> kept on the right",
                                   {"lap_u": float(lap_u.value)}, seed)


def _identity_jet(geo):
    return geo.P[0].truncate(1)


# ---------------------------------------------------------------------------
# inequalities


def check_inequality(scene, name, tolerance=None) -> IdentityReport:
    geo = _geo(scene)
    name = IdentityName(name)
    if name not in INEQUALITIES:
        raise ValueError(f"{name.value} is not an inequality")
    _require_s(geo, name, geo.n - 1)
    if name is IdentityName.TheoremSpinorsCompensated and geo.normalization is not Normalization.UNIT_TOP:
        raise PreconditionError("TheoremSpinorsCompensated needs the unit_top normalization")
    _require_divfree(geo)
    cond = conditioning(geo)
    tol = (INEQUALITY_TOLERANCE if tolerance is None else tolerance) * cond
    seed = geo.scene.seed
    s = geo.s
    nu_terms = [float(geo.nu_grad_norm2(m)) for m in range(s)]
    div_terms = [float(geo.divergence_derivative(m)) / float(geo.z_norm[m].value) for m in range(s)]
    z0 = float(geo.z_norm[0].value)
    lap_z0 = float(geo.sigma_laplacian(0, geo.z_norm[0]))

    if name is IdentityName.TheoremMainInequality:
        lhs = 2.0 * lap_z0 / z0 - 2.0 * float(geo.sigma_laplacian(s, geo.log_z[s]))
        rhs = (_scal(geo) + float(np.sum(geo.sigma_gradient(0, geo.log_z[0]) ** 2)) + 2.0 * sum(div_terms))
        top2 = float(np.sum(geo.sigma_gradient(s, geo.log_z[s]) ** 2))
        dropped = nu_terms + [top2]
        variant = "pointwise: sum |Z_m|^-1 d_nu div terms carried to the right"
    else:
        Z0 = geo.Z[0]
        DZ = cov_deriv(Z0, geo.gamma).value  # [i, j] = (nabla_j Z)^i
        g, gi = geo.mj.g.value, geo.mj.ginv.value
        gradZ2 = float(np.einsum("ik,jl,ij,kl->", g, gi, DZ, DZ))
        lhs = 2.0 * lap_z0
        rhs = gradZ2 / z0 + _scal(geo) * z0 + 2.0 * z0 * sum(div_terms)
        dropped = [z0 * x for x in nu_terms[1:]]
        variant = "pointwise: 2|Z_0| sum |Z_m|^-1 d_nu div carried to the right; |Z_{n-1}| = 1"
    slack = sum(dropped)
    rel_dec = abs((lhs - rhs) - slack) / max(1.0, abs(lhs), abs(rhs))
    dec_ok = rel_dec <= EQUALITY_TOLERANCE * cond and min(dropped) >= -1e-10
    return IdentityReport.inequality(
        name, lhs, rhs, tol, variant,
        {"slack_terms": dropped, "slack": slack, "decomposition_relative": rel_dec,
         "decomposition_ok": bool(dec_ok)},
        seed, extra_ok=dec_ok)


# ---------------------------------------------------------------------------


def applicable_identities(n, s, normalization):
    """Names checkable on a scene with the given shape (level identities expand per level)."""
    normalization = Normalization(normalization)
    out = list(LEVEL_IDENTITIES)
    if s == n - 1:
        out += [IdentityName.TheoremMainGeneral, IdentityName.IteratedGaussFull,
                IdentityName.TheoremMainInequality]
        if normalization is Normalization.UNIT_TOP:
            out.append(IdentityName.TheoremSpinorsCompensated)
    if s == n - 2:
        out.append(IdentityName.IteratedGaussCodim2)
        if normalization is Normalization.UNIT_TOP:
            out.append(IdentityName.SternLocal)
    out.append(IdentityName.TheoremIntermediate)
    if s == 1 and normalization is Normalization.UNIT_TOP:
        out.append(IdentityName.ClassicalBochner)
    return out


def evaluate(scene, name, tolerance=None):
    """All reports for one identity on a divergence-enforced scene (one per level for level identities)."""
    name = IdentityName(name)
    if name in LEVEL_IDENTITIES:
        return [check_level_identity(scene, m, name, tolerance) for m in range(_geo(scene).s)]
    if name in INEQUALITIES:
        return [check_inequality(scene, name, tolerance)]
    return [check_global_identity(scene, name, tolerance)]
