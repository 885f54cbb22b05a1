"""Ambient curvature at a point from metric jets.

Conventions: ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`` and
``Rm(X, Y, Z, W) = <R(X, Y)W, Z>``, so that ``Rm(e, f, e, f)`` is the sectional
curvature of an orthonormal pair and the round sphere has positive curvature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrameError
from .fields import MetricJet, eval_metric
from .jetcalc import contract, linear

__all__ = [
    "CurvatureAtPoint",
    "christoffel",
    "curvature_at",
    "curvature_symmetry_defects",
    "frame_components",
    "intermediate_curvature",
    "scalar_curvature",
    "sectional",
]


def christoffel(mj: MetricJet):
    """Jet of ``Gamma^k_ij`` (value axes ``[k, i, j]``), one order below the metric jet."""
    dg = mj.g.d()  # [i, j, l] = d_l g_ij
    first = (linear("...jli->...lij", dg) + linear("...ilj->...lij", dg) - linear("...ijl->...lij", dg)) * 0.5
    return contract("...kl,...lij->...kij", mj.ginv.truncate(first.order), first)


@dataclass(frozen=True)
class CurvatureAtPoint:
    riemann: np.ndarray  # Rm_ijkl, all indices lowered
    ricci: np.ndarray
    scal: np.ndarray
    g: np.ndarray  # metric at the point, for inner products

    @property
    def dim(self):
        return self.g.shape[-1]


def curvature_at(mj: MetricJet) -> CurvatureAtPoint:
    gamma = christoffel(mj)
    G = gamma.value
    dG = gamma.d().value  # [l, j, k, i] = d_i Gamma^l_jk
    E = np.einsum
    rup = (E("...ljki->...lijk", dG) - E("...likj->...lijk", dG)
           + E("...lim,...mjk->...lijk", G, G) - E("...ljm,...mik->...lijk", G, G))
    g = mj.g.value
    gi = mj.ginv.value
    rm = E("...km,...mijl->...ijkl", g, rup)
    ric = E("...ik,...ijkl->...jl", gi, rm)
    scal = E("...jl,...jl->...", gi, ric)
    return CurvatureAtPoint(rm, ric, scal, g)


def scalar_curvature(metric, points, chunk=4096):
    """Scalar curvature of a :class:`MetricField` at many points (shape ``B + (n,)``)."""
    points = np.asarray(points, dtype=float)
    flat = points.reshape(-1, points.shape[-1])
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], chunk):
        sl = slice(start, start + chunk)
        out[sl] = curvature_at(eval_metric(metric, flat[sl], order=2)).scal
    return out.reshape(points.shape[:-1])


def curvature_symmetry_defects(c: CurvatureAtPoint):
    """Maximal violations of the algebraic Riemann symmetries, relative to tensor scale."""
    R = c.riemann
    E = np.einsum
    scale = max(1.0, float(np.max(np.abs(R))))
    defects = {
        "antisym_first": np.max(np.abs(R + E("...jikl->...ijkl", R))),
        "antisym_last": np.max(np.abs(R + E("...ijlk->...ijkl", R))),
        "pair_symmetry": np.max(np.abs(R - E("...klij->...ijkl", R))),
        "bianchi": np.max(np.abs(R + E("...iklj->...ijkl", R) + E("...iljk->...ijkl", R))),
    }
    gi = np.linalg.inv(c.g)
    trace = E("...ik,...jl,...ijkl->...", gi, gi, R)
    defects["trace"] = np.max(np.abs(trace - c.scal)) / max(1.0, float(np.max(np.abs(c.scal))))
    return {k: float(v) / (1.0 if k == "trace" else scale) for k, v in defects.items()}


def frame_components(c: CurvatureAtPoint, frame):
    """``Rm(F_a, F_b, F_c, F_d)`` for the columns ``F_a`` of ``frame``."""
    F = np.asarray(frame, dtype=float)
    return np.einsum("...ijkl,...ia,...jb,...kc,...ld->...abcd", c.riemann, F, F, F, F)


def _check_orthonormal(c, frame, tol=1e-10):
    F = np.asarray(frame, dtype=float)
    gram = np.einsum("...ia,...ij,...jb->...ab", F, c.g, F)
    dev = float(np.max(np.abs(gram - np.eye(F.shape[-1]))))
    if dev > tol:
        raise FrameError(f"frame is not orthonormal (Gram deviation {dev:.3e})")


def intermediate_curvature(c: CurvatureAtPoint, frame, m):
    """``C_m(e_1..e_m) = sum_{p<=m} sum_{q>p} Rm(e_p, e_q, e_p, e_q)`` for an orthonormal frame."""
    n = c.dim
    if not 1 <= m <= n - 1:
        raise ValueError(f"need 1 <= m <= n-1, got m={m}")
    _check_orthonormal(c, frame)
    Rf = frame_components(c, frame)
    total = 0.0
    for p in range(m):
        for q in range(p + 1, n):
            total = total + Rf[..., p, q, p, q]
    return total


def sectional(c: CurvatureAtPoint, e, f):
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    g = c.g
    ee = e @ g @ e
    ff = f @ g @ f
    ef = e @ g @ f
    area2 = ee * ff - ef * ef
    if area2 <= 1e-14 * ee * ff:
        raise FrameError("vectors span a degenerate plane")
    return float(np.einsum("ijkl,i,j,k,l->", c.riemann, e, f, e, f) / area2)
