"""Harmonic circle-valued functions on a perturbed flat 3-torus and the level-set inequality.

The domain is ``[0, 2 pi)^3`` with a periodic metric.  ``u = x_0 + w`` with ``w``
periodic solves ``div(sqrt(g) g^{ij} d_j u) = 0``; its levels ``u = t mod 2 pi``
are closed surfaces whose Euler characteristics are averaged against the
curvature integral ``int scal |du| dV``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, cg

from .curvature import scalar_curvature
from .errors import SolverError, TopologyError
from .fields import MetricField, eval_metric
from .jetcalc import TrigPolynomial

__all__ = [
    "LevelSurfaceMesh",
    "SternReport",
    "TorusGrid",
    "box_level_mesh",
    "level_euler_characteristic",
    "level_mesh",
    "scalar_integral",
    "solve_harmonic_torus",
    "stern_metric",
    "stern_report",
    "write_off",
]

TWO_PI = 2.0 * np.pi


def stern_metric(epsilon, kind="conformal"):
    """Default experiment metric: a two-mode periodic perturbation of the flat torus."""
    if kind == "flat" or epsilon == 0.0:
        return MetricField.flat(3)
    if kind != "conformal":
        raise ValueError(f"unknown experiment metric kind {kind!r}")
    phi = TrigPolynomial(3, (((1, 1, 0), float(epsilon), 0.0), ((0, 1, 1), 0.0, float(epsilon))))
    return MetricField.conformal(phi)


@dataclass
class TorusGrid:
    metric: MetricField
    N: int
    g: np.ndarray = field(repr=False)  # (N, N, N, 3, 3)
    sqrtg: np.ndarray = field(repr=False)
    coeff: np.ndarray = field(repr=False)  # sqrt(g) g^{ij}

    @classmethod
    def build(cls, metric: MetricField, N: int):
        if metric.dim != 3:
            raise ValueError("the torus experiment is three-dimensional")
        if not 8 <= N <= 256:
            raise ValueError(f"grid resolution {N} outside 8..256")
        mj = eval_metric(metric, cls.nodes_for(N), order=0)
        g = mj.g.value
        sqrtg = np.sqrt(np.linalg.det(g))
        return cls(metric, N, g, sqrtg, sqrtg[..., None, None] * mj.ginv.value)

    @staticmethod
    def nodes_for(N):
        x = np.arange(N) * (TWO_PI / N)
        return np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)

    @property
    def h(self):
        return TWO_PI / self.N

    @property
    def nodes(self):
        return self.nodes_for(self.N)

    @property
    def x0(self):
        return np.arange(self.N)[:, None, None] * self.h + np.zeros((self.N,) * 3)


def _fwd(f, i, h):
    return (np.roll(f, -1, axis=i) - f) / h


def _bwd(f, i, h):
    return (f - np.roll(f, 1, axis=i)) / h


def _apply_operator(grid, w):
    """``sum_ij (D_i^- a^ij D_j^+ + D_i^+ a^ij D_j^-) w / 2``: symmetric, negative semidefinite."""
    h, A = grid.h, grid.coeff
    fw = [_fwd(w, j, h) for j in range(3)]
    bw = [_bwd(w, j, h) for j in range(3)]
    out = np.zeros_like(w)
    for i in range(3):
        flux_f = sum(A[..., i, j] * fw[j] for j in range(3))
        flux_b = sum(A[..., i, j] * bw[j] for j in range(3))
        out += _bwd(flux_f, i, h) + _fwd(flux_b, i, h)
    return 0.5 * out


def _source(grid):
    """``-L x_0``: the one-sided differences of the linear part are exactly ``delta_{j0}``."""
    h, A = grid.h, grid.coeff
    return -sum(0.5 * (_bwd(A[..., i, 0], i, h) + _fwd(A[..., i, 0], i, h)) for i in range(3))


@dataclass
class HarmonicSolution:
    grid: TorusGrid
    w: np.ndarray  # periodic correction, mean zero
    residual: float  # relative discrete residual
    iterations: int

    @property
    def u(self):
        return self.grid.x0 + self.w

    def gradient(self):
        """Covector ``du`` at nodes by central differences of the correction."""
        h = self.grid.h
        dw = np.stack([0.5 * (_fwd(self.w, j, h) + _bwd(self.w, j, h)) for j in range(3)], axis=-1)
        dw[..., 0] += 1.0
        return dw


def solve_harmonic_torus(grid: TorusGrid, rtol=1e-10, maxiter=2000) -> HarmonicSolution:
    """Conservative finite-difference solve for ``u = x_0 + w``; CG with an FFT flat-Laplacian preconditioner."""
    N, h = grid.N, grid.h
    b = _source(grid)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return HarmonicSolution(grid, np.zeros((N,) * 3), 0.0, 0)
    k = np.fft.fftfreq(N, d=1.0 / N)
    sym = (4.0 / h ** 2) * np.sin(0.5 * k * h) ** 2
    lam = sym[:, None, None] + sym[None, :, None] + sym[None, None, :]
    lam *= float(np.mean(np.trace(grid.coeff, axis1=-2, axis2=-1))) / 3.0
    lam[0, 0, 0] = np.inf

    def prec(r):
        r = r.reshape((N,) * 3)
        return np.real(np.fft.ifftn(np.fft.fftn(r) / lam)).ravel()

    size = N ** 3
    A = LinearOperator((size, size), matvec=lambda x: -_apply_operator(grid, x.reshape((N,) * 3)).ravel(),
                       dtype=float)
    M = LinearOperator((size, size), matvec=prec, dtype=float)
    iterations = [0]

    def count(_):
        iterations[0] += 1

    x, info = cg(A, -b.ravel(), rtol=rtol * 0.5, atol=0.0, maxiter=maxiter, M=M, callback=count)
    w = x.reshape((N,) * 3)
    w -= w.mean()
    residual = float(np.linalg.norm(_apply_operator(grid, w) - b)) / bnorm
    if info != 0 or residual > rtol:
        raise SolverError(f"harmonic solve did not converge (info={info}, relative residual {residual:.3e})")
    return HarmonicSolution(grid, w, residual, iterations[0])


def scalar_integral(grid: TorusGrid, solution: HarmonicSolution):
    """``int scal |du|_g dV`` by the periodic trapezoidal rule; ``scal`` from metric jets at the nodes."""
    scal = scalar_curvature(grid.metric, grid.nodes)
    du = solution.gradient()
    ginv = grid.coeff / grid.sqrtg[..., None, None]
    norm = np.sqrt(np.einsum("...i,...ij,...j->...", du, ginv, du))
    return float(np.sum(scal * norm * grid.sqrtg) * grid.h ** 3)


# ---------------------------------------------------------------------------
# marching tetrahedra

_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)))  # corner c has offset _CORNERS[c]


def _kuhn_tets():
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for axis in perm:
            nxt = path[-1].copy()
            nxt[axis] = 1
            path.append(nxt)
        tets.append([int(c[0] * 4 + c[1] * 2 + c[2]) for c in path])
    return np.array(tets)


_TETS = _kuhn_tets()


@dataclass
class LevelSurfaceMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (F, 3) vertex indices
    edges: np.ndarray  # (E, 2)
    closed: bool
    components: int

    @property
    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges) + len(self.triangles)


def _march(ids, vals, pos):
    """Triangles of ``{f = 0}`` over cells with corner ids, values and positions ``(C, 8, ...)``.

    Returns vertex keys (sorted node-id pairs), vertex positions and triangles
    as rows of key indices.
    """
    keys_all, pos_all, tri_all = [], [], []
    for tet in _TETS:
        tv = vals[:, tet]
        pos_mask = tv > 0
        npos = pos_mask.sum(axis=1)
        for count in (1, 2, 3):
            sel = np.nonzero(npos == count)[0]
            if sel.size == 0:
                continue
            order = np.argsort(~pos_mask[sel], axis=1, kind="stable")  # positives first
            local = tet[order]  # (k, 4) corner indices
            if count == 1:
                pairs = [(0, 1), (0, 2), (0, 3)]
                tris = [(0, 1, 2)]
            elif count == 3:
                pairs = [(0, 3), (1, 3), (2, 3)]
                tris = [(0, 1, 2)]
            else:
                pairs = [(0, 2), (0, 3), (1, 3), (1, 2)]
                tris = [(0, 1, 2), (0, 2, 3)]
            base = sum(len(k) for k in keys_all)
            cells = sel[:, None]
            for a, b in pairs:
                ca, cb = local[:, a], local[:, b]
                ia, ib = ids[cells[:, 0], ca], ids[cells[:, 0], cb]
                fa, fb = vals[sel, ca], vals[sel, cb]
                lam = fa / (fa - fb)
                keys_all.append(np.stack([np.minimum(ia, ib), np.maximum(ia, ib)], axis=1))
                pa, pb = pos[sel, ca], pos[sel, cb]
                pos_all.append(pa + lam[:, None] * (pb - pa))
            k = sel.size
            for t in tris:
                tri_all.append(np.stack([base + t[0] * k + np.arange(k), base + t[1] * k + np.arange(k),
                                         base + t[2] * k + np.arange(k)], axis=1))
    if not keys_all:
        return np.zeros((0, 2), dtype=np.int64), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(keys_all), np.concatenate(pos_all), np.concatenate(tri_all)


def _assemble(keys, positions, tris):
    """Merge duplicate vertices by key and compute edges, closedness and components."""
    if len(tris) == 0:
        return LevelSurfaceMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                                np.zeros((0, 2), dtype=np.int64), True, 0)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    triangles = inverse[tris]
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    closed = bool(np.all(counts == 2))
    nv = len(uniq)
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(nv, nv))
    ncomp, _ = connected_components(graph, directed=False)
    return LevelSurfaceMesh(positions[first], triangles, edges, closed, int(ncomp))


def _nudged_level(values, t, period=None):
    """Move ``t`` off node values so that no mesh vertex sits on a grid node."""
    vals = np.asarray(values).ravel()
    for _ in range(64):
        d = vals - t
        if period is not None:
            d = np.mod(d + 0.5 * period, period) - 0.5 * period
        gap = float(np.min(np.abs(d)))
        if gap > 1e-12:
            return t
        t += 1e-9
    return t


def level_mesh(grid: TorusGrid, u, t) -> LevelSurfaceMesh:
    """Extract ``{u = t mod 2 pi}`` from a lifted grid function ``u = x_0 + periodic``."""
    N, h = grid.N, grid.h
    u = np.asarray(u, dtype=float)
    w = u - grid.x0
    t = _nudged_level(u, t, TWO_PI)
    idx = np.stack(np.meshgrid(*(np.arange(N),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    corner_idx = idx[:, None, :] + _CORNERS[None, :, :]  # unwrapped
    wrapped = corner_idx % N
    ids = (wrapped[..., 0] * N + wrapped[..., 1]) * N + wrapped[..., 2]
    lifted = w[wrapped[..., 0], wrapped[..., 1], wrapped[..., 2]] + corner_idx[..., 0] * h
    pos = corner_idx * h
    lo, hi = lifted.min(axis=1), lifted.max(axis=1)
    keys, positions, tris = [], [], []
    offset = 0
    kmin = int(np.floor((lo.min() - t) / TWO_PI))
    kmax = int(np.ceil((hi.max() - t) / TWO_PI))
    for k in range(kmin, kmax + 1):
        level = t + TWO_PI * k
        cells = np.nonzero((lo < level) & (hi > level))[0]
        if cells.size == 0:
            continue
        kk, pp, tt = _march(ids[cells], lifted[cells] - level, pos[cells])
        keys.append(kk)
        positions.append(np.mod(pp, TWO_PI))
        tris.append(tt + offset)
        offset += len(kk)
    if not keys:
        return _assemble(np.zeros((0, 2), dtype=np.int64), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return _assemble(np.concatenate(keys), np.concatenate(positions), np.concatenate(tris))


def level_euler_characteristic(grid: TorusGrid, u, t):
    """``(chi, component count)`` of the level ``{u = t}``; raises if the mesh is not closed."""
    mesh = level_mesh(grid, u, t)
    if not mesh.closed:
        raise TopologyError(f"extracted level {t:.6f} is not a closed surface")
    return mesh.euler_characteristic, mesh.components


def box_level_mesh(f, lower, upper, N) -> LevelSurfaceMesh:
    """Zero level of a vectorized function ``f(points)`` on a non-periodic box grid."""
    axes = [np.linspace(lower[i], upper[i], N + 1) for i in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = f(X)
    vals = np.where(vals == 0.0, 1e-14, vals)
    idx = np.stack(np.meshgrid(*(np.arange(N),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    corner_idx = idx[:, None, :] + _CORNERS[None, :, :]
    ids = (corner_idx[..., 0] * (N + 1) + corner_idx[..., 1]) * (N + 1) + corner_idx[..., 2]
    cv = vals[corner_idx[..., 0], corner_idx[..., 1], corner_idx[..., 2]]
    pos = X[corner_idx[..., 0], corner_idx[..., 1], corner_idx[..., 2]]
    cells = np.nonzero((cv.min(axis=1) < 0) & (cv.max(axis=1) > 0))[0]
    return _assemble(*_march(ids[cells], cv[cells], pos[cells]))


def write_off(mesh: LevelSurfaceMesh, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.triangles)} {len(mesh.edges)}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# ---------------------------------------------------------------------------


@dataclass
class SternReport:
    N: int
    levels: int
    lhs: float  # 4 pi times the mean Euler characteristic (unit-period measure)
    lhs_length_measure: float  # same integral against dt on a circle of length 2 pi
    rhs: float
    margin: float
    discretization_estimate: float
    chis: list
    components: list
    skipped: int
    solve_residual: float
    passed: bool

    def to_dict(self):
        return {
            "N": self.N, "L": self.levels, "LHS": self.lhs, "LHS_length_measure": self.lhs_length_measure,
            "RHS": self.rhs, "margin": self.margin, "discretization_estimate": self.discretization_estimate,
            "chi": list(self.chis), "components": list(self.components), "skipped_levels": self.skipped,
            "solve_residual": self.solve_residual, "measure": "unit-period normalized", "passed": self.passed,
        }


def stern_report(grid: TorusGrid, solution: HarmonicSolution | None = None, levels=32) -> SternReport:
    """Level-averaged Euler characteristic versus the curvature integral, with a coarse-grid error bar."""
    if solution is None:
        solution = solve_harmonic_torus(grid)
    rhs = scalar_integral(grid, solution)
    coarse = TorusGrid.build(grid.metric, grid.N // 2)
    rhs_coarse = scalar_integral(coarse, solve_harmonic_torus(coarse))
    estimate = abs(rhs - rhs_coarse)
    u = solution.u
    chis, comps, skipped = [], [], 0
    for k in range(levels):
        t = TWO_PI * (k + 0.5) / levels
        try:
            chi, c = level_euler_characteristic(grid, u, t)
        except TopologyError:
            skipped += 1
            continue
        chis.append(int(chi))
        comps.append(int(c))
    mean_chi = float(np.mean(chis)) if chis else 0.0
    lhs = 4.0 * np.pi * mean_chi
    margin = lhs - rhs
    return SternReport(grid.N, levels, lhs, lhs * TWO_PI, rhs, margin, estimate, chis, comps, skipped,
                       solution.residual, bool(margin >= -estimate))
