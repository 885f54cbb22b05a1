"""Metric tensors, randomized curved scenes and their JSON form."""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, GenerationError, MetricDefinitenessError
from .jetcalc import (
    Coordinate,
    Jet,
    Polynomial,
    Sum,
    TrigPolynomial,
    contract,
    field_from_dict,
    field_to_dict,
    jet_eval,
    stack,
)

__all__ = [
    "MetricKind",
    "MetricField",
    "MetricJet",
    "Normalization",
    "SlicingScene",
    "eval_metric",
    "metric_from_values",
    "random_scene",
    "make_scene",
    "comass",
    "scene_to_dict",
    "scene_from_dict",
    "scene_to_json",
    "scene_from_json",
]

U_AMPLITUDE = 0.1
METRIC_AMPLITUDE = 0.05


class MetricKind(str, enum.Enum):
    FLAT = "flat"
    CONFORMAL = "conformal"
    WARPED = "warped"
    PERTURBED = "perturbed"


class Normalization(str, enum.Enum):
    UNIT_TOP = "unit_top"  # |Z_s| = 1
    UNIT_BOTTOM = "unit_bottom"  # |Z_0| = 1


@dataclass(frozen=True)
class MetricField:
    """A Riemannian metric on a chart domain.

    * ``flat``: the Euclidean metric.
    * ``conformal``: ``exp(2 phi) * delta``.
    * ``warped``: ``diag(w_1**2, ..., w_n**2)``.
    * ``perturbed``: ``delta + amplitude * h`` with ``h`` a symmetric matrix of fields.
    """

    dim: int
    kind: MetricKind = MetricKind.FLAT
    phi: object = None
    warps: tuple | None = None
    perturbation: tuple | None = None
    amplitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind is MetricKind.CONFORMAL and self.phi is None:
            raise ValueError("conformal metric needs a conformal factor phi")
        if self.kind is MetricKind.WARPED:
            if self.warps is None or len(self.warps) != self.dim:
                raise DimensionMismatchError("warped metric needs one warp function per coordinate")
            object.__setattr__(self, "warps", tuple(self.warps))
        if self.kind is MetricKind.PERTURBED:
            h = self.perturbation
            if h is None or len(h) != self.dim or any(len(row) != self.dim for row in h):
                raise DimensionMismatchError("perturbation must be a dim x dim matrix of fields")
            h = tuple(tuple(row) for row in h)
            for i in range(self.dim):
                for j in range(i):
                    if h[i][j] != h[j][i]:
                        raise ValueError("perturbation matrix must be symmetric")
            object.__setattr__(self, "perturbation", h)

    @classmethod
    def flat(cls, dim):
        return cls(dim, MetricKind.FLAT)

    @classmethod
    def conformal(cls, phi):
        return cls(phi.dim, MetricKind.CONFORMAL, phi=phi)

    @classmethod
    def warped(cls, warps):
        return cls(warps[0].dim, MetricKind.WARPED, warps=tuple(warps))

    @classmethod
    def perturbed(cls, h, amplitude):
        return cls(len(h), MetricKind.PERTURBED, perturbation=tuple(tuple(r) for r in h),
                   amplitude=float(amplitude))


@dataclass(frozen=True)
class MetricJet:
    """Jets of ``g_ij`` and ``g^ij`` at a point (value shape ``B + (n, n)``)."""

    g: Jet
    ginv: Jet

    @property
    def dim(self):
        return self.g.dim


def _leading_minors(gv):
    n = gv.shape[-1]
    return np.stack([np.linalg.det(gv[..., :k, :k]) for k in range(1, n + 1)], axis=-1)


def _check_spd(gv):
    minors = _leading_minors(gv)
    smallest = float(np.min(minors))
    if not np.all(np.isfinite(minors)) or smallest <= 0:
        raise MetricDefinitenessError(f"metric is not positive definite (smallest leading minor {smallest:.3e})",
                                      smallest_minor=smallest)


def metric_from_values(g):
    """Assemble a :class:`MetricJet` from a jet of ``g_ij``; the inverse follows by jet series."""
    _check_spd(g.value)
    g0inv = np.linalg.inv(g.value)
    g0inv = 0.5 * (g0inv + np.swapaxes(g0inv, -1, -2))
    delta = g - g.value  # nilpotent part
    step = contract("...ij,...jk->...ik", delta, g0inv)
    term = Jet.constant(g0inv, g.dim, g.order)
    inv = term
    for _ in range(g.order):
        term = -contract("...ij,...jk->...ik", term, step)
        inv = inv + term
    # exact symmetry of the inverse
    inv = inv._map(lambda c, k: 0.5 * (c + np.swapaxes(c, g.value.ndim - 2, g.value.ndim - 1)))
    return MetricJet(g, inv)


def _metric_entries(m, p, order):
    n = m.dim
    p = np.asarray(p, dtype=float)
    batch = p.shape[:-1]
    eye = np.eye(n)
    if m.kind is MetricKind.FLAT:
        return Jet.constant(np.broadcast_to(eye, batch + (n, n)).copy(), n, order)
    if m.kind is MetricKind.CONFORMAL:
        factor = (jet_eval(m.phi, p, order) * 2.0).exp()
        return factor.expand(-1).expand(-1) * eye
    if m.kind is MetricKind.WARPED:
        zero = Jet.constant(np.zeros(batch), n, order)
        w2 = [jet_eval(w, p, order).square() for w in m.warps]
        rows = [stack([w2[i] if i == j else zero for j in range(n)], -1) for i in range(n)]
        return stack(rows, -2)
    if m.kind is MetricKind.PERTURBED:
        h = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                h[i][j] = h[j][i] = jet_eval(m.perturbation[i][j], p, order) * m.amplitude + eye[i, j]
        return stack([stack(row, -1) for row in h], -2)
    raise ValueError(f"unknown metric kind {m.kind}")


def eval_metric(m, p, order=3):
    """Jets of the metric and its inverse at ``p``; raises if ``g(p)`` is not SPD."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != m.dim:
        raise DimensionMismatchError(f"point of dimension {p.shape[-1]} for a metric of dimension {m.dim}")
    return metric_from_values(_metric_entries(m, p, order))


def comass(gram):
    """Comass ``sqrt(det <grad u_i, grad u_j>)`` from the Gram matrix of the gradients."""
    det = np.linalg.det(gram)
    return np.sqrt(np.maximum(det, 0.0))


def _gradients_gram(metric_jet, u_jets):
    gi = metric_jet.ginv.value
    du = np.stack([u.grad for u in u_jets], axis=-2)  # (s, n)
    return du @ gi @ np.swapaxes(du, -1, -2)


# ---------------------------------------------------------------------------
# scenes


@dataclass(frozen=True)
class SlicingScene:
    """Everything a slicing computation consumes: metric, functions, point, normalization."""

    n: int
    s: int
    g: MetricField
    u: tuple
    p: tuple
    normalization: Normalization = Normalization.UNIT_TOP
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(self.u))
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if len(self.u) != self.s:
            raise ValueError(f"scene declares s={self.s} but has {len(self.u)} functions")
        if not 1 <= self.s <= self.n - 1:
            raise ValueError(f"need 1 <= s <= n-1, got s={self.s}, n={self.n}")
        if self.g.dim != self.n or len(self.p) != self.n or any(f.dim != self.n for f in self.u):
            raise DimensionMismatchError("scene components disagree on the dimension")

    def with_u(self, u):
        return SlicingScene(self.n, self.s, self.g, tuple(u), self.p, self.normalization, self.seed)

    def with_normalization(self, normalization):
        return SlicingScene(self.n, self.s, self.g, self.u, self.p, Normalization(normalization), self.seed)


def _random_trig(rng, dim, amplitude, n_modes=3, max_freq=2):
    modes = []
    for _ in range(n_modes):
        freq = rng.integers(-max_freq, max_freq + 1, size=dim)
        while not freq.any():
            freq = rng.integers(-max_freq, max_freq + 1, size=dim)
        a, b = rng.uniform(-1, 1, size=2) * amplitude / n_modes
        modes.append((tuple(int(k) for k in freq), float(a), float(b)))
    return TrigPolynomial(dim, tuple(modes), float(rng.uniform(-1, 1) * amplitude / n_modes))


def _random_u(rng, n, index, amplitude, n_quad=4, n_cubic=4):
    quads = list(itertools.combinations_with_replacement(range(n), 2))
    cubics = list(itertools.combinations_with_replacement(range(n), 3))
    terms = []
    for pool, count in ((quads, n_quad), (cubics, n_cubic)):
        picks = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        for k in sorted(picks):
            exps = [0] * n
            for i in pool[k]:
                exps[i] += 1
            terms.append((tuple(exps), float(rng.uniform(-1, 1) * amplitude)))
    return Sum((Coordinate(index, n), Polynomial(n, tuple(terms))))


def _random_metric(rng, n, kind, amplitude):
    kind = MetricKind(kind)
    if kind is MetricKind.FLAT:
        return MetricField.flat(n)
    if kind is MetricKind.CONFORMAL:
        return MetricField.conformal(_random_trig(rng, n, amplitude))
    if kind is MetricKind.WARPED:
        return MetricField.warped([_random_trig(rng, n, amplitude) + Polynomial(n, (((0,) * n, 1.0),))
                                   for _ in range(n)])
    h = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            h[i][j] = h[j][i] = _random_trig(rng, n, 1.0)
    return MetricField.perturbed(h, amplitude)


def random_scene(seed, n, s, kind=MetricKind.PERTURBED, u_amplitude=U_AMPLITUDE,
                 metric_amplitude=METRIC_AMPLITUDE, max_retries=100):
    """Deterministic random trial ``(metric, [u_0..u_{s-1}], point)``.

    Each ``u_m`` is the coordinate ``x_m`` plus small random quadratic and cubic
    terms, so the slicing is nondegenerate near the returned point.
    """
    if not 1 <= s <= n - 1:
        raise ValueError(f"need 1 <= s <= n-1, got s={s}, n={n}")
    if n > 6:
        raise ValueError("random scenes are limited to n <= 6")
    kind = MetricKind(kind)
    rng = np.random.default_rng([int(seed), n, s, list(MetricKind).index(kind)])
    u_amp, g_amp = u_amplitude, metric_amplitude
    for _ in range(max_retries):
        metric = _random_metric(rng, n, kind, g_amp)
        us = [_random_u(rng, n, m, u_amp) for m in range(s)]
        p = rng.uniform(-0.5, 0.5, size=n)
        try:
            mj = eval_metric(metric, p, order=0)
        except MetricDefinitenessError:
            u_amp, g_amp = u_amp * 0.5, g_amp * 0.5
            continue
        gram = _gradients_gram(mj, [jet_eval(u, p, 1) for u in us])
        if comass(gram) > 0.5:
            return metric, us, tuple(float(x) for x in p)
        u_amp, g_amp = u_amp * 0.5, g_amp * 0.5
    raise GenerationError(f"no admissible scene after {max_retries} retries (seed {seed})")


def make_scene(seed, n, s, kind=MetricKind.PERTURBED, normalization=Normalization.UNIT_TOP, **kwargs):
    metric, us, p = random_scene(seed, n, s, kind, **kwargs)
    return SlicingScene(n, s, metric, tuple(us), p, Normalization(normalization), seed)


def metric_to_dict(m):
    out = {"kind": m.kind.value, "dim": m.dim}
    if m.kind is MetricKind.CONFORMAL:
        out["phi"] = field_to_dict(m.phi)
    elif m.kind is MetricKind.WARPED:
        out["warps"] = [field_to_dict(w) for w in m.warps]
    elif m.kind is MetricKind.PERTURBED:
        out["amplitude"] = m.amplitude
        out["perturbation"] = [[field_to_dict(h) for h in row] for row in m.perturbation]
    return out


def metric_from_dict(data):
    kind = MetricKind(data["kind"])
    dim = int(data["dim"])
    if kind is MetricKind.FLAT:
        return MetricField.flat(dim)
    if kind is MetricKind.CONFORMAL:
        return MetricField.conformal(field_from_dict(data["phi"]))
    if kind is MetricKind.WARPED:
        return MetricField.warped([field_from_dict(w) for w in data["warps"]])
    h = [[field_from_dict(x) for x in row] for row in data["perturbation"]]
    # rebuild sharing so that symmetry holds by identity
    for i in range(dim):
        for j in range(i):
            h[i][j] = h[j][i]
    return MetricField.perturbed(h, data["amplitude"])


def scene_to_dict(scene):
    return {
        "seed": scene.seed,
        "n": scene.n,
        "s": scene.s,
        "metric": metric_to_dict(scene.g),
        "u_specs": [field_to_dict(u) for u in scene.u],
        "point": list(scene.p),
        "normalization": scene.normalization.value,
    }


def scene_from_dict(data):
    return SlicingScene(
        n=int(data["n"]),
        s=int(data["s"]),
        g=metric_from_dict(data["metric"]),
        u=tuple(field_from_dict(u) for u in data["u_specs"]),
        p=tuple(data["point"]),
        normalization=Normalization(data["normalization"]),
        seed=data.get("seed"),
    )


def scene_to_json(scene, **kwargs):
    return json.dumps(scene_to_dict(scene), **kwargs)


def scene_from_json(text):
    return scene_from_dict(json.loads(text))
