"""Acceptance criteria, each at its stated tolerance; one PASS/FAIL line is printed per criterion."""

import time

import numpy as np
import pytest

from bochnerlab.cli import SuiteConfig, dumps, run_suite
from bochnerlab.curvature import curvature_at, curvature_symmetry_defects
from bochnerlab.fields import MetricField, MetricKind, Normalization, eval_metric, make_scene
from bochnerlab.identities import IdentityName as N, applicable_identities, check_inequality, evaluate
from bochnerlab.jetcalc import Polynomial, TrigPolynomial, jet_eval, jet_fd_crosscheck
from bochnerlab.slicing import enforce_pointwise_divfree, lemma_divergence_witness, y_fields
from bochnerlab.spinor3 import (
    currents,
    dirac_apply,
    divfree_quadruple,
    harmonic_linear_spinor,
    hermitian,
    spinor_from_linear,
    spinor_property_suite,
)
from bochnerlab.stern import TorusGrid, solve_harmonic_torus, stern_metric, stern_report

KINDS = [MetricKind.PERTURBED, MetricKind.CONFORMAL, MetricKind.WARPED]
COMBINATIONS = [(n, s) for n in (3, 4, 5) for s in range(1, n)]
EQUALITY_SUITE = [N.LemmaH, N.LemmaHGeneral, N.LemmaAH, N.LemmaMain, N.CorollaryMain, N.TheoremMainGeneral,
                  N.TheoremIntermediate, N.IteratedGaussFull, N.IteratedGaussCodim2, N.SternLocal,
                  N.ClassicalBochner]
UNIT_TOP_ONLY = {N.SternLocal, N.ClassicalBochner, N.TheoremSpinorsCompensated}


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
        assert ok, detail
    return report


def _random_field(rng, dim):
    if rng.random() < 0.5:
        modes = tuple((tuple(int(k) for k in rng.integers(-2, 3, dim)), float(rng.normal()), float(rng.normal()))
                      for _ in range(4))
        return TrigPolynomial(dim, modes, float(rng.normal()))
    terms = []
    for _ in range(8):
        e = np.zeros(dim, dtype=int)
        for i in rng.integers(0, dim, size=rng.integers(0, 5)):
            e[i] += 1
        terms.append((tuple(int(x) for x in e), float(rng.normal())))
    return Polynomial(dim, tuple(terms))


def test_criterion_1_jet_engine(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for k in range(100):
        dim = 3 + k % 3
        dev = jet_fd_crosscheck(_random_field(rng, dim), rng.uniform(-1, 1, dim), 1e-4)
        worst = max(worst, dev["gradient"], dev["hessian"])
    elapsed = time.perf_counter() - start
    verdict(1, "jet engine vs finite differences", worst <= 1e-6 and elapsed < 5.0,
            f"max relative deviation {worst:.2e} (<= 1e-6), {elapsed:.2f} s (< 5 s)")


def test_criterion_2_curvature(verdict):
    rng = np.random.default_rng(2)
    flat_max = 0.0
    for n in (3, 4, 5):
        c = curvature_at(eval_metric(MetricField.flat(n), rng.uniform(-1, 1, n), 2))
        flat_max = max(flat_max, float(np.max(np.abs(c.riemann))), abs(float(c.scal)))
    worst_scal, worst_sym = 0.0, 0.0
    for k in range(50):
        n = 3 + k % 3
        modes = tuple((tuple(int(x) for x in rng.integers(-2, 3, n)), float(rng.uniform(-0.3, 0.3)),
                       float(rng.uniform(-0.3, 0.3))) for _ in range(3))
        phi = TrigPolynomial(n, modes, float(rng.uniform(-0.3, 0.3)))
        p = rng.uniform(-np.pi, np.pi, n)
        c = curvature_at(eval_metric(MetricField.conformal(phi), p, 2))
        j = jet_eval(phi, p, 2)
        oracle = float(np.exp(-2 * j.value) * (-2 * (n - 1) * np.trace(j.hess) - (n - 1) * (n - 2) * j.grad @ j.grad))
        worst_scal = max(worst_scal, abs(float(c.scal) - oracle) / max(1.0, abs(oracle)))
        worst_sym = max(worst_sym, max(curvature_symmetry_defects(c).values()))
    for seed in range(30):
        scene = make_scene(seed, 3 + seed % 3, 1, KINDS[seed % 3])
        c = curvature_at(eval_metric(scene.g, scene.p, 2))
        worst_sym = max(worst_sym, max(curvature_symmetry_defects(c).values()))
    ok = flat_max == 0.0 and worst_scal <= 1e-9 and worst_sym <= 1e-10
    verdict(2, "curvature", ok, f"flat max {flat_max:.1e} (exactly 0), conformal scal {worst_scal:.2e} (<= 1e-9), "
                                f"symmetries/Bianchi {worst_sym:.2e} (<= 1e-10)")


def _trial_scenes(seed, n, s):
    """The divergence-enforced scene of a seed and its unit_top companion when the seed uses unit_bottom."""
    normalization = list(Normalization)[seed % 2]
    base = make_scene(seed, n, s, KINDS[seed % 3], normalization)
    scenes = {normalization: enforce_pointwise_divfree(base)}
    if normalization is not Normalization.UNIT_TOP:
        scenes[Normalization.UNIT_TOP] = enforce_pointwise_divfree(base.with_normalization(Normalization.UNIT_TOP))
    return normalization, scenes


def test_criterion_3_equality_suite(verdict):
    start = time.perf_counter()
    worst = {name: 0.0 for name in EQUALITY_SUITE}
    counts = {name: 0 for name in EQUALITY_SUITE}
    failures = []
    for n, s in COMBINATIONS:
        for seed in range(100):
            normalization, scenes = _trial_scenes(seed, n, s)
            for name in EQUALITY_SUITE:
                norm = Normalization.UNIT_TOP if name in UNIT_TOP_ONLY else normalization
                if name not in applicable_identities(n, s, norm):
                    continue
                counts[name] += 1
                for rep in evaluate(scenes[norm], name, 1e-8):
                    worst[name] = max(worst[name], rep.relative)
                    if rep.relative > 1e-8:
                        failures.append((name.value, n, s, seed, rep.level, rep.relative))
    elapsed = time.perf_counter() - start
    every_identity_ran = all(c > 0 for c in counts.values())
    ok = not failures and every_identity_ran and elapsed < 120.0
    detail = ", ".join(f"{k.value} {v:.1e}" for k, v in worst.items())
    verdict(3, "equality suite", ok, f"{sum(counts.values())} scene checks over {len(COMBINATIONS)} (n, s), "
                                     f"max relative residuals: {detail} (<= 1e-8); {elapsed:.1f} s (< 120 s); "
                                     f"failures {failures[:5]}")


def test_criterion_4_inequality_suite(verdict):
    worst_slack, worst_dec, trials = np.inf, 0.0, 0
    min_term = np.inf
    for n in (3, 4, 5):
        for seed in range(100):
            normalization, scenes = _trial_scenes(seed, n, n - 1)
            for name, norm in ((N.TheoremMainInequality, normalization),
                               (N.TheoremSpinorsCompensated, Normalization.UNIT_TOP)):
                rep = check_inequality(scenes[norm], name)
                trials += 1
                worst_slack = min(worst_slack, rep.residual)
                worst_dec = max(worst_dec, rep.extras["decomposition_relative"])
                min_term = min(min_term, min(rep.extras["slack_terms"]))
    ok = worst_slack >= -1e-9 and worst_dec <= 1e-8 and min_term >= -1e-10
    verdict(4, "inequality suite", ok, f"{trials} trials, min slack {worst_slack:.2e} (>= -1e-9), "
                                       f"decomposition mismatch {worst_dec:.2e} (<= 1e-8), "
                                       f"min dropped term {min_term:.2e}")


def test_criterion_5_y_fields(verdict):
    worst_norm, worst_inner, worst_witness, trials = 0.0, 0.0, 0.0, 0
    for n, s in COMBINATIONS:
        for seed in range(20):
            scene = make_scene(seed, n, s, KINDS[seed % 3], list(Normalization)[seed % 2])
            y = y_fields(scene)
            worst_norm = max(worst_norm, float(np.max(np.abs(y.norms - y.z0))) / max(1.0, y.z0))
            worst_inner = max(worst_inner, float(np.max(np.abs(y.gram - np.diag(np.diag(y.gram))))))
            for m in range(s):
                worst_witness = max(worst_witness, lemma_divergence_witness(scene, m, seed=seed).relative)
            trials += 1
    ok = worst_norm <= 1e-12 and worst_inner <= 1e-10 and worst_witness <= 1e-9
    verdict(5, "Y-fields and divergence witness", ok,
            f"{trials} scenes, |Y_i| - |Z_0| {worst_norm:.1e} (<= 1e-12), inner products {worst_inner:.1e} "
            f"(<= 1e-10), witness residual {worst_witness:.1e} (<= 1e-9)")


def test_criterion_6_spinors(verdict):
    rng = np.random.default_rng(6)
    equivalence = 0.0
    for k in range(100):
        psi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        if k % 2:
            psi = harmonic_linear_spinor(1000 + k)
        else:
            psi = spinor_from_linear(psi0, rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        p = rng.uniform(-1, 1, 3)
        D = dirac_apply(psi, p)
        q = divfree_quadruple(psi, p)
        equivalence = max(equivalence, float(np.max(np.abs(q - [D[0].real, D[0].imag, D[1].real, D[1].imag]))))
        if k % 2:
            equivalence = max(equivalence, float(np.max(np.abs(q))), float(np.max(np.abs(D))))

    quads = rng.normal(size=(1000, 4))
    algebra = 0.0
    for a, b, c, d in quads:
        pt = spinor_from_linear([a + 1j * b, c + 1j * d], np.zeros((3, 2)))
        cur = currents(pt, np.zeros(3), order=0)
        X, A, B = (np.asarray(getattr(cur, k).value) for k in "XAB")
        rho = a * a + b * b + c * c + d * d
        for V in (X, A, B):
            algebra = max(algebra, abs(np.linalg.norm(V) - rho) / rho)
        for V, W in ((X, A), (X, B), (A, B)):
            algebra = max(algebra, abs(V @ W) / rho ** 2)

    div_identity = 0.0
    for k in range(20):
        psi = spinor_from_linear(rng.normal(size=2) + 1j * rng.normal(size=2),
                                 rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        pts = rng.uniform(-1, 1, (50, 3))
        div = np.trace(currents(psi, pts).X.d().value, axis1=-2, axis2=-1)
        expected = 2 * hermitian(1j * dirac_apply(psi, pts), psi.value(pts)).real
        div_identity = max(div_identity, float(np.max(np.abs(div - expected))))

    slack = np.inf
    for seed in range(50):
        rep = spinor_property_suite(harmonic_linear_spinor(seed), np.random.default_rng(seed).uniform(-1, 1, (1000, 3)))
        slack = min(slack, rep.min_lichnerowicz_slack)
    ok = equivalence <= 1e-12 and algebra <= 1e-12 and div_identity <= 1e-10 and slack >= -1e-10
    verdict(6, "spinor suite", ok, f"Dirac/quadruple {equivalence:.1e} (<= 1e-12), current algebra {algebra:.1e} "
                                   f"(<= 1e-12), div X identity {div_identity:.1e} (<= 1e-10), "
                                   f"min Lichnerowicz slack {slack:.2e} (>= -1e-10)")


def test_criterion_7_stern(verdict):
    flat = stern_report(TorusGrid.build(stern_metric(0.0), 16), levels=8)
    flat_ok = abs(flat.lhs) <= 1e-10 and abs(flat.rhs) <= 1e-10
    start = time.perf_counter()
    grid = TorusGrid.build(stern_metric(0.05), 48)
    sol = solve_harmonic_torus(grid)
    rep = stern_report(grid, sol, levels=32)
    elapsed = time.perf_counter() - start
    ok = (flat_ok and rep.skipped == 0 and len(rep.chis) == 32 and all(x == 0 for x in rep.chis)
          and rep.margin >= -rep.discretization_estimate and sol.residual <= 1e-10 and elapsed < 300.0)
    verdict(7, "torus experiment", ok,
            f"flat LHS {flat.lhs:.1e} RHS {flat.rhs:.1e}; eps 0.05 N 48 L 32: chi set {sorted(set(rep.chis))}, "
            f"LHS {rep.lhs:.4f}, RHS {rep.rhs:.4f}, margin {rep.margin:.4f} >= -{rep.discretization_estimate:.4f}, "
            f"solve residual {sol.residual:.1e} (<= 1e-10), {elapsed:.1f} s (< 300 s)")


def test_criterion_8_determinism(verdict):
    mismatched = []
    for suite in ("jets", "curvature", "identities", "spinors", "stern"):
        bodies = [dumps(run_suite(SuiteConfig(suite=suite, trials=3, seed=17, grid=16, levels=4))[0])
                  for _ in range(2)]
        if bodies[0] != bodies[1]:
            mismatched.append(suite)
    verdict(8, "determinism", not mismatched, f"byte-identical re-runs for all suites; mismatches {mismatched}")
