"""``bochner-lab verify``: run verification suites and write a JSON report.

Exit codes: 0 when every record passes, 1 when any record fails, 2 on a
configuration error (the message names the offending key).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .curvature import curvature_at, curvature_symmetry_defects
from .errors import BochnerLabError, ConfigError
from .fields import MetricField, MetricKind, Normalization, _random_trig, eval_metric, make_scene
from .identities import EQUALITY_TOLERANCE, INEQUALITIES, applicable_identities, evaluate
from .jetcalc import jet_eval, jet_fd_crosscheck
from .slicing import enforce_pointwise_divfree
from .spinor3 import dirac_apply, divfree_quadruple, harmonic_linear_spinor, spinor_property_suite
from .stern import TorusGrid, solve_harmonic_torus, stern_metric, stern_report

SCHEMA = "bochner-lab/1"
SUITES = ("jets", "curvature", "identities", "spinors", "stern", "all")


@dataclass
class SuiteConfig:
    suite: str = "identities"
    trials: int = 10
    seed: int = 0
    dims: tuple = (3, 4, 5)
    s: tuple | None = None  # None: every admissible s per dimension
    metric: tuple = ("perturbed", "conformal", "warped")
    tolerance: float = EQUALITY_TOLERANCE
    epsilon: float = 0.05
    grid: int = 48
    levels: int = 32
    out: str | None = None
    workers: int = 1

    def validate(self):
        if self.suite not in SUITES:
            raise ConfigError(f"suite must be one of {', '.join(SUITES)}", "suite")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer", "trials")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer", "seed")
        if not self.dims or any(n not in (3, 4, 5) for n in self.dims):
            raise ConfigError("dims must be a non-empty subset of {3, 4, 5}", "dims")
        if self.s is not None:
            if not self.s:
                raise ConfigError("s must list at least one value", "s")
            for n in self.dims:
                for s in self.s:
                    if not 1 <= s <= n - 1:
                        raise ConfigError(f"s = {s} is not admissible in dimension {n} (need 1 <= s <= n-1)", "s")
        valid = {k.value for k in MetricKind}
        if not self.metric or any(k not in valid for k in self.metric):
            raise ConfigError(f"metric kinds must be drawn from {sorted(valid)}", "metric")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive", "tolerance")
        if not 0 <= self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in [0, 0.5)", "epsilon")
        if not isinstance(self.grid, int) or not 16 <= self.grid <= 96 or self.grid % 2:
            raise ConfigError("grid must be an even integer in 16..96", "grid")
        if not isinstance(self.levels, int) or self.levels < 1:
            raise ConfigError("levels must be a positive integer", "levels")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer", "workers")
        return self

    def combinations(self):
        for n in self.dims:
            for s in (self.s if self.s is not None else range(1, n)):
                yield n, s

    def to_dict(self):
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# ---------------------------------------------------------------------------
# suites; each task returns a list of plain-dict records


def _record(suite, seed, identity, passed, level=None, **data):
    return {"suite": suite, "seed": int(seed), "identity": identity, "level": level, "passed": bool(passed), **data}


def _jets_task(cfg, seed):
    out = []
    for n in cfg.dims:
        rng = np.random.default_rng([seed, n, 101])
        spec = _random_trig(rng, n, 1.0)
        p = rng.uniform(-1, 1, n)
        dev = jet_fd_crosscheck(spec, p, 1e-4)
        ok = dev["gradient"] <= 1e-6 and dev["hessian"] <= 1e-6
        out.append(_record("jets", seed, "JetFiniteDifference", ok, n=n, **{k: float(v) for k, v in dev.items()}))
    return out


def _curvature_task(cfg, seed):
    out = []
    for n in cfg.dims:
        rng = np.random.default_rng([seed, n, 202])
        p = rng.uniform(-1, 1, n)
        flat = curvature_at(eval_metric(MetricField.flat(n), p, 2))
        out.append(_record("curvature", seed, "FlatZero", np.max(np.abs(flat.riemann)) == 0.0, n=n))
        phi = _random_trig(rng, n, 0.3)
        c = curvature_at(eval_metric(MetricField.conformal(phi), p, 2))
        expected = _conformal_scal_oracle(phi, p, n)
        rel = abs(float(c.scal) - expected) / max(1.0, abs(expected))
        out.append(_record("curvature", seed, "ConformalScalar", rel <= 1e-9, n=n, scal=float(c.scal),
                           expected=expected, relative=rel))
        defects = curvature_symmetry_defects(c)
        out.append(_record("curvature", seed, "RiemannSymmetries", max(defects.values()) <= 1e-10, n=n, **defects))
    return out


def _conformal_scal_oracle(phi, p, n):
    """``scal(e^{2 phi} delta) = -e^{-2 phi} (2(n-1) Lap phi + (n-2)(n-1) |d phi|^2)``."""
    j = jet_eval(phi, p, 2)
    lap = float(np.trace(j.hess))
    grad2 = float(j.grad @ j.grad)
    return float(-np.exp(-2 * j.value) * (2 * (n - 1) * lap + (n - 2) * (n - 1) * grad2))


def _identities_task(cfg, seed):
    out = []
    kind = MetricKind(cfg.metric[seed % len(cfg.metric)])
    normalization = Normalization.UNIT_TOP if seed % 2 == 0 else Normalization.UNIT_BOTTOM
    for n, s in cfg.combinations():
        base = make_scene(seed, n, s, kind, normalization)
        scenes = {normalization: enforce_pointwise_divfree(base)}
        meta = {"n": n, "s": s, "metric": kind.value}
        names = applicable_identities(n, s, normalization)
        extra = [x for x in applicable_identities(n, s, Normalization.UNIT_TOP) if x not in names]
        if extra:
            scenes[Normalization.UNIT_TOP] = enforce_pointwise_divfree(base.with_normalization(Normalization.UNIT_TOP))
        for name in names + extra:
            norm = normalization if name in names else Normalization.UNIT_TOP
            tol = None if name in INEQUALITIES else cfg.tolerance
            for rep in evaluate(scenes[norm], name, tol):
                d = rep.to_dict()
                d.pop("seed")
                out.append(_record("identities", seed, d.pop("name"), d.pop("passed"), d.pop("level"),
                                   normalization=norm.value, **meta, **d))
    return out


def _spinors_task(cfg, seed):
    psi = harmonic_linear_spinor(seed)
    pts = np.random.default_rng([seed, 303]).uniform(-1, 1, (200, 3))
    rep = spinor_property_suite(psi, pts)
    quad = float(np.max(np.abs(divfree_quadruple(psi, pts))))
    dirac = float(np.max(np.abs(dirac_apply(psi, pts))))
    return [_record("spinors", seed, "HarmonicSpinor", rep.passed and quad <= 1e-12, max_dirac=dirac,
                    max_quadruple=quad, max_div=rep.max_div, min_kato_slack=rep.min_kato_slack,
                    min_lichnerowicz_slack=rep.min_lichnerowicz_slack, max_orthogonality=rep.max_orthogonality,
                    max_length_defect=rep.max_length_defect)]


def _stern_task(cfg):
    grid = TorusGrid.build(stern_metric(cfg.epsilon), cfg.grid)
    rep = stern_report(grid, solve_harmonic_torus(grid), cfg.levels)
    data = rep.to_dict()
    data.pop("passed")
    return [_record("stern", cfg.seed, "SternInequality", rep.passed, epsilon=cfg.epsilon, **data)]


_TASKS = {"jets": _jets_task, "curvature": _curvature_task, "identities": _identities_task,
          "spinors": _spinors_task}


def _run_seed(args):
    suite, cfg, seed = args
    try:
        return _TASKS[suite](cfg, seed)
    except BochnerLabError as exc:
        return [_record(suite, seed, "Error", False, error=f"{type(exc).__name__}: {exc}")]


def run_suite(cfg: SuiteConfig):
    """Run the configured suite(s); returns the report document and the exit code."""
    cfg.validate()
    suites = [x for x in SUITES if x != "all"] if cfg.suite == "all" else [cfg.suite]
    records = []
    for suite in suites:
        if suite == "stern":
            records += _stern_task(cfg)
            continue
        jobs = [(suite, cfg, cfg.seed + i) for i in range(cfg.trials)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                for chunk in pool.map(_run_seed, jobs):
                    records += chunk
        else:
            for job in jobs:
                records += _run_seed(job)
    records.sort(key=lambda r: (r["suite"], r["seed"], r.get("n", 0), r.get("s", 0), r["identity"],
                                -1 if r["level"] is None else r["level"]))
    failed = sum(not r["passed"] for r in records)
    report = {"schema": SCHEMA, "config": cfg.to_dict(),
              "summary": {"records": len(records), "failed": failed, "passed": failed == 0},
              "records": records}
    return report, (0 if failed == 0 else 1)


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# argument handling


def _int_list(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _str_list(text):
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


_CONVERTERS = {"suite": str, "trials": int, "seed": int, "dims": _int_list, "s": _int_list, "metric": _str_list,
               "tolerance": float, "epsilon": float, "grid": int, "levels": int, "out": str, "workers": int}


def _coerce(key, value):
    if key not in _CONVERTERS:
        raise ConfigError(f"unknown configuration key {key!r}", key)
    try:
        if isinstance(value, list) and key in ("dims", "s", "metric"):
            value = ",".join(str(v) for v in value)
        return _CONVERTERS[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {value!r}", key) from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="bochner-lab", description="Numerical verification of slicing Bochner identities.")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    v.add_argument("--config", help="JSON file with configuration keys (flags override it)")
    v.add_argument("--suite")
    v.add_argument("--trials")
    v.add_argument("--seed")
    v.add_argument("--dims", help="comma-separated ambient dimensions, e.g. 3,4")
    v.add_argument("--s", help="comma-separated numbers of functions (default: all admissible)")
    v.add_argument("--metric", help="comma-separated metric kinds")
    v.add_argument("--tolerance", help="relative tolerance for equalities")
    v.add_argument("--epsilon", help="metric perturbation size for the torus experiment")
    v.add_argument("--grid", help="torus grid resolution")
    v.add_argument("--levels", help="number of level values for the torus experiment")
    v.add_argument("--workers", help="worker processes")
    v.add_argument("--out", help="report path (default: standard output)")
    return parser


def config_from_args(ns) -> SuiteConfig:
    values = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}", "config") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", "config")
        for k, val in data.items():
            values[k] = _coerce(k, val)
    for f in fields(SuiteConfig):
        val = getattr(ns, f.name, None)
        if val is not None:
            values[f.name] = _coerce(f.name, val)
    return replace(SuiteConfig(), **values).validate()


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        print(f"configuration error [{exc.key}]: {exc}", file=sys.stderr)
        return 2
    report, code = run_suite(cfg)
    text = dumps(report)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    s = report["summary"]
    print(f"{s['records']} records, {s['failed']} failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
