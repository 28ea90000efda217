# verifier/services.py
"""
The check registry and the scenario pipeline behind the `verify` and
`list_checks` commands.

A scenario names a model space, a field family, a few measures and a list of
checks. Every check runs in its own worker with its own seeded generator;
results are reduced in check-name order so reports and CSV files do not
depend on scheduling.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd

from . import cdcheck, comparison, fields, geometry, semigroup, transport, warped
from .conf import setting, tolerance
from .exceptions import NUMERICAL_ERRORS, CheckFailure, ConditionViolated, NumericalAbort, ScenarioParseError
from .models import CheckRecord, VerificationRun
from .presets import build_field, build_measure, build_space, grid_function, reference_for
from .serializers import CheckRecordSerializer, parse_scenario
from .verdicts import COEFFICIENT_NOTE, Verdict, Witness, combine

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "value", "bound", "margin"]


@dataclass(frozen=True)
class CheckDefinition:
    name: str
    anchor: str
    runner: Callable
    params: dict = field(default_factory=dict)
    finite_n: bool = False
    description: str = ""

    @property
    def listing(self):
        return f"{self.name}: {self.anchor}"

    def schema(self):
        keys = ["K", "N"] if self.finite_n else ["K", "N (inf allowed)"]
        keys += [f"{k}={json.dumps(v)}" for k, v in self.params.items()]
        return ", ".join(keys)


CHECKS = {}


def register(name, anchor, params=None, finite_n=False):
    def decorator(fn):
        CHECKS[name] = CheckDefinition(
            name=name, anchor=anchor, runner=fn, params=params or {},
            finite_n=finite_n, description=(fn.__doc__ or "").strip(),
        )
        return fn
    return decorator


def list_checks():
    """Every registered check as 'name: anchor', in name order."""
    return [CHECKS[name] for name in sorted(CHECKS)]


@dataclass
class ScenarioContext:
    name: str
    space: geometry.ModelSpace
    field: fields.FieldSpec
    measures: dict
    seed: int
    tolerance_scale: float
    potential: Optional[Callable] = None
    warp: Optional[warped.WarpedSpec] = None

    def measure(self, name):
        if name not in self.measures:
            raise ScenarioParseError(f"scenario defines no measure named {name!r}")
        return self.measures[name]


@dataclass
class CheckSpec:
    name: str
    K: float
    N: float
    params: dict
    expect: bool = True
    index: int = 0


@dataclass
class CheckOutcome:
    spec: CheckSpec
    definition: CheckDefinition
    verdict: Verdict

    @property
    def ok(self):
        return self.verdict.passed == self.spec.expect

    @property
    def key(self):
        return f"{self.spec.name}-{self.spec.index}"


@dataclass
class ScenarioResult:
    context: ScenarioContext
    outcomes: list
    csv_paths: list = field(default_factory=list)
    run: Optional[VerificationRun] = None

    @property
    def passed(self):
        return all(o.ok for o in self.outcomes)

    def raise_for_unexpected(self):
        unexpected = [o.key for o in self.outcomes if not o.ok]
        if unexpected:
            raise CheckFailure(f"checks with unexpected verdicts: {', '.join(unexpected)}")


# 1) pipelines shared by the checks

def _random_bump(space, rng, label, cells=128):
    span = float(space.high[0] - space.low[0])
    width = span * rng.uniform(0.1, 0.25)
    center = space.low[0] + width + rng.random() * (span - 2 * width)
    return build_measure(space, {"shape": "bump", "center": [center], "width": width, "cells": cells, "label": label})


def _measure_pairs(ctx, params, rng):
    count = int(params.get("random_pairs", 0))
    if count <= 0:
        return [(ctx.measure(params["mu"]), ctx.measure(params["nu"]))]
    if ctx.space.dim != 1:
        raise ScenarioParseError("random bump pairs are drawn on 1-D models only")
    return [(_random_bump(ctx.space, rng, f"mu{k}"), _random_bump(ctx.space, rng, f"nu{k}")) for k in range(count)]


def build_plan(space, mu, nu, n_t, bins=16):
    """
    A dynamical plan and its density path: the exact quantile coupling for
    1-D cell measures, network simplex plus binning otherwise.
    """
    if space.dim == 1 and mu.is_cells and nu.is_cells:
        plan = transport.ot_1d(mu, nu, space)
        ref = reference_for(space, mu)
        dyn, path = transport.displacement_path(plan, space, n_t, ref=ref)
        return dyn, path, ref
    plan = transport.ot_exact(mu, nu, space)
    ref = transport.grid_reference(space, bins)
    dyn, path = transport.displacement_path(plan, space, n_t, ref=ref, bins=bins)
    return dyn, path, ref


def _over_pairs(ctx, spec, rng, check):
    p = spec.params
    verdicts = []
    for mu, nu in _measure_pairs(ctx, p, rng):
        dyn, path, ref = build_plan(ctx.space, mu, nu, int(p["n_t"]), int(p["bins"]))
        verdicts.append(check(dyn, path, ref))
    if len(verdicts) == 1:
        return verdicts[0]
    worst = min(verdicts, key=lambda v: v.margin)
    verdict = combine(worst.condition, verdicts, K=spec.K, N=worst.N)
    verdict.extras = {"pairs": len(verdicts), "failing_pairs": sum(not v.passed for v in verdicts)}
    return verdict


def _generator(ctx, spec):
    p = spec.params
    try:
        return semigroup.build_generator(ctx.space, ctx.field, int(p["m"]), scheme=p.get("scheme"))
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc


def _cell_measure(ctx, name):
    mu = ctx.measure(name)
    if not mu.is_cells:
        raise ScenarioParseError(f"measure {name!r} must be a 1-D cell measure for the flow checks")
    return mu


def _chart_center(space):
    return 0.5 * (space.low + space.high)


PAIR_PARAMS = {"mu": "mu", "nu": "nu", "n_t": 11, "bins": 16, "random_pairs": 0}
FLOW_PARAMS = {"m": 256, "t": [0.1, 0.2, 0.5, 1.0], "richardson": True, "scheme": None}


# 2) the registry

@register("bakry-emery-scan", "Thm 4.2 ric^N >= K lower-bound scan", {"n_points": 100, "n_dirs": 8})
def _bakry_emery_scan(ctx, spec, rng):
    """Infimum of ric^N over a point grid and a direction fan."""
    report = fields.lower_bound_scan(ctx.space, ctx.field, spec.N, spec.params["n_points"], spec.params["n_dirs"])
    if not report.bounded:
        witness = Witness(t=None, geodesic=None, lhs=-math.inf, rhs=spec.K, margin=-math.inf, tag="unbounded")
        return Verdict(condition="BakryEmery", K=spec.K, N=spec.N, margin=-math.inf, passed=False,
                       witnesses=[witness], extras={"point": np.asarray(report.worst_point).tolist()})
    margin = report.inf_estimate - spec.K
    witness = Witness(t=None, geodesic=None, lhs=report.inf_estimate, rhs=spec.K, margin=margin,
                      tag=f"x={np.round(report.worst_point, 6).tolist()}")
    tol = tolerance("EXACT_TOL", ctx.tolerance_scale) * (1 + abs(spec.K))
    return Verdict(
        condition="BakryEmery", K=spec.K, N=spec.N, margin=margin, passed=margin >= -tol,
        witnesses=[witness],
        extras={"inf_estimate": report.inf_estimate, "direction": np.asarray(report.worst_direction).tolist()},
    )


@register("cd", "Def 3.1 CD(K,N) tau-coefficients", PAIR_PARAMS, finite_n=True)
def _cd(ctx, spec, rng):
    """Integrated Renyi inequality with tau coefficients."""
    return _over_pairs(ctx, spec, rng, lambda dyn, path, ref: cdcheck.check_cd_finite(
        dyn, path, ctx.field, ref, spec.K, spec.N, False, ctx.tolerance_scale))


@register("cd-star", "Def 3.1 reduced CD*(K,N) sigma-coefficients", PAIR_PARAMS, finite_n=True)
def _cd_star(ctx, spec, rng):
    """Integrated Renyi inequality with sigma coefficients."""
    return _over_pairs(ctx, spec, rng, lambda dyn, path, ref: cdcheck.check_cd_finite(
        dyn, path, ctx.field, ref, spec.K, spec.N, True, ctx.tolerance_scale))


@register("cd-inf", "Def 3.2 K-convex entropy", PAIR_PARAMS)
def _cd_inf(ctx, spec, rng):
    """K-convexity of Ent(mu_t) - phi_t(Pi)."""
    return _over_pairs(ctx, spec, rng, lambda dyn, path, ref: cdcheck.check_cd_inf(
        path, dyn, ctx.field, ref, spec.K, ctx.tolerance_scale))


@register("cd-entropic", "Def 3.2 (K,N)-convex exponential entropy", PAIR_PARAMS, finite_n=True)
def _cd_entropic(ctx, spec, rng):
    """U_N e^{phi/N} against the sigma combination."""
    return _over_pairs(ctx, spec, rng, lambda dyn, path, ref: cdcheck.check_cd_entropic(
        path, dyn, ctx.field, ref, spec.K, spec.N, ctx.tolerance_scale))


@register("pointwise", "Thm 3.5(ii) pointwise density inequality", dict(PAIR_PARAMS, use_tau=False),
          finite_n=True)
def _pointwise(ctx, spec, rng):
    """Per-geodesic density inequality."""
    return _over_pairs(ctx, spec, rng, lambda dyn, path, ref: cdcheck.check_pointwise(
        dyn, path, ctx.field, ref, spec.K, spec.N, bool(spec.params["use_tau"]), ctx.tolerance_scale))


@register("kantorovich-duality", "§2 Eq. (2.2) Kantorovich duality and potential form",
          {"mu": "mu", "nu": "nu", "step": 1e-3})
def _kantorovich_duality(ctx, spec, rng):
    """Dual value and potential-form phi_1(Pi) against the primal plan."""
    if ctx.space.kind is not geometry.Kind.INTERVAL:
        raise ScenarioParseError("kantorovich-duality runs on Interval models")
    mu, nu = _cell_measure(ctx, spec.params["mu"]), _cell_measure(ctx, spec.params["nu"])
    dyn, _, _ = build_plan(ctx.space, mu, nu, 2)
    phi = transport.kantorovich_potential_1d(mu, nu, step=float(spec.params["step"]))
    w2 = dyn.w2_squared
    dual = transport.duality_value(phi, mu, nu)
    primal_phi = float(dyn.phi_of_plan(ctx.field)[-1])
    potential_phi = transport.potential_form_line_integral(phi, mu, ctx.field, 1.0)
    rows = [
        Witness(t=None, geodesic=None, lhs=dual, rhs=w2, margin=-abs(dual - w2), tag="duality"),
        Witness(t=None, geodesic=None, lhs=potential_phi, rhs=primal_phi,
                margin=-abs(potential_phi - primal_phi), tag="phi-forms"),
    ]
    tol = tolerance("BINNED_TOL", ctx.tolerance_scale) * (1 + w2)
    margin = min(w.margin for w in rows)
    return Verdict(condition="Duality", K=None, N=None, margin=margin, passed=margin >= -tol,
                   witnesses=rows, extras={"w2_squared": w2})


def _sample_point(space, rng):
    if space.kind is geometry.Kind.SPHERE2:
        return np.array([rng.uniform(0.25, math.pi - 0.25), rng.uniform(0.0, 2 * math.pi)])
    low, high = space.low.copy(), space.high.copy()
    for i in range(space.dim):
        if not space.periodic[i]:
            pad = 0.05 * (high[i] - low[i])
            low[i], high[i] = low[i] + pad, high[i] - pad
    return low + rng.random(space.dim) * (high - low)


@register("jacobi-ode", "Thm 4.2 Jacobi determinant concavity",
          {"n_geodesics": 16, "n_initial": 4, "length": 1.0, "scale": 0.5})
def _jacobi_ode(ctx, spec, rng):
    """Jacobi-field inequalities over random geodesics and a fan of initial data."""
    p = spec.params
    space = ctx.space
    fan = cdcheck.jacobi_initial_fan(space.dim, int(p["n_initial"]), float(p["scale"]))
    verdicts, skipped = [], 0
    for g in range(int(p["n_geodesics"])):
        x = _sample_point(space, rng)
        frame = space.orthonormal_frame(x)
        u = rng.standard_normal(space.dim)
        w = frame @ (u / np.linalg.norm(u))
        try:
            geo = geometry.geodesic_shoot(space, x, float(p["length"]) * w)
        except NUMERICAL_ERRORS as exc:
            logger.debug(f"geodesic {g} skipped: {exc}")
            skipped += 1
            continue
        for initial in fan:
            try:
                verdicts.append(cdcheck.check_jacobi_ode(space, geo, ctx.field, spec.K, spec.N, initial, g,
                                                         ctx.tolerance_scale))
            except NUMERICAL_ERRORS as exc:
                logger.debug(f"geodesic {g} skipped: {exc}")
                skipped += 1
    if not verdicts:
        raise NumericalAbort("no admissible geodesic for the Jacobi check")
    verdict = combine("JacobiODE", verdicts, K=spec.K, N=spec.N)
    verdict.extras = {"runs": len(verdicts), "skipped": skipped}
    return verdict


@register("counterexample", "Thm 4.2 contradiction scan", {"n_trials": 200})
def _counterexample(ctx, spec, rng):
    """Searches Jacobi data violating the inequalities; fails when one is found."""
    return cdcheck.counterexample_scan(ctx.space, ctx.field, spec.K, spec.N, int(spec.params["n_trials"]),
                                       ctx.tolerance_scale)


@register("bishop-gromov", "Thm 5.1 generalized Bishop-Gromov",
          {"center": None, "pairs": [[0.5, 1.0], [1.0, 2.0], [2.0, 3.0]], "quadrature_n": None},
          finite_n=True)
def _bishop_gromov(ctx, spec, rng):
    """Ball and sphere ratios against the (K,N) model."""
    p = spec.params
    center = _chart_center(ctx.space) if p["center"] is None else np.asarray(p["center"], dtype=float)
    pairs = [(float(r), float(R)) for r, R in p["pairs"]]
    radii = sorted({x for pair in pairs for x in pair})
    try:
        profile = comparison.volume_profile(ctx.space, ctx.field, center, radii, p["quadrature_n"])
        return comparison.bishop_gromov_pairs(profile, spec.K, spec.N, pairs, ctx.tolerance_scale)
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc


@register("bonnet-myers", "Thm 5.3 diameter bound pi sqrt((N-1)/K)", {"n_points": 100, "n_dirs": 8},
          finite_n=True)
def _bonnet_myers(ctx, spec, rng):
    """Diameter against pi sqrt((N-1)/K) when the scan certifies ric^N >= K."""
    return comparison.bonnet_myers_check(ctx.space, ctx.field, spec.K, spec.N,
                                         n_points=spec.params["n_points"], n_dirs=spec.params["n_dirs"])


@register("packing", "§5 packing quantities M and m", {"eps": [0.25, 0.5], "n_candidates": 32,
                                                       "quadrature_n": None})
def _packing(ctx, spec, rng):
    """Greedy packing sums against the e^{|Z|D} envelope."""
    p = spec.params
    space = ctx.space
    try:
        cover = comparison.polar_radius(space)
        total = comparison.volume_profile(space, fields.zero_field(space.dim), _chart_center(space), [cover],
                                          p["quadrature_n"]).v[-1]
        field_sup = fields.sup_norm(space, ctx.field)
        verdict = comparison.packing_check(space, ctx.field, p["eps"], field_sup, total,
                                           int(p["n_candidates"]), p["quadrature_n"], ctx.tolerance_scale)
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc
    if spec.N != math.inf and spec.K > 0 and verdict.extras["best_eps"] < cover:
        verdict.extras["count_bound"] = comparison.packing_count_bound(
            spec.K, spec.N, space.diameter, verdict.extras["best_eps"], verdict.extras["ratio"])
    return verdict


@register("warped-ricci", "Thm 6.1 warped product N-Ricci formula", {"sample_n": 500, "K_F": None})
def _warped_ricci(ctx, spec, rng):
    """Product formula of the warped Bakry-Emery tensor at sampled triples."""
    if ctx.warp is None:
        raise ScenarioParseError("warped-ricci needs a warped space kind")
    p = spec.params
    try:
        return warped.warped_ricci_check(ctx.warp, spec.K, p["K_F"], int(p["sample_n"]), rng, ctx.tolerance_scale)
    except ConditionViolated as exc:
        witness = Witness(t=None, geodesic=None, lhs=exc.value, rhs=0.0, margin=exc.value,
                          tag=f"condition ({exc.condition}) at {exc.where}")
        return Verdict(condition="WarpedCD", K=spec.K, N=spec.N, margin=exc.value, passed=False,
                       witnesses=[witness], note=str(exc))
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc


@register("sphere-example", "Example §6 N-warped sphere CD(N,N+1)", {"alpha": 0.0, "kappa": None, "sample_n": 500},
          finite_n=True)
def _sphere_example(ctx, spec, rng):
    """The warped sphere over [0, pi]: CD(N, N+1) and the attained diameter pi."""
    p = spec.params
    try:
        bundle = warped.sphere_example(spec.N, float(p["alpha"]), p["kappa"], int(p["sample_n"]), rng,
                                       ctx.tolerance_scale)
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc
    return bundle.verdict


@register("convex-domain", "§6 convex-domain split bound CD(K+K', N+n)", {"n_points": 100, "n_dirs": 8},
          finite_n=True)
def _convex_domain(ctx, spec, rng):
    """Split curvature and drift bounds against the direct ric^{N+n} scan."""
    return warped.convex_domain_check(ctx.space, ctx.field, spec.N, spec.params["n_points"],
                                      spec.params["n_dirs"], ctx.tolerance_scale)


@register("contraction", "Cor 7.5 e^{−2Kt} envelope", dict(FLOW_PARAMS, mu="mu", nu="nu"))
def _contraction(ctx, spec, rng):
    """W2(H_t mu, H_t nu)^2 <= e^{-2Kt} W2(mu, nu)^2."""
    p = spec.params
    gen = _generator(ctx, spec)
    return semigroup.contraction_check(gen, _cell_measure(ctx, p["mu"]), _cell_measure(ctx, p["nu"]), spec.K,
                                       p["t"], bool(p["richardson"]), ctx.tolerance_scale)


@register("evi", "Prop 7.3 EVI_K for the dual flow", dict(FLOW_PARAMS, mu="mu", nu="nu"))
def _evi(ctx, spec, rng):
    """Evolution variational inequality along the dual flow."""
    p = spec.params
    gen = _generator(ctx, spec)
    return semigroup.evi_check(gen, _cell_measure(ctx, p["mu"]), _cell_measure(ctx, p["nu"]), spec.K,
                               p["t"], bool(p["richardson"]), ctx.tolerance_scale)


@register("kuwada", "Prop 7.2 Kuwada speed bound", dict(FLOW_PARAMS, mu="mu"))
def _kuwada(ctx, spec, rng):
    """Metric speed of H_t mu against the Fisher-type integral."""
    p = spec.params
    gen = _generator(ctx, spec)
    return semigroup.kuwada_speed_check(gen, _cell_measure(ctx, p["mu"]), p["t"], bool(p["richardson"]),
                                        ctx.tolerance_scale)


@register("gradient-estimate", "Cor 7.6 BE(K,inf) gradient estimate",
          {"m": 256, "t": [0.1, 0.2, 0.5, 1.0], "scheme": None, "function": {"kind": "sin", "frequency": 1.0}})
def _gradient_estimate(ctx, spec, rng):
    """|grad P_t f|^2 <= e^{-2Kt} P_t |grad f|^2 on the grid."""
    gen = _generator(ctx, spec)
    f = grid_function(gen.nodes, spec.params["function"])
    return semigroup.gradient_estimate_check(gen, f, spec.K, spec.params["t"], ctx.tolerance_scale)


# 3) scenario pipeline

def load_scenario(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError(f"scenario {path} is not a JSON object")
    return data


def build_context(data, seed=None, tolerance_scale=None):
    """Validate scenario data and build its space, field and measures."""
    scenario = parse_scenario(data)
    built = build_space(scenario["space"]["kind"], scenario["space"].get("params"))
    space = built.space
    family = scenario["field"].get("family", "zero")
    potential = None
    if built.field is not None:
        if family != "zero":
            raise ScenarioParseError("warped spaces carry their own lifted field; use the zero family")
        field_spec = built.field
    else:
        field_spec, potential = build_field(family, scenario["field"].get("params"), space.dim)

    measures = {}
    for name, shape in scenario["measures"].items():
        try:
            measures[name] = build_measure(space, dict(shape, label=shape.get("label", name)))
        except ValueError as exc:
            raise ScenarioParseError(f"measure {name!r}: {exc}") from exc

    if seed is None:
        seed = scenario.get("seed", setting("SEED"))
    if tolerance_scale is None:
        tolerance_scale = setting("TOLERANCE_SCALE")
    ctx = ScenarioContext(
        name=scenario["name"], space=space, field=field_spec, measures=measures, seed=int(seed),
        tolerance_scale=float(tolerance_scale), potential=potential, warp=built.warp,
    )

    specs = []
    for index, check in enumerate(scenario["checks"]):
        definition = CHECKS[check["name"]]
        if definition.finite_n and check["N"] == math.inf:
            raise ScenarioParseError(f"{check['name']} needs a finite N")
        params = dict(definition.params)
        params.update(check["params"])
        specs.append(CheckSpec(
            name=check["name"], K=float(check["K"]), N=float(check["N"]), params=params,
            expect=check["expect"] == "pass", index=index,
        ))
    return ctx, specs, scenario["output"]


def run_check(ctx, spec):
    definition = CHECKS[spec.name]
    rng = np.random.default_rng(ctx.seed + spec.index)
    logger.info(f"running {definition.listing} (K={spec.K}, N={spec.N})")
    try:
        verdict = definition.runner(ctx, spec, rng)
    except (*NUMERICAL_ERRORS, ValueError, ArithmeticError) as exc:
        # parameters were validated when the context was built
        raise NumericalAbort(f"{spec.name}: {exc}") from exc
    return CheckOutcome(spec=spec, definition=definition, verdict=verdict)


def run_checks(ctx, specs, threads=None):
    threads = max(1, int(threads or setting("THREADS")))
    if threads == 1:
        outcomes = [run_check(ctx, spec) for spec in specs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda spec: run_check(ctx, spec), specs))
    return sorted(outcomes, key=lambda o: (o.spec.name, o.spec.index))


def run_scenario(path, threads=None, seed=None, tolerance_scale=None, csv_dir=None, save=False):
    """Load, validate and execute a scenario file. Raises ScenarioParseError or NumericalAbort."""
    ctx, specs, output = build_context(load_scenario(path), seed, tolerance_scale)
    outcomes = run_checks(ctx, specs, threads)
    result = ScenarioResult(context=ctx, outcomes=outcomes)
    csv_dir = csv_dir or output.get("csv_dir")
    if csv_dir:
        result.csv_paths = write_curves(result, csv_dir)
    if save:
        result.run = save_result(result)
    return result


# 4) output

def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def to_record(outcome, run=None):
    """An unsaved CheckRecord for one outcome."""
    verdict = outcome.verdict
    extras = _jsonable(verdict.extras)
    if verdict.margin is not None and not math.isfinite(verdict.margin):
        extras["margin"] = _jsonable(verdict.margin)
    if verdict.note:
        extras["note"] = verdict.note
    return CheckRecord(
        run=run, name=outcome.spec.name, anchor=outcome.definition.listing,
        condition=verdict.condition, K=_finite_or_none(verdict.K), N=_finite_or_none(verdict.N),
        margin=_finite_or_none(verdict.margin), passed=bool(verdict.passed), expect=outcome.spec.expect,
        witnesses=[_jsonable(w.as_dict()) for w in verdict.witnesses], extras=extras,
    )


def save_result(result):
    ctx = result.context
    run = VerificationRun.objects.create(
        scenario=ctx.name, seed=ctx.seed, tolerance_scale=ctx.tolerance_scale,
        passed=result.passed, note=COEFFICIENT_NOTE,
    )
    CheckRecord.objects.bulk_create([to_record(o, run) for o in result.outcomes])
    logger.info(f"saved run {run.pk} with {len(result.outcomes)} checks")
    return run


def curve_frame(verdict):
    rows = [[_finite_or_none(x) for x in row] for row in verdict.curve]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_curves(result, csv_dir):
    """One CSV per check, named after the check and its position in the scenario."""
    out = Path(csv_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for outcome in result.outcomes:
        path = out / f"{outcome.key}.csv"
        curve_frame(outcome.verdict).to_csv(
            path, index=False, lineterminator="\n", encoding="utf-8", float_format="%.12g",
        )
        paths.append(path)
    return paths


def report_lines(result):
    """Header with the reading note, then one line per check carrying its anchor."""
    ctx = result.context
    lines = [
        f"scenario {ctx.name} on {ctx.space!r} with field {ctx.field.name} (seed={ctx.seed}, "
        f"tolerance scale={ctx.tolerance_scale:g})",
        f"note: {COEFFICIENT_NOTE}",
    ]
    for outcome in result.outcomes:
        verdict = outcome.verdict
        state = "PASS" if verdict.passed else "FAIL"
        expected = "" if outcome.ok else f" (expected {'PASS' if outcome.spec.expect else 'FAIL'})"
        lines.append(f"[{state}] {outcome.definition.listing} | {verdict.summary()}{expected}")
        if not outcome.ok or not verdict.passed:
            for w in verdict.witnesses[:3]:
                where = f"t={w.t:.6g}" if w.t is not None else "-"
                lines.append(f"    witness {where} {w.tag}: lhs={w.lhs:.6g} rhs={w.rhs:.6g} margin={w.margin:.3e}")
    lines.append("verdict: " + ("all checks as expected" if result.passed else "unexpected verdicts"))
    return lines


def json_report(result):
    records = [to_record(o) for o in result.outcomes]
    return {
        "scenario": result.context.name,
        "seed": result.context.seed,
        "note": COEFFICIENT_NOTE,
        "passed": result.passed,
        "checks": CheckRecordSerializer(records, many=True).data,
    }
