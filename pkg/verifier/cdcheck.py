# verifier/cdcheck.py
"""
Finite-sample certification or refutation of CD(K,N), CD*(K,N), CD(K,inf),
CDe(K,N), the pointwise density inequality and the Jacobi-field differential
inequalities on concrete plans.

Every inequality is evaluated on the plan's t-grid; a violation is reported
as a negative margin with witnesses, never raised.
"""
import logging
import math

import numpy as np
from scipy.interpolate import CubicSpline

from . import geometry
from .distortion import CurvatureDimension, _sigma, coefficient
from .entropy import cell_measure, ent_along, weighted_renyi
from .exceptions import ConjugatePoint, InfinityMismatch, LeavesChart, NotAbsolutelyContinuous
from .fields import FieldSpec, line_integrals, lower_bound_scan
from .geometry import Kind
from .verdicts import (
    CdVerdict, Condition, Witness, curve_from_rows, grid_slack, reduce_rows, tolerance_for,
)

logger = logging.getLogger(__name__)


def _coefficient_table(kind, t, thetas, K, N):
    """Coefficients at (1-t) and (t) for every geodesic length, cached by length."""
    cd = CurvatureDimension(K, N)
    cache = {}
    out0, out1 = [], []
    for theta in thetas:
        key = float(theta)
        if key not in cache:
            cache[key] = (coefficient(kind, 1 - t, key, cd), coefficient(kind, t, key, cd))
        c0, c1 = cache[key]
        out0.append(c0)
        out1.append(c1)
    return out0, out1


def _ensure_ac(path, i, t):
    if not path.ac[i]:
        raise NotAbsolutelyContinuous(f"density path slice at t={t:.6g} is not absolutely continuous")


# 1) integrated conditions

def check_cd_finite(plan, path, field, ref, K, N, reduced, tolerance_scale=None):
    """
    CD(K,N) (tau, reduced=False) or CD*(K,N) (sigma, reduced=True):
    S^alpha_{N,t}(Pi) <= -int [c^{(1-t)} rho_0^{-1/N} + c^{(t)} e^{phi_1/N} rho_1^{-1/N}] dPi.
    """
    kind = "sigma" if reduced else "tau"
    condition = Condition.CD_STAR if reduced else Condition.CD
    phis = plan.line_integrals(field)
    masses, thetas = plan.masses, plan.thetas
    _ensure_ac(path, 0, 0.0)
    _ensure_ac(path, len(path.t_grid) - 1, 1.0)
    a0 = path.along[0] ** (-1.0 / N)
    a1 = np.exp(phis[:, -1] / N) * path.along[-1] ** (-1.0 / N)

    rows = []
    for i, t in enumerate(path.t_grid):
        _ensure_ac(path, i, t)
        lhs = weighted_renyi(plan, field, N, t, path)
        c0, c1 = _coefficient_table(kind, t, thetas, K, N)
        total, mismatch = 0.0, None
        for g, (m, x0, x1) in enumerate(zip(masses, c0, c1)):
            if m <= 0:
                continue
            if (x0.infinite and a0[g] > 0) or (x1.infinite and a1[g] > 0):
                mismatch = g
                break
            if a0[g] > 0:
                total += m * x0.value * a0[g]
            if a1[g] > 0:
                total += m * x1.value * a1[g]
        if mismatch is not None:
            rows.append(Witness(float(t), mismatch, lhs, -math.inf, -math.inf, InfinityMismatch.tag))
            continue
        rhs = -total
        rows.append(Witness(float(t), None, lhs, rhs, rhs - lhs, kind))

    margin, passed, worst = reduce_rows(rows, tolerance_for(path.mode, tolerance_scale))
    return CdVerdict(
        condition=condition.value, K=K, N=N, margin=margin, passed=passed,
        witnesses=worst, curve=curve_from_rows(rows),
        extras={"mode": path.mode, "coefficient": kind},
    )


def entropy_curve(plan, path, field, ref):
    """(Ent(mu_t), phi_t(Pi)) on the t-grid."""
    ents = []
    for i, t in enumerate(path.t_grid):
        _ensure_ac(path, i, t)
        ents.append(ent_along(plan, path, ref, t))
    return np.array(ents), plan.phi_of_plan(field)


def _convexity_rows(ts, g, K, w2, tag_prefix=""):
    """Chord and consecutive three-point K-convexity rows for g on ts."""
    rows = []
    for i in range(1, len(ts) - 1):
        t = ts[i]
        bound = (1 - t) * g[0] + t * g[-1] - 0.5 * K * t * (1 - t) * w2
        rows.append(Witness(float(t), None, float(g[i]), float(bound), float(bound - g[i]), tag_prefix + "chord"))
    for i in range(1, len(ts) - 1):
        span = ts[i + 1] - ts[i - 1]
        s = (ts[i] - ts[i - 1]) / span
        bound = (1 - s) * g[i - 1] + s * g[i + 1] - 0.5 * K * s * (1 - s) * span**2 * w2
        rows.append(Witness(float(ts[i]), None, float(g[i]), float(bound), float(bound - g[i]), tag_prefix + "three-point"))
    return rows


def check_cd_inf(path, plan, field, ref, K, tolerance_scale=None):
    """t -> Ent(mu_t) - phi_t(Pi) is K-convex: g(t) <= (1-t)g(0) + t g(1) - K/2 t(1-t) W2^2."""
    ents, phi_pi = entropy_curve(plan, path, field, ref)
    g = ents - phi_pi
    w2 = plan.w2_squared
    rows = _convexity_rows(path.t_grid, g, K, w2)
    slack = grid_slack(path.t_grid, g)
    margin, passed, worst = reduce_rows(rows, tolerance_for(path.mode, tolerance_scale), slack=slack)
    curve = [(0.0, float(g[0]), float(g[0]), 0.0)]
    curve += [(w.t, w.lhs, w.rhs, w.margin) for w in rows if w.tag == "chord"]
    curve += [(1.0, float(g[-1]), float(g[-1]), 0.0)]
    return CdVerdict(
        condition=Condition.CD_INF.value, K=K, N=math.inf, margin=margin, passed=passed,
        witnesses=worst, curve=curve, extras={"mode": path.mode, "w2_squared": w2, "grid_slack": slack},
    )


def check_cd_entropic(path, plan, field, ref, K, N, tolerance_scale=None):
    """U_N(mu_t) e^{phi_t(Pi)/N} >= sigma^{(1-t)} U_N(mu_0) + sigma^{(t)} e^{phi_1(Pi)/N} U_N(mu_1)."""
    ents, phi_pi = entropy_curve(plan, path, field, ref)
    u = np.where(np.isfinite(ents), np.exp(-ents / N), 0.0)
    theta = math.sqrt(plan.w2_squared)
    cd = CurvatureDimension(K, N)
    rows = []
    for i, t in enumerate(path.t_grid):
        lhs = float(u[i] * math.exp(phi_pi[i] / N))
        s0, s1 = coefficient("sigma", 1 - t, theta, cd), coefficient("sigma", t, theta, cd)
        if s0.infinite or s1.infinite:
            rows.append(Witness(float(t), None, lhs, math.inf, -math.inf, InfinityMismatch.tag))
            continue
        rhs = s0.value * u[0] + s1.value * math.exp(phi_pi[-1] / N) * u[-1]
        rows.append(Witness(float(t), None, lhs, float(rhs), float(lhs - rhs), "sigma"))
    slack = grid_slack(path.t_grid, u * np.exp(phi_pi / N))
    margin, passed, worst = reduce_rows(rows, tolerance_for(path.mode, tolerance_scale), slack=slack)
    return CdVerdict(
        condition=Condition.CD_E.value, K=K, N=N, margin=margin, passed=passed,
        witnesses=worst, curve=curve_from_rows(rows),
        extras={"mode": path.mode, "theta": theta, "grid_slack": slack},
    )


def check_pointwise(plan, path, field, ref, K, N, use_tau=False, tolerance_scale=None):
    """[rho_t e^{-phi_t}]^{-1/N} >= c^{(1-t)} rho_0^{-1/N} + c^{(t)} [e^{-phi_1} rho_1]^{-1/N} per geodesic."""
    kind = "tau" if use_tau else "sigma"
    phis = plan.line_integrals(field)
    thetas = plan.thetas
    a0 = path.along[0] ** (-1.0 / N)
    a1 = np.exp(phis[:, -1] / N) * path.along[-1] ** (-1.0 / N)
    rows = []
    for i, t in enumerate(path.t_grid):
        lhs = path.along[i] ** (-1.0 / N) * np.exp(phis[:, i] / N)
        c0, c1 = _coefficient_table(kind, t, thetas, K, N)
        for g in range(len(thetas)):
            if plan.masses[g] <= 0:
                continue
            if (c0[g].infinite and a0[g] > 0) or (c1[g].infinite and a1[g] > 0):
                rows.append(Witness(float(t), g, float(lhs[g]), math.inf, -math.inf, InfinityMismatch.tag))
                continue
            rhs = (c0[g].value * a0[g] if a0[g] > 0 else 0.0) + (c1[g].value * a1[g] if a1[g] > 0 else 0.0)
            rows.append(Witness(float(t), g, float(lhs[g]), float(rhs), float(lhs[g] - rhs), kind))
    margin, passed, worst = reduce_rows(rows, tolerance_for(path.mode, tolerance_scale))
    return CdVerdict(
        condition=Condition.POINTWISE.value, K=K, N=N, margin=margin, passed=passed,
        witnesses=worst, curve=curve_from_rows(rows), extras={"mode": path.mode, "coefficient": kind},
    )


# 2) Jacobi-field machinery

def _concavity_rows(ts, values, coeff, tag, geodesic):
    """values(t) >= coeff(1-t) values(0) + coeff(t) values(1) at every t."""
    rows = []
    for i, t in enumerate(ts):
        c0, c1 = coeff(1 - t), coeff(t)
        lhs = float(values[i])
        if c0.infinite or c1.infinite:
            rows.append(Witness(float(t), geodesic, lhs, math.inf, -math.inf, InfinityMismatch.tag))
            continue
        rhs = c0.value * values[0] + c1.value * values[-1]
        rows.append(Witness(float(t), geodesic, lhs, float(rhs), float(lhs - rhs), tag))
    return rows


def check_jacobi_ode(space, geo, field, K, N, initial, geodesic_id=None, tolerance_scale=None):
    """
    Along one geodesic with Jacobi data A_0, A_0' (Fermi frame, first axis the
    direction of motion), I_t = det A_t e^{phi_t} must satisfy:
      (a) I^{1/N} is sigma_{K,N}-concave,
      (b) L = exp(int u_11) is concave and (I/L)^{1/(N-1)} is sigma_{K,N-1}-concave,
      (c) I^{1/N} is tau_{K,N}-concave.
    For N = inf, log I must be K theta^2-concave.
    """
    A0, A0prime = initial
    jac = geometry.jacobi_evolve(space, geo, A0, A0prime)
    ts = geo.t
    phi = np.zeros_like(ts) if field.is_zero else line_integrals(geo, field, ts)
    log_i = jac.detlog + phi
    theta = geo.speed
    n = space.dim
    rows = []

    if N == math.inf:
        for i, t in enumerate(ts):
            bound = (1 - t) * log_i[0] + t * log_i[-1] + 0.5 * K * t * (1 - t) * theta**2
            rows.append(Witness(float(t), geodesic_id, float(log_i[i]), float(bound), float(log_i[i] - bound), "K-concave"))
    else:
        cd = CurvatureDimension(K, N)
        root = np.exp(log_i / N)
        rows += _concavity_rows(ts, root, lambda s: coefficient("sigma", s, theta, cd), "sigma", geodesic_id)
        if n >= 2 and N > 1:
            u11 = jac.U[:, 0, 0]
            lam = CubicSpline(ts, u11).antiderivative()(ts)
            L = np.exp(lam)
            for i, t in enumerate(ts):
                bound = (1 - t) * L[0] + t * L[-1]
                rows.append(Witness(float(t), geodesic_id, float(L[i]), float(bound), float(L[i] - bound), "split-L"))
            reduced = np.exp((log_i - lam) / (N - 1))
            rows += _concavity_rows(ts, reduced, lambda s: _sigma(s, theta, K, N - 1), "split-sigma", geodesic_id)
        if N > 1:
            rows += _concavity_rows(ts, root, lambda s: coefficient("tau", s, theta, cd), "tau", geodesic_id)

    margin, passed, worst = reduce_rows(rows, tolerance_for("exact", tolerance_scale))
    return CdVerdict(
        condition=Condition.JACOBI_ODE.value, K=K, N=N, margin=margin, passed=passed,
        witnesses=worst, curve=curve_from_rows(rows), extras={"theta": theta},
    )


def jacobi_initial_fan(n, count, scale=0.5):
    """Symmetric initial derivatives A_0' = diag-rotated spectra in [-scale, scale]."""
    fan = []
    for k in range(count):
        angle = math.pi * k / max(count, 1)
        if n == 1:
            fan.append((np.eye(1), np.array([[scale * math.cos(2 * angle)]])))
            continue
        rot = np.eye(n)
        c, s = math.cos(angle), math.sin(angle)
        rot[:2, :2] = [[c, -s], [s, c]]
        spectrum = scale * np.cos(2 * angle + np.arange(n) * math.pi / n)
        fan.append((np.eye(n), rot @ np.diag(spectrum) @ rot.T))
    return fan


def counterexample_scan(space, field, K, N, n_trials, tolerance_scale=None):
    """
    Look for a geodesic and Jacobi data violating the Jacobi inequalities
    near the worst sample of ric^N. The data mimic a quadratic potential psi
    with grad psi = -theta v and Hessian making the trace inequality sharp.
    """
    report = lower_bound_scan(space, field, N)
    x, v = report.worst_point, report.worst_direction
    n = space.dim
    max_len = 0.9 * space.diameter
    if K > 0 and N != math.inf and N > 1:
        max_len = min(max_len, 0.9 * math.pi * math.sqrt((N - 1) / K))
    n_len = max(1, int(math.sqrt(n_trials)))
    n_dir = max(1, n_trials // n_len)
    lengths = np.linspace(max_len / n_len, max_len, n_len)
    frame = space.orthonormal_frame(x)
    base = np.linalg.solve(frame, v)

    if n == 1:
        directions = [v, -v]
    else:
        phase = math.atan2(base[1], base[0])
        directions = [frame @ np.array([math.cos(phase + a), math.sin(phase + a)] + [0.0] * (n - 2))
                      for a in np.linspace(-math.pi / 4, math.pi / 4, n_dir)]

    verdicts, tried = [], 0
    for theta in lengths:
        for w in directions:
            if tried >= n_trials:
                break
            tried += 1
            lam = 0.0
            if not field.is_zero and N != math.inf and N > n:
                lam = space.inner(x, field.at(x), w) / (N - n)
            initial = (np.eye(n), theta * lam * np.eye(n))
            try:
                geo = geometry.geodesic_shoot(space, x, theta * w)
                verdicts.append(check_jacobi_ode(space, geo, field, K, N, initial, tried, tolerance_scale))
            except (ConjugatePoint, LeavesChart) as exc:
                logger.debug(f"counterexample trial {tried} skipped: {exc}")

    if not verdicts:
        return CdVerdict(
            condition=Condition.JACOBI_ODE.value, K=K, N=N, margin=math.inf, passed=True,
            extras={"trials": tried, "found": False, "note": "no admissible trial"},
        )
    worst = min(verdicts, key=lambda vd: vd.margin)
    found = not all(vd.passed for vd in verdicts)
    return CdVerdict(
        condition=Condition.JACOBI_ODE.value, K=K, N=N, margin=worst.margin, passed=not found,
        witnesses=worst.witnesses, curve=worst.curve,
        extras={
            "trials": tried, "found": found, "point": np.asarray(x).tolist(),
            "direction": np.asarray(v).tolist(), "scan_inf": report.inf_estimate,
        },
    )


# 3) metamorphic helpers

def scale_instance(space, measures, eta, beta=1.0):
    """
    Distances scaled by eta (and the reference measure by beta) on an
    Interval or Circle. Returns the new space and the pushed-forward cell measures.
    """
    if space.kind is Kind.INTERVAL:
        scaled = geometry.interval(eta * space.low[0], eta * space.high[0])
    elif space.kind is Kind.CIRCLE:
        scaled = geometry.circle(eta * space.params["length"])
    else:
        raise ValueError("scale_instance supports 1-D models only")
    moved = [cell_measure(eta * m.edges, m.weights, label=m.label) for m in measures]
    ref = cell_measure(eta * measures[0].edges, beta * eta * np.diff(measures[0].edges), label="ref")
    return scaled, moved, ref


def scale_field(field, eta):
    """Z_eta(x) = Z(x/eta)/eta keeps every line integral phi_t unchanged."""
    if field.is_zero:
        return field
    return FieldSpec(Z=lambda x: field.at(np.asarray(x) / eta) / eta, name=f"{field.name}@{eta:g}")


def restrict_instance(a, b, cells=128):
    """A convex subinterval [a, b] with its Lebesgue reference cells."""
    space = geometry.interval(a, b)
    edges = np.linspace(a, b, cells + 1)
    return space, cell_measure(edges, np.diff(edges), label="ref")
