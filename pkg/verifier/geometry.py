# verifier/geometry.py
"""
Chart-based model Riemannian spaces: geodesics, distances, curvature and the
matrix Jacobi equation along a geodesic.

Interval, Circle, Sphere2 and FlatTorus2 carry closed forms. WarpedProduct
(built by verifier.warped) goes through the generic path: finite-difference
Christoffel symbols, RK4 geodesics and a parallel Fermi frame.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .conf import setting
from .exceptions import ConjugatePoint, LeavesChart

logger = logging.getLogger(__name__)


class Kind(enum.Enum):
    INTERVAL = "interval"
    CIRCLE = "circle"
    SPHERE2 = "sphere2"
    FLAT_TORUS2 = "flat-torus2"
    WARPED_PRODUCT = "warped-product"


CLOSED_FORM_KINDS = {Kind.INTERVAL, Kind.CIRCLE, Kind.SPHERE2, Kind.FLAT_TORUS2}


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """
    A Riemannian model on one coordinate chart.

    `metric` maps a chart point to the SPD matrix g(x); `weight` is the density
    of the reference measure against Riemannian volume (None means 1).
    `sectional` is the constant sectional curvature when there is one, which
    lets the Jacobi equation skip the generic curvature tensor.
    """

    dim: int
    kind: Kind
    low: np.ndarray
    high: np.ndarray
    periodic: tuple
    metric: Callable
    weight: Optional[Callable] = None
    sectional: Optional[float] = None
    ricci_form: Optional[Callable] = None
    diameter: float = math.inf
    params: dict = field(default_factory=dict)

    @property
    def periods(self):
        return self.high - self.low

    def weight_at(self, x):
        if self.weight is None:
            return 1.0
        return float(self.weight(np.asarray(x, dtype=float)))

    def inner(self, x, u, v):
        return float(np.asarray(u) @ self.metric(np.asarray(x, dtype=float)) @ np.asarray(v))

    def norm(self, x, v):
        return math.sqrt(max(self.inner(x, v, v), 0.0))

    def contains(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            if x[i] < self.low[i] - 1e-12 or x[i] > self.high[i] + 1e-12:
                return False
        return True

    def wrap(self, x):
        x = np.array(np.atleast_1d(x), dtype=float)
        for i in range(self.dim):
            if self.periodic[i]:
                x[i] = self.low[i] + np.mod(x[i] - self.low[i], self.periods[i])
        return x

    def orthonormal_frame(self, x):
        """Columns are a g-orthonormal basis of T_x (via Cholesky of g)."""
        g = self.metric(np.asarray(x, dtype=float))
        chol = np.linalg.cholesky(g)
        return np.linalg.inv(chol).T

    def __repr__(self):
        return f"ModelSpace({self.kind.value}, dim={self.dim}, {self.params})"


# 1) model constructors

def _flat_metric(dim):
    eye = np.eye(dim)
    return lambda x: eye


def interval(a=0.0, b=math.pi, weight=None):
    return ModelSpace(
        dim=1, kind=Kind.INTERVAL,
        low=np.array([a], dtype=float), high=np.array([b], dtype=float),
        periodic=(False,), metric=_flat_metric(1), weight=weight,
        sectional=0.0, ricci_form=lambda x, v: 0.0,
        diameter=float(b - a), params={"a": a, "b": b},
    )


def circle(length=2 * math.pi):
    return ModelSpace(
        dim=1, kind=Kind.CIRCLE,
        low=np.array([0.0]), high=np.array([float(length)]),
        periodic=(True,), metric=_flat_metric(1),
        sectional=0.0, ricci_form=lambda x, v: 0.0,
        diameter=length / 2.0, params={"length": length},
    )


def flat_torus2(lx=2 * math.pi, ly=2 * math.pi):
    return ModelSpace(
        dim=2, kind=Kind.FLAT_TORUS2,
        low=np.zeros(2), high=np.array([float(lx), float(ly)]),
        periodic=(True, True), metric=_flat_metric(2),
        sectional=0.0, ricci_form=lambda x, v: 0.0,
        diameter=math.hypot(lx / 2.0, ly / 2.0), params={"lx": lx, "ly": ly},
    )


def sphere2(radius=1.0):
    """Round sphere in (polar, azimuth) coordinates with pole caps of POLE_CAP."""
    cap = setting("POLE_CAP")

    def metric(x):
        s = max(math.sin(x[0]), cap)
        return np.diag([radius**2, radius**2 * s * s])

    def ricci(x, v):
        return (1.0 / radius**2) * float(np.asarray(v) @ metric(x) @ np.asarray(v))

    return ModelSpace(
        dim=2, kind=Kind.SPHERE2,
        low=np.array([0.0, 0.0]), high=np.array([math.pi, 2 * math.pi]),
        periodic=(False, True), metric=metric,
        sectional=1.0 / radius**2, ricci_form=ricci,
        diameter=math.pi * radius, params={"radius": radius},
    )


# 2) sphere embedding helpers

def _sphere_frame(theta, phi):
    """Unit position and the orthonormal e_theta, e_phi at a chart point."""
    st, ct, sp, cp = math.sin(theta), math.cos(theta), math.sin(phi), math.cos(phi)
    pos = np.array([st * cp, st * sp, ct])
    e_theta = np.array([ct * cp, ct * sp, -st])
    e_phi = np.array([-sp, cp, 0.0])
    return pos, e_theta, e_phi


def sphere_to_ambient(x, v=None):
    pos, e_theta, e_phi = _sphere_frame(x[0], x[1])
    if v is None:
        return pos
    vel = v[0] * e_theta + v[1] * math.sin(x[0]) * e_phi
    return pos, vel


def ambient_to_sphere(p, dp=None):
    cap = setting("POLE_CAP")
    p = p / np.linalg.norm(p)
    theta = math.acos(min(1.0, max(-1.0, p[2])))
    phi = math.atan2(p[1], p[0]) % (2 * math.pi)
    x = np.array([theta, phi])
    if dp is None:
        return x
    _, e_theta, e_phi = _sphere_frame(theta, phi)
    s = max(math.sin(theta), cap)
    return x, np.array([dp @ e_theta, (dp @ e_phi) / s])


# 3) geodesics

@dataclass
class GeodesicPath:
    """Constant-speed geodesic sampled on an increasing t-grid over [0,1]."""

    space: ModelSpace
    t: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    speed: float
    start: np.ndarray
    initial_velocity: np.ndarray
    ambient: Optional[np.ndarray] = None
    ambient_velocity: Optional[np.ndarray] = None
    energy_drift: float = 0.0

    @property
    def samples(self):
        return list(zip(self.t, self.points, self.velocities))

    def at(self, t):
        """Point at parameter t; closed form where the model has one."""
        if self.space.kind in CLOSED_FORM_KINDS:
            return geodesic_point(self.space, self.start, self.initial_velocity, t)
        spline = CubicSpline(self.t, self.points, axis=0)
        return self.space.wrap(spline(t))

    def reversed(self):
        """Same curve run from gamma(1) back to gamma(0)."""
        return GeodesicPath(
            space=self.space,
            t=1.0 - self.t[::-1],
            points=self.points[::-1].copy(),
            velocities=-self.velocities[::-1].copy(),
            speed=self.speed,
            start=self.points[-1].copy(),
            initial_velocity=-self.velocities[-1].copy(),
            ambient=None if self.ambient is None else self.ambient[::-1].copy(),
            ambient_velocity=(
                None if self.ambient_velocity is None else -self.ambient_velocity[::-1].copy()
            ),
        )


def geodesic_point(space, x, v, t):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if space.kind in (Kind.INTERVAL, Kind.CIRCLE, Kind.FLAT_TORUS2):
        return space.wrap(x + t * v)
    if space.kind is Kind.SPHERE2:
        radius = space.params["radius"]
        pos, vel = sphere_to_ambient(x, v)
        speed = np.linalg.norm(vel)
        if speed == 0:
            return x.copy()
        direction = vel / speed
        # vel is measured on the unit sphere; arc length scales with radius
        omega = speed * t
        return ambient_to_sphere(pos * math.cos(omega) + direction * math.sin(omega))
    raise ValueError(f"no closed-form geodesic for {space.kind.value}")


def _closed_form_shoot(space, x, v, ts):
    if space.kind is Kind.SPHERE2:
        pos, vel = sphere_to_ambient(x, v)
        speed = float(np.linalg.norm(vel))
        direction = vel / speed if speed > 0 else np.zeros(3)
        omegas = speed * ts
        amb = np.outer(np.cos(omegas), pos) + np.outer(np.sin(omegas), direction)
        amb_vel = speed * (-np.outer(np.sin(omegas), pos) + np.outer(np.cos(omegas), direction))
        points, velocities = [], []
        for p, dp in zip(amb, amb_vel):
            q, dq = ambient_to_sphere(p, dp)
            points.append(q)
            velocities.append(dq)
        return np.array(points), np.array(velocities), amb, amb_vel

    points = np.array([space.wrap(x + t * v) for t in ts])
    velocities = np.tile(v, (len(ts), 1))
    if space.kind is Kind.INTERVAL:
        for t, p in zip(ts, x + np.outer(ts, v)):
            if not space.contains(p):
                raise LeavesChart(p, t)
    return points, velocities, None, None


def christoffel(space, x):
    """Gamma[k, i, j] at x. Closed form for flat kinds and Sphere2."""
    x = np.asarray(x, dtype=float)
    n = space.dim
    if space.kind in (Kind.INTERVAL, Kind.CIRCLE, Kind.FLAT_TORUS2):
        return np.zeros((n, n, n))
    if space.kind is Kind.SPHERE2:
        cap = setting("POLE_CAP")
        st = max(math.sin(x[0]), cap)
        ct = math.cos(x[0])
        gamma = np.zeros((2, 2, 2))
        gamma[0, 1, 1] = -st * ct
        gamma[1, 0, 1] = gamma[1, 1, 0] = ct / st
        return gamma
    return christoffel_fd(space.metric, x, setting("FD_STEP"))


def christoffel_fd(metric, x, h):
    """Christoffel symbols of the second kind by central differences of g."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    dg = np.zeros((n, n, n))  # dg[l, i, j] = d_l g_ij
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[l] = (metric(x + e) - metric(x - e)) / (2 * h)
    ginv = np.linalg.inv(metric(x))
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    lowered = 0.5 * (dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))
    return np.einsum("kl,ijl->kij", ginv, lowered)


def _geodesic_rhs(space, state):
    n = space.dim
    x, v = state[:n], state[n:]
    gamma = christoffel(space, x)
    acc = -np.einsum("kij,i,j->k", gamma, v, v)
    return np.concatenate([v, acc])


def _rk4_shoot(space, x, v, ts):
    n = space.dim
    substeps = setting("ODE_SUBSTEPS")
    state = np.concatenate([x, v]).astype(float)
    points, velocities = [state[:n].copy()], [state[n:].copy()]
    for k in range(1, len(ts)):
        dt = (ts[k] - ts[k - 1]) / substeps
        for _ in range(substeps):
            k1 = _geodesic_rhs(space, state)
            k2 = _geodesic_rhs(space, state + 0.5 * dt * k1)
            k3 = _geodesic_rhs(space, state + 0.5 * dt * k2)
            k4 = _geodesic_rhs(space, state + dt * k3)
            state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not space.contains(state[:n]):
                raise LeavesChart(state[:n], ts[k])
        points.append(state[:n].copy())
        velocities.append(state[n:].copy())
    return np.array(points), np.array(velocities)


def geodesic_shoot(space, x, v, n_steps=None):
    """gamma(t) = exp_x(t v) on t in [0,1], sampled at n_steps + 1 points."""
    if n_steps is None:
        n_steps = setting("GEODESIC_STEPS")
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not space.contains(x):
        raise LeavesChart(x, 0.0)
    ts = np.linspace(0.0, 1.0, n_steps + 1)

    ambient = ambient_velocity = None
    if space.kind in CLOSED_FORM_KINDS:
        points, velocities, ambient, ambient_velocity = _closed_form_shoot(space, x, v, ts)
    else:
        points, velocities = _rk4_shoot(space, x, v, ts)

    if space.kind is Kind.SPHERE2:
        # chart velocities blow up at the poles; measure in the ambient space
        radius = space.params["radius"]
        speed = radius * float(np.linalg.norm(sphere_to_ambient(x, v)[1]))
        speeds = radius * np.linalg.norm(ambient_velocity, axis=1)
    else:
        speed = space.norm(x, v)
        speeds = np.array([space.norm(p, w) for p, w in zip(points, velocities)])
    drift = float(np.max(np.abs(speeds - speed))) / max(speed, 1e-300) if speed > 0 else 0.0
    if drift > setting("ENERGY_DRIFT_TOL"):
        logger.warning(f"geodesic energy drift {drift:.2e} on {space!r} from {x}")

    return GeodesicPath(
        space=space, t=ts, points=points, velocities=velocities, speed=speed,
        start=x, initial_velocity=v, ambient=ambient, ambient_velocity=ambient_velocity,
        energy_drift=drift,
    )


# 4) distances

def distance(space, x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if space.kind is Kind.INTERVAL:
        return float(abs(y[0] - x[0]))
    if space.kind in (Kind.CIRCLE, Kind.FLAT_TORUS2):
        diff = np.abs(y - x) % space.periods
        diff = np.minimum(diff, space.periods - diff)
        return float(np.linalg.norm(diff))
    if space.kind is Kind.SPHERE2:
        p, q = sphere_to_ambient(x), sphere_to_ambient(y)
        angle = math.atan2(np.linalg.norm(np.cross(p, q)), float(p @ q))
        return space.params["radius"] * angle
    raise ValueError(f"no closed-form distance for {space.kind.value}")


def pairwise_distance(space, xs, ys):
    """Distance matrix between two point lists (closed-form kinds)."""
    xs = np.asarray(xs, dtype=float).reshape(len(xs), -1)
    ys = np.asarray(ys, dtype=float).reshape(len(ys), -1)
    if space.kind is Kind.INTERVAL:
        return np.abs(xs[:, None, 0] - ys[None, :, 0])
    if space.kind in (Kind.CIRCLE, Kind.FLAT_TORUS2):
        diff = np.abs(xs[:, None, :] - ys[None, :, :]) % space.periods
        diff = np.minimum(diff, space.periods - diff)
        return np.sqrt(np.sum(diff**2, axis=-1))
    if space.kind is Kind.SPHERE2:
        p = np.array([sphere_to_ambient(x) for x in xs])
        q = np.array([sphere_to_ambient(y) for y in ys])
        cross = np.linalg.norm(np.cross(p[:, None, :], q[None, :, :]), axis=-1)
        return space.params["radius"] * np.arctan2(cross, p @ q.T)
    raise ValueError(f"no closed-form distance for {space.kind.value}")


def log_map(space, x, y):
    """Initial velocity of the minimizing geodesic from x to y."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if space.kind is Kind.INTERVAL:
        return y - x
    if space.kind in (Kind.CIRCLE, Kind.FLAT_TORUS2):
        diff = (y - x) % space.periods
        return np.where(diff > space.periods / 2, diff - space.periods, diff)
    if space.kind is Kind.SPHERE2:
        p, q = sphere_to_ambient(x), sphere_to_ambient(y)
        angle = math.atan2(np.linalg.norm(np.cross(p, q)), float(p @ q))
        tangent = q - (p @ q) * p
        norm = np.linalg.norm(tangent)
        if norm == 0:
            return np.zeros(2)
        w = angle * tangent / norm
        _, e_theta, e_phi = _sphere_frame(x[0], x[1])
        s = max(math.sin(x[0]), setting("POLE_CAP"))
        return np.array([w @ e_theta, (w @ e_phi) / s])
    raise ValueError(f"no closed-form log map for {space.kind.value}")


# 5) curvature

def riemann_fd(space, x):
    """R[r, s, m, n] = R^r_{smn} from finite differences of Christoffel symbols."""
    x = np.asarray(x, dtype=float)
    n = space.dim
    h = setting("CURVATURE_FD_STEP")
    gamma = christoffel(space, x)
    dgamma = np.zeros((n, n, n, n))  # dgamma[m, r, s, n] = d_m Gamma^r_sn
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        dgamma[m] = (christoffel(space, x + e) - christoffel(space, x - e)) / (2 * h)
    # R^r_{s m n} = d_m G^r_{ns} - d_n G^r_{ms} + G^r_{ml} G^l_{ns} - G^r_{nl} G^l_{ms}
    term1 = np.einsum("mrns->rsmn", dgamma)
    term2 = np.einsum("nrms->rsmn", dgamma)
    term3 = np.einsum("rml,lns->rsmn", gamma, gamma)
    term4 = np.einsum("rnl,lms->rsmn", gamma, gamma)
    return term1 - term2 + term3 - term4


def generic_ricci(space, x, v):
    """Ric_x(v, v) from the metric alone; the cross-check for closed forms."""
    riem = riemann_fd(space, x)
    ric = np.einsum("rsrn->sn", riem)
    ric = 0.5 * (ric + ric.T)
    v = np.asarray(v, dtype=float)
    return float(v @ ric @ v)


def ricci_at(space, x, v):
    """Ric_x(v, v): closed form per kind, finite differences otherwise."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if space.ricci_form is not None:
        return float(space.ricci_form(np.atleast_1d(np.asarray(x, dtype=float)), v))
    return generic_ricci(space, x, v)


# 6) Jacobi fields

@dataclass
class JacobiMatrixPath:
    t: np.ndarray
    A: np.ndarray
    Aprime: np.ndarray
    U: np.ndarray
    detlog: np.ndarray
    curvature: np.ndarray
    speed: float

    @property
    def trace_U(self):
        return np.trace(self.U, axis1=1, axis2=2)


def _fermi_curvature_constant(k, speed, n, count):
    R = np.zeros((n, n))
    if n > 1:
        R = k * speed**2 * (np.eye(n) - np.outer(np.eye(n)[0], np.eye(n)[0]))
    return np.repeat(R[None], count, axis=0)


def _fermi_curvature_generic(space, geo):
    """R_ij(t) = <R(E_i, g'), g'>, E_j in a parallel frame with E_1 = g'/|g'|."""
    n = space.dim
    ts = geo.t
    if geo.speed == 0:
        return np.zeros((len(ts), n, n))
    point_spline = CubicSpline(ts, geo.points, axis=0)
    vel_spline = CubicSpline(ts, geo.velocities, axis=0)

    x0, v0 = geo.points[0], geo.velocities[0]
    g0 = space.metric(x0)
    # Gram-Schmidt in g starting from the direction of motion
    basis = [v0 / math.sqrt(v0 @ g0 @ v0)]
    for e in np.eye(n):
        w = e - sum((e @ g0 @ b) * b for b in basis)
        norm = math.sqrt(max(w @ g0 @ w, 0.0))
        if norm > 1e-8 and len(basis) < n:
            basis.append(w / norm)
    frame = np.array(basis).T  # columns E_i

    def transport_rhs(t, E):
        gamma = christoffel(space, point_spline(t))
        return -np.einsum("kij,i,jc->kc", gamma, vel_spline(t), E)

    frames = [frame]
    for k in range(1, len(ts)):
        t0, dt = ts[k - 1], ts[k] - ts[k - 1]
        k1 = transport_rhs(t0, frame)
        k2 = transport_rhs(t0 + dt / 2, frame + dt / 2 * k1)
        k3 = transport_rhs(t0 + dt / 2, frame + dt / 2 * k2)
        k4 = transport_rhs(t0 + dt, frame + dt * k3)
        frame = frame + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        frames.append(frame)

    out = np.zeros((len(ts), n, n))
    for k, (x, v, E) in enumerate(zip(geo.points, geo.velocities, frames)):
        riem = riemann_fd(space, x)
        g = space.metric(x)
        for i in range(n):
            # R(E_i, v) v with R(X,Y)Z^r = R^r_{smn} Z^s X^m Y^n
            rv = np.einsum("rsmn,s,m,n->r", riem, v, E[:, i], v)
            for j in range(n):
                out[k, i, j] = rv @ g @ E[:, j]
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def jacobi_evolve(space, geo, A0, A0prime):
    """
    Integrate A'' + R(t) A = 0 in a Fermi frame along geo.

    Returns A_t, U_t = A'_t A_t^{-1} and y_t = log det A_t on geo's t-grid.
    Raises ConjugatePoint at the first interval where det A_t changes sign
    or collapses.
    """
    n = space.dim
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    A0prime = np.atleast_2d(np.asarray(A0prime, dtype=float))
    if abs(np.linalg.det(A0)) < setting("CONJUGATE_DET_TOL"):
        raise ValueError("A0 must be invertible")
    ts = geo.t

    if space.sectional is not None:
        curvature = _fermi_curvature_constant(space.sectional, geo.speed, n, len(ts))
    else:
        curvature = _fermi_curvature_generic(space, geo)
    constant = space.sectional is not None
    spline = None if constant else CubicSpline(ts, curvature, axis=0)

    def R_at(t):
        return curvature[0] if constant else spline(t)

    def rhs(t, A, B):
        return B, -R_at(t) @ A

    substeps = setting("ODE_SUBSTEPS")
    A, B = A0.copy(), A0prime.copy()
    As, Bs = [A.copy()], [B.copy()]
    det_prev = np.linalg.det(A)
    for k in range(1, len(ts)):
        dt = (ts[k] - ts[k - 1]) / substeps
        t = ts[k - 1]
        for _ in range(substeps):
            a1, b1 = rhs(t, A, B)
            a2, b2 = rhs(t + dt / 2, A + dt / 2 * a1, B + dt / 2 * b1)
            a3, b3 = rhs(t + dt / 2, A + dt / 2 * a2, B + dt / 2 * b2)
            a4, b4 = rhs(t + dt, A + dt * a3, B + dt * b3)
            A = A + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            B = B + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            t += dt
            det = np.linalg.det(A)
            if det * det_prev <= 0 or abs(det) < setting("CONJUGATE_DET_TOL"):
                raise ConjugatePoint(t)
            det_prev = det
        As.append(A.copy())
        Bs.append(B.copy())

    As, Bs = np.array(As), np.array(Bs)
    U = np.einsum("tij,tjk->tik", Bs, np.linalg.inv(As))
    detlog = np.log(np.abs(np.linalg.det(As)))
    return JacobiMatrixPath(
        t=ts, A=As, Aprime=Bs, U=U, detlog=detlog, curvature=curvature, speed=geo.speed,
    )
