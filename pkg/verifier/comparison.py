# verifier/comparison.py
"""
Weighted ball and sphere profiles v^{Z,x0}, s^{Z,x0} by geodesic-polar
quadrature, the Bishop-Gromov and Bonnet-Myers checks, and the packing
quantities M_{X,Z} and m_{X,Z}.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from . import geometry
from .conf import setting, tolerance
from .distortion import sin_kn, sin_power_integral
from .fields import line_integrals, lower_bound_scan, scan_points
from .geometry import Kind
from .verdicts import Verdict, Witness

logger = logging.getLogger(__name__)


@dataclass
class VolumeProfile:
    center: np.ndarray
    radii: np.ndarray
    v: np.ndarray
    s: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.s is not None:
            self.s = np.asarray(self.s, dtype=float)

    def value_at(self, r):
        """v(r), splined between grid radii."""
        return self._lookup(self.v, r)

    def sphere_at(self, r):
        if self.s is None:
            raise ValueError("this profile carries no sphere values")
        return self._lookup(self.s, r)

    def _lookup(self, values, r):
        hits = np.flatnonzero(np.isclose(self.radii, r, rtol=0.0, atol=1e-12))
        if len(hits):
            return float(values[hits[0]])
        if len(self.radii) < 2:
            raise ValueError(f"r={r} is not on a single-radius profile")
        return float(CubicSpline(self.radii, values)(r))

    def difference_quotients(self):
        """(v(r_{k+1}) - v(r_k)) / (r_{k+1} - r_k) on the radii grid."""
        return np.diff(self.v) / np.diff(self.radii)

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.v) >= -1e-12)) and bool(np.all(self.v >= 0))


def polar_radius(space):
    """Largest radius up to which geodesic-polar coordinates cover balls exactly."""
    if space.kind is Kind.INTERVAL:
        return space.diameter
    if space.kind is Kind.CIRCLE:
        return space.params["length"] / 2.0
    if space.kind is Kind.SPHERE2:
        return math.pi * space.params["radius"]
    if space.kind is Kind.FLAT_TORUS2:
        return min(space.params["lx"], space.params["ly"]) / 2.0
    raise ValueError(f"no geodesic-polar quadrature on {space.kind.value}")


def _rays(space, x0, quadrature_n):
    """Unit initial directions with their angular weights."""
    if space.dim == 1:
        return [np.array([1.0]), np.array([-1.0])], [1.0, 1.0]
    if quadrature_n is None:
        quadrature_n = setting("POLAR_RAYS")
    frame = space.orthonormal_frame(x0)
    angles = 2 * math.pi * np.arange(quadrature_n) / quadrature_n
    dirs = [frame @ np.array([math.cos(a), math.sin(a)]) for a in angles]
    return dirs, [2 * math.pi / quadrature_n] * quadrature_n


def _ray_length(space, x0, u, r_max):
    """Interval rays stop at the boundary."""
    if space.kind is not Kind.INTERVAL:
        return r_max
    if u[0] > 0:
        return min(r_max, float(space.high[0] - x0[0]))
    return min(r_max, float(x0[0] - space.low[0]))


def _area_element(space, rho):
    if space.dim == 1:
        return np.ones_like(rho)
    return sin_kn(space.sectional, 1.0, rho) ** (space.dim - 1)


def _ray_integrand(space, field, x0, u, length):
    """(rho_k, e^{phi} * weight * area element) along one ray."""
    nodes = setting("RADIAL_NODES")
    geo = geometry.geodesic_shoot(space, x0, length * u, n_steps=nodes)
    rho = geo.t * length
    values = _area_element(space, rho)
    if not field.is_zero:
        values = values * np.exp(line_integrals(geo, field, geo.t))
    if space.weight is not None:
        values = values * np.array([space.weight_at(p) for p in geo.points])
    return rho, values


def _simpson_upto(fn, r):
    if r <= 0:
        return 0.0
    xs = np.linspace(0.0, r, setting("RADIAL_NODES") + 1)
    return float(simpson(fn(xs), x=xs))


def volume_profile(space, field, x0, radii, quadrature_n=None):
    """
    v(r) = int_{B_r(x0)} e^{phi_1(gamma_{x0,y})} dm(y) and its radial derivative
    s(r) by geodesic-polar quadrature. Every ray is shot once to the largest
    radius and its integrand splined.
    """
    if space.dim > 1 and space.sectional is None:
        raise ValueError("geodesic-polar quadrature needs a constant-curvature model")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and increasing")
    limit = polar_radius(space)
    if radii[-1] > limit + 1e-12:
        raise ValueError(f"radius {radii[-1]} exceeds the polar-coordinate range {limit}")
    r_max = float(radii[-1])

    dirs, weights = _rays(space, x0, quadrature_n)
    v = np.zeros(len(radii))
    s = np.zeros(len(radii))
    fast = field.is_zero and space.weight is None
    for u, w in zip(dirs, weights):
        length = _ray_length(space, x0, u, r_max)
        if length <= 0:
            continue
        if fast:
            integrand = lambda rho: _area_element(space, np.asarray(rho, dtype=float))
        else:
            rho, values = _ray_integrand(space, field, x0, u, length)
            integrand = CubicSpline(rho, values)
        for k, r in enumerate(radii):
            reach = min(r, length)
            v[k] += w * _simpson_upto(integrand, reach)
            if r <= length:
                s[k] += w * float(integrand(np.array([r]))[0])
    logger.debug(f"volume profile on {space!r} at {x0}: v(R)={v[-1]:.6g}")
    return VolumeProfile(center=x0, radii=radii, v=v, s=s, label=field.name)


# 1) Bishop-Gromov

def _model_ratios(K, N, r, R):
    """(sphere ratio, ball ratio) of the (K,N) model."""
    if N == 1:
        return 1.0, r / R
    if K == 0:
        return (r / R) ** (N - 1), (r / R) ** N
    sphere = (sin_kn(K, N - 1, r) / sin_kn(K, N - 1, R)) ** (N - 1)
    return sphere, sin_power_integral(K, N, r) / sin_power_integral(K, N, R)


def bishop_gromov_check(profile, K, N, r, R, tolerance_scale=None):
    """
    s(r)/s(R) >= sin^{N-1}_{K/(N-1)}(r) / sin^{N-1}_{K/(N-1)}(R) and
    v(r)/v(R) >= int_0^r sin^{N-1} / int_0^R sin^{N-1}.
    """
    if not 0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if N < 1 or N == math.inf:
        raise ValueError(f"bishop_gromov_check needs a finite N >= 1, got {N}")
    if N == 1 and K > 0:
        raise ValueError("N = 1 is only admitted for K <= 0")
    if K > 0 and R > math.pi * math.sqrt((N - 1) / K) + 1e-12:
        raise ValueError(f"R={R} exceeds the model diameter pi*sqrt((N-1)/K)")

    sphere_model, ball_model = _model_ratios(K, N, r, R)
    rows = []
    if profile.s is not None and profile.sphere_at(R) > 0:
        lhs = profile.sphere_at(r) / profile.sphere_at(R)
        rows.append(Witness(t=r, geodesic=None, lhs=lhs, rhs=sphere_model, margin=lhs - sphere_model, tag="sphere"))
    lhs = profile.value_at(r) / profile.value_at(R)
    rows.append(Witness(t=r, geodesic=None, lhs=lhs, rhs=ball_model, margin=lhs - ball_model, tag="ball"))

    tol = tolerance("EQUALITY_TOL", tolerance_scale)
    margin = min(w.margin for w in rows)
    ball = rows[-1]
    return Verdict(
        condition="BishopGromov", K=K, N=N, margin=margin, passed=margin >= -tol,
        witnesses=sorted(rows, key=lambda w: w.margin),
        extras={"r": r, "R": R},
        curve=[(r, ball.lhs, ball.rhs, ball.margin)],
    )


def bishop_gromov_pairs(profile, K, N, pairs, tolerance_scale=None):
    verdicts = [bishop_gromov_check(profile, K, N, r, R, tolerance_scale) for r, R in pairs]
    margin = min(v.margin for v in verdicts)
    witnesses = sorted((w for v in verdicts for w in v.witnesses), key=lambda w: w.margin)[:5]
    return Verdict(
        condition="BishopGromov", K=K, N=N, margin=margin,
        passed=all(v.passed for v in verdicts), witnesses=witnesses,
        curve=[row for v in verdicts for row in v.curve],
        extras={"pairs": [list(p) for p in pairs]},
    )


# 2) Bonnet-Myers

def bonnet_myers_check(space, field, K, N, certified=None, n_points=100, n_dirs=8):
    """
    diam <= pi sqrt((N-1)/K) whenever ric^N >= K holds. Without a certificate
    the lower-bound scan decides; an unmet hypothesis is a vacuous pass.
    """
    if not K > 0:
        raise ValueError(f"bonnet_myers_check needs K > 0, got {K}")
    bound = math.pi * math.sqrt((N - 1) / K)
    scan_inf = None
    if certified is None:
        report = lower_bound_scan(space, field, N, n_points=n_points, n_dirs=n_dirs)
        scan_inf = report.inf_estimate
        certified = report.certifies(K)
    diameter = float(space.diameter)
    slack = bound + setting("DIAMETER_TOL") - diameter
    witness = Witness(t=None, geodesic=None, lhs=diameter, rhs=bound, margin=slack, tag="diameter")
    extras = {"diameter": diameter, "bound": bound, "certified": bool(certified), "scan_inf": scan_inf}
    if not certified:
        logger.info(f"Bonnet-Myers hypothesis ric^{N} >= {K} unmet on {space!r}")
        return Verdict(
            condition="BonnetMyers", K=K, N=N, margin=math.inf, passed=True,
            witnesses=[witness], note="hypothesis unmet", extras=extras,
        )
    return Verdict(
        condition="BonnetMyers", K=K, N=N, margin=slack, passed=slack >= 0,
        witnesses=[witness], extras=extras,
    )


# 3) packing quantities

@dataclass
class PackingEstimate:
    """M is a greedy lower estimate of the supremum, m a grid minimum."""

    M: float
    m: float
    best_eps: float
    per_eps: dict = field(default_factory=dict)
    centers: list = field(default_factory=list)

    @property
    def ratio(self):
        return self.M / self.m if self.m > 0 else math.inf


def _greedy_packing(space, points, volumes, eps):
    order = np.argsort(-volumes, kind="stable")
    chosen = []
    for i in order:
        if all(geometry.distance(space, points[i], points[j]) >= 2 * eps for j in chosen):
            chosen.append(int(i))
    return chosen, float(sum(volumes[i] for i in chosen))


def packing_ratios(space, field, eps_list, n_candidates=32, quadrature_n=None):
    """
    M_{X,Z} over families of disjoint eps-balls centred on a candidate grid,
    and m_{X,Z} = min over the grid of v^{Z,x}(cover radius). The cover radius
    itself is always one of the eps values, so M >= m.
    """
    if space.kind not in (Kind.INTERVAL, Kind.CIRCLE, Kind.SPHERE2):
        raise ValueError(f"packing needs balls that are exact in polar coordinates, got {space.kind.value}")
    cover = polar_radius(space)
    eps_values = sorted({float(e) for e in eps_list if 0 < e < cover} | {cover})
    points = scan_points(space, n_candidates)
    volumes = np.array([volume_profile(space, field, x, eps_values, quadrature_n).v for x in points])

    per_eps = {}
    best = (-math.inf, None, [])
    for k, eps in enumerate(eps_values):
        chosen, total = _greedy_packing(space, points, volumes[:, k], eps)
        per_eps[eps] = {"balls": len(chosen), "sum": total}
        if total > best[0]:
            best = (total, eps, chosen)
    m_est = float(volumes[:, -1].min())
    return PackingEstimate(
        M=best[0], m=m_est, best_eps=best[1], per_eps=per_eps,
        centers=[points[i] for i in best[2]],
    )


def packing_count_bound(K, N, L, eps, ratio):
    """#B_eps <= ratio / C(K,N,L,eps), C = int_0^eps sin^{N-1} / int_0^L sin^{N-1}."""
    c = sin_power_integral(K, N, eps) / sin_power_integral(K, N, L)
    return ratio / c


def flow_bounds(field_sup, D, total_mass):
    """e^{-|Z|D} m(X) <= m_{X,Z} <= M_{X,Z} <= e^{|Z|D} m(X)."""
    spread = math.exp(field_sup * D)
    return total_mass / spread, total_mass * spread


def packing_check(space, field, eps_list, field_sup, total_mass, n_candidates=32, quadrature_n=None,
                  tolerance_scale=None):
    """The packing estimate against the flow envelope, with M >= m."""
    estimate = packing_ratios(space, field, eps_list, n_candidates, quadrature_n)
    lower, upper = flow_bounds(field_sup, space.diameter, total_mass)
    rows = [
        Witness(t=None, geodesic=None, lhs=estimate.m, rhs=lower, margin=estimate.m - lower, tag="m>=lower"),
        Witness(t=None, geodesic=None, lhs=upper, rhs=estimate.M, margin=upper - estimate.M, tag="M<=upper"),
        Witness(t=None, geodesic=None, lhs=estimate.M, rhs=estimate.m, margin=estimate.M - estimate.m, tag="M>=m"),
    ]
    tol = tolerance("EQUALITY_TOL", tolerance_scale) * (1.0 + total_mass)
    margin = min(w.margin for w in rows)
    return Verdict(
        condition="Packing", K=None, N=None, margin=margin, passed=margin >= -tol,
        witnesses=sorted(rows, key=lambda w: w.margin),
        extras={"M": estimate.M, "m": estimate.m, "ratio": estimate.ratio, "best_eps": estimate.best_eps},
        curve=[(eps, row["sum"], upper, upper - row["sum"]) for eps, row in estimate.per_eps.items()],
    )
