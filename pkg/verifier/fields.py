# verifier/fields.py
"""
Vector fields Z (equivalently the 1-forms alpha = <Z, .>), their line integrals
along geodesics, the symmetric derivative and the Bakry-Emery N-Ricci tensor
ric^N = Ric - nabla^s Z - Z(x)Z / (N - n).
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from . import geometry
from .conf import setting
from .geometry import Kind

logger = logging.getLogger(__name__)


class _Unbounded:
    """The -inf of ric^N when N <= n forbids the direction."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MINUS_INFINITY"


MINUS_INFINITY = _Unbounded()


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """
    Z as chart components. `dZ(x)[i, j]` is d_j Z^i; when it is missing,
    central differences with FD_STEP are used.
    """

    Z: Callable
    name: str = "field"
    dZ: Optional[Callable] = None

    def at(self, x):
        return np.atleast_1d(np.asarray(self.Z(np.atleast_1d(np.asarray(x, dtype=float))), dtype=float))

    def jacobian(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.dZ is not None:
            return np.atleast_2d(np.asarray(self.dZ(x), dtype=float))
        h = setting("FD_STEP")
        n = len(x)
        out = np.zeros((len(self.at(x)), n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out[:, j] = (self.at(x + e) - self.at(x - e)) / (2 * h)
        return out

    def scaled(self, factor, name=None):
        jac = None
        if self.dZ is not None:
            jac = lambda x: factor * self.jacobian(x)
        return FieldSpec(
            Z=lambda x: factor * self.at(x),
            name=name or f"{factor:g}*{self.name}",
            dZ=jac,
        )

    @property
    def is_zero(self):
        return self.name == "zero"


# 1) preset families

def zero_field(dim=1):
    return FieldSpec(Z=lambda x: np.zeros(dim), name="zero", dZ=lambda x: np.zeros((dim, dim)))


def constant_drift(c, dim=1):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if len(c) == 1 and dim > 1:
        c = np.concatenate([c, np.zeros(dim - 1)])
    return FieldSpec(Z=lambda x: c.copy(), name=f"constant-drift({c.tolist()})", dZ=lambda x: np.zeros((dim, dim)))


def ou_drift(rate=1.0, dim=1):
    """Z(x) = -rate * x; on flat space nabla^s Z = -rate g."""
    return FieldSpec(
        Z=lambda x: -rate * np.asarray(x, dtype=float),
        name=f"ou-drift({rate:g})",
        dZ=lambda x: -rate * np.eye(dim),
    )


def rotation_field(alpha=1.0):
    """alpha * d/dphi on Sphere2: the Killing field of rotation about the polar axis."""
    return FieldSpec(
        Z=lambda x: np.array([0.0, alpha]),
        name=f"rotation({alpha:g})",
        dZ=lambda x: np.zeros((2, 2)),
    )


def gradient_field(f, grad_f, hess_f=None, sign=1, name="gradient"):
    """Z = sign * grad f on a flat chart. sign=-1 realizes alpha = -df."""
    jac = None
    if hess_f is not None:
        jac = lambda x: sign * np.atleast_2d(hess_f(x))
    field = FieldSpec(Z=lambda x: sign * np.atleast_1d(grad_f(x)), name=name, dZ=jac)
    return field, f


def gradient_of_polynomial(coefficients, sign=1):
    """1-D Z = sign * V' for V given by increasing-order polynomial coefficients."""
    coefficients = np.asarray(coefficients, dtype=float)
    d1 = P.polyder(coefficients) if len(coefficients) > 1 else np.zeros(1)
    d2 = P.polyder(d1) if len(d1) > 1 else np.zeros(1)
    field, potential = gradient_field(
        f=lambda x: float(P.polyval(np.asarray(x)[0], coefficients)),
        grad_f=lambda x: np.array([P.polyval(np.asarray(x)[0], d1)]),
        hess_f=lambda x: np.array([[P.polyval(np.asarray(x)[0], d2)]]),
        sign=sign,
        name=f"gradient-of-v({coefficients.tolist()}, sign={sign})",
    )
    return field, potential


# 2) line integrals

def _integrand(geo, field):
    space = geo.space
    return np.array([space.inner(x, field.at(x), v) for x, v in zip(geo.points, geo.velocities)])


def line_integrals(geo, field, ts):
    """phi_t(gamma) = int_0^t <Z, gamma'> at every t in ts."""
    if len(geo.t) < 16:
        raise ValueError("line integrals need at least 16 geodesic samples")
    values = _integrand(geo, field)
    antiderivative = CubicSpline(geo.t, values).antiderivative()
    return antiderivative(np.asarray(ts, dtype=float)) - antiderivative(0.0)


def line_integral(geo, field, t=1.0):
    return float(line_integrals(geo, field, [t])[0])


# 3) covariant derivatives

def covariant_derivative(space, field, x, v):
    """(nabla_v Z)^k = v^i d_i Z^k + Gamma^k_ij v^i Z^j."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    gamma = geometry.christoffel(space, x)
    return field.jacobian(x) @ v + np.einsum("kij,i,j->k", gamma, v, field.at(x))


def symmetric_derivative(space, field, x, v):
    """nabla^s Z(v, v) = <nabla_v Z, v>."""
    return space.inner(x, covariant_derivative(space, field, x, v), v)


def _bakry_emery_form(space, field, N, x, v):
    # quadratic in v; the public wrapper enforces |v| = 1
    n = space.dim
    value = geometry.ricci_at(space, x, v) - symmetric_derivative(space, field, x, v)
    if N == math.inf:
        return value
    if N > n:
        return value - space.inner(x, field.at(x), v) ** 2 / (N - n)
    if N == n:
        if abs(space.inner(x, field.at(x), v)) <= setting("ORTHOGONALITY_TOL"):
            return value
        return MINUS_INFINITY
    return MINUS_INFINITY


def bakry_emery_at(space, field, N, x, v):
    """ric^N_{M,Z}(v) for a unit vector v, or MINUS_INFINITY."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    norm = space.norm(x, v)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"bakry_emery_at needs a unit vector, |v| = {norm}")
    return _bakry_emery_form(space, field, N, x, v)


def bakry_emery_intro_form(space, field, N, x, v):
    """The -(1/N) alpha(x)alpha version, reached by relabeling N -> N + n."""
    return bakry_emery_at(space, field, N + space.dim, x, v)


# 4) scans

@dataclass
class BakryEmeryReport:
    samples: list
    inf_estimate: Optional[float]
    worst_point: Optional[np.ndarray]
    worst_direction: Optional[np.ndarray]
    N: float

    @property
    def bounded(self):
        return self.inf_estimate is not None

    def certifies(self, K, tol=1e-9):
        return self.bounded and self.inf_estimate >= K - tol


def scan_points(space, n_points):
    """A deterministic quasi-uniform point grid on the chart interior."""
    if space.kind in (Kind.INTERVAL, Kind.CIRCLE):
        a, b = space.low[0], space.high[0]
        if space.kind is Kind.CIRCLE:
            return [np.array([a + (b - a) * k / n_points]) for k in range(n_points)]
        return [np.array([x]) for x in np.linspace(a, b, n_points)]
    if space.kind is Kind.SPHERE2:
        # odd number of latitude rows so the equator is on the grid
        rows = max(3, int(round(math.sqrt(n_points / 2))) | 1)
        cols = max(2, int(math.ceil(n_points / rows)))
        cap = 1e-3
        thetas = np.linspace(cap, math.pi - cap, rows)
        return [np.array([th, 2 * math.pi * k / cols]) for th in thetas for k in range(cols)]
    # box grids for the torus and for warped charts
    per_axis = max(2, int(math.ceil(n_points ** (1.0 / space.dim))))
    axes = []
    for i in range(space.dim):
        lo, hi = space.low[i], space.high[i]
        if space.periodic[i]:
            axes.append(lo + (hi - lo) * np.arange(per_axis) / per_axis)
        else:
            margin = 1e-3 * (hi - lo)
            axes.append(np.linspace(lo + margin, hi - margin, per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(p) for p in np.stack([m.ravel() for m in mesh], axis=-1)]


def direction_fan(space, x, n_dirs):
    """Unit tangent vectors at x; quadratic forms only need a half sphere."""
    frame = space.orthonormal_frame(x)
    if space.dim == 1:
        return [frame[:, 0]]
    if space.dim == 2:
        angles = math.pi * np.arange(n_dirs) / n_dirs
        return [frame @ np.array([math.cos(a), math.sin(a)]) for a in angles]
    units = [np.eye(space.dim)[i] for i in range(space.dim)]
    # golden-angle spiral on the upper half of the unit sphere
    golden = math.pi * (3 - math.sqrt(5))
    for k in range(max(0, n_dirs - space.dim)):
        z = 1 - (k + 0.5) / max(n_dirs - space.dim, 1)
        r = math.sqrt(max(0.0, 1 - z * z))
        u = np.zeros(space.dim)
        u[:3] = [r * math.cos(golden * k), r * math.sin(golden * k), z]
        units.append(u / np.linalg.norm(u))
    return [frame @ u for u in units]


def lower_bound_scan(space, field, N, n_points=100, n_dirs=8):
    """Infimum of ric^N over a point grid times a direction fan."""
    samples = []
    worst = (None, None, None)
    unbounded = False
    for x in scan_points(space, n_points):
        for v in direction_fan(space, x, n_dirs):
            value = bakry_emery_at(space, field, N, x, v)
            samples.append((x, v, value))
            if value is MINUS_INFINITY:
                if not unbounded:
                    worst = (x, v, value)
                unbounded = True
                continue
            if not unbounded and (worst[2] is None or value < worst[2]):
                worst = (x, v, value)
    if unbounded:
        logger.info(f"ric^{N} has no finite lower bound for {field.name} on {space!r}")
        return BakryEmeryReport(samples, None, worst[0], worst[1], N)
    return BakryEmeryReport(samples, float(worst[2]), worst[0], worst[1], N)


def kappa_scan(space, field, n_points=100, n_dirs=8):
    """Smallest kappa with -nabla^s Z(v,v) - <Z,v>^2 >= -kappa |v|^2 on the grid."""
    best = -math.inf
    for x in scan_points(space, n_points):
        for v in direction_fan(space, x, n_dirs):
            value = symmetric_derivative(space, field, x, v) + space.inner(x, field.at(x), v) ** 2
            best = max(best, value)
    return best


def sup_norm(space, field, n_points=100):
    return max(space.norm(x, field.at(x)) for x in scan_points(space, n_points))
