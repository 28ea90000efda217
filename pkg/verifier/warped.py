# verifier/warped.py
"""
N-warped products B x_f^N F with the lifted field Z_flat = f^{-2} Z, the
product Ricci formula, and the sphere example B = [0, pi], F = S^2.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import geometry
from .comparison import bonnet_myers_check
from .conf import setting, tolerance
from .exceptions import ConditionViolated, DegenerateWarp
from .fields import (
    MINUS_INFINITY, FieldSpec, _bakry_emery_form, direction_fan, kappa_scan,
    lower_bound_scan, rotation_field, scan_points, sup_norm, symmetric_derivative, zero_field,
)
from .geometry import Kind, ModelSpace
from .verdicts import Verdict, Witness

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WarpedSpec:
    """
    Base, fiber, warping function and its derivatives in base chart
    coordinates. `hess_f` is the coordinate Hessian; the covariant one is
    formed with the base Christoffel symbols.
    """

    base: ModelSpace
    fiber: ModelSpace
    f: Callable
    grad_f: Callable
    hess_f: Callable
    N: float
    fiber_field: FieldSpec
    name: str = "warped"

    @property
    def d(self):
        return self.base.dim

    @property
    def n_fiber(self):
        return self.fiber.dim

    def split(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return x[: self.d], x[self.d:]


def sine_warp(scale=1.0):
    """f(r) = scale * sin(r) on a 1-D base."""
    return (
        lambda x: scale * math.sin(x[0]),
        lambda x: np.array([scale * math.cos(x[0])]),
        lambda x: np.array([[-scale * math.sin(x[0])]]),
    )


def constant_warp(c=1.0):
    return (
        lambda x: float(c),
        lambda x: np.zeros(len(np.atleast_1d(x))),
        lambda x: np.zeros((len(np.atleast_1d(x)),) * 2),
    )


# 1) derivatives of the warp

def warp_hessian(spec, xb):
    """Covariant Hessian nabla^2 f = d_i d_j f - Gamma^k_ij d_k f."""
    gamma = geometry.christoffel(spec.base, xb)
    return np.atleast_2d(spec.hess_f(xb)) - np.einsum("kij,k->ij", gamma, spec.grad_f(xb))


def warp_laplacian(spec, xb):
    ginv = np.linalg.inv(spec.base.metric(xb))
    return float(np.sum(ginv * warp_hessian(spec, xb)))


def warp_gradient_sq(spec, xb):
    df = np.atleast_1d(spec.grad_f(xb))
    return float(df @ np.linalg.inv(spec.base.metric(xb)) @ df)


def _zero_ends(spec):
    """Which base chart ends (1-D base) carry zeros of f."""
    if spec.d != 1:
        return False, False
    a, b = spec.base.low[0], spec.base.high[0]
    tol = 1e-12
    return abs(spec.f(np.array([a]))) <= tol, abs(spec.f(np.array([b]))) <= tol


def _interior_grid(spec, count=64):
    margin = setting("WARP_BOUNDARY_MARGIN")
    if spec.d == 1:
        a, b = spec.base.low[0], spec.base.high[0]
        return [np.array([x]) for x in np.linspace(a + margin, b - margin, count)]
    return scan_points(spec.base, count)


# 2) construction

def build_warped(spec):
    """
    Product-chart ModelSpace with metric diag(g_B, f^2 g_F), weight
    f^{N - n_F} * fiber weight against Riemannian volume, and the lifted
    field Z_flat = f^{-2} Z acting along the fiber.
    """
    for xb in _interior_grid(spec):
        value = spec.f(xb)
        if not value > 0:
            raise DegenerateWarp(f"warping function is {value} at interior base point {xb}")

    d, nf = spec.d, spec.n_fiber
    margin = setting("WARP_BOUNDARY_MARGIN")
    low = np.concatenate([spec.base.low, spec.fiber.low]).astype(float)
    high = np.concatenate([spec.base.high, spec.fiber.high]).astype(float)
    zero_low, zero_high = _zero_ends(spec)
    # the singular set f = 0 stays outside the chart
    if zero_low:
        low[0] += margin
    if zero_high:
        high[0] -= margin

    def metric(x):
        xb, xf = spec.split(x)
        g = np.zeros((d + nf, d + nf))
        g[:d, :d] = spec.base.metric(xb)
        g[d:, d:] = spec.f(xb) ** 2 * spec.fiber.metric(xf)
        return g

    def weight(x):
        xb, xf = spec.split(x)
        return spec.f(xb) ** (spec.N - nf) * spec.fiber.weight_at(xf)

    def ricci(x, w):
        xb, xf = spec.split(x)
        xi, v = w[:d], w[d:]
        fx = spec.f(xb)
        v_sq = spec.fiber.inner(xf, v, v)
        value = geometry.ricci_at(spec.base, xb, xi) if d > 1 else 0.0
        value -= nf * float(xi @ warp_hessian(spec, xb) @ xi) / fx
        value += geometry.ricci_at(spec.fiber, xf, v)
        value -= (warp_laplacian(spec, xb) / fx + (nf - 1) * warp_gradient_sq(spec, xb) / fx**2) * fx**2 * v_sq
        return value

    if zero_low and zero_high:
        diameter = float(spec.base.high[0] - spec.base.low[0])
    else:
        f_max = max(spec.f(xb) for xb in _interior_grid(spec))
        diameter = math.hypot(spec.base.diameter, f_max * spec.fiber.diameter)

    space = ModelSpace(
        dim=d + nf, kind=Kind.WARPED_PRODUCT, low=low, high=high,
        periodic=tuple(spec.base.periodic) + tuple(spec.fiber.periodic),
        metric=metric, weight=weight, sectional=None, ricci_form=ricci,
        diameter=diameter, params={"warp": spec.name, "N": spec.N},
    )
    return space, lift_field(spec)


def lift_field(spec):
    d, nf = spec.d, spec.n_fiber
    if spec.fiber_field.is_zero:
        return zero_field(d + nf)

    def lifted(x):
        xb, xf = spec.split(x)
        return np.concatenate([np.zeros(d), spec.fiber_field.at(xf) / spec.f(xb) ** 2])

    return FieldSpec(Z=lifted, name=f"lifted({spec.fiber_field.name})")


def invariant_density(spec):
    """f^N * fiber weight against vol_B x vol_F, the invariant measure of the warped generator."""

    def density(x):
        xb, xf = spec.split(x)
        return spec.f(xb) ** spec.N * spec.fiber.weight_at(xf)

    return density


# 3) the product Bakry-Emery formula

def product_bakry_emery(spec, x, xi, v):
    """
    ric^{N+d}_{C,Z_flat}(xi + v) = ric_B(xi) - N nabla^2 f(xi)/f + ric^N_{F,Z}(v)
    - [Delta f / f + (N-1) |grad f|^2 / f^2] |v|^2_C.
    """
    xb, xf = spec.split(x)
    fx = spec.f(xb)
    fiber_term = _bakry_emery_form(spec.fiber, spec.fiber_field, spec.N, xf, v)
    if fiber_term is MINUS_INFINITY:
        return -math.inf
    base_term = geometry.ricci_at(spec.base, xb, xi) if spec.d > 1 else 0.0
    base_term -= spec.N * float(xi @ warp_hessian(spec, xb) @ xi) / fx
    v_sq = fx**2 * spec.fiber.inner(xf, v, v)
    return base_term + fiber_term - (
        warp_laplacian(spec, xb) / fx + (spec.N - 1) * warp_gradient_sq(spec, xb) / fx**2
    ) * v_sq


def _check_base_conditions(spec, K, K_F, tol):
    """(i) ric_B >= (d-1)K, (ii) nabla^2 f + K f g_B <= 0, (iii) |grad f|^2 + K f^2 <= K_F."""
    worst = {"i": math.inf, "ii": math.inf, "iii": math.inf}
    for xb in _interior_grid(spec):
        fx = spec.f(xb)
        for xi in direction_fan(spec.base, xb, 8):
            ric = geometry.ricci_at(spec.base, xb, xi) if spec.d > 1 else 0.0
            slack = ric - (spec.d - 1) * K
            if slack < -tol * (1 + abs(ric)):
                raise ConditionViolated("i", xb.tolist(), slack)
            worst["i"] = min(worst["i"], slack)
            hess = float(xi @ warp_hessian(spec, xb) @ xi)
            slack = -(hess + K * fx)
            if slack < -tol * (1 + abs(hess)):
                raise ConditionViolated("ii", xb.tolist(), slack)
            worst["ii"] = min(worst["ii"], slack)
        grad_sq = warp_gradient_sq(spec, xb)
        slack = K_F - grad_sq - K * fx**2
        if slack < -tol * (1 + abs(K_F)):
            raise ConditionViolated("iii", xb.tolist(), slack)
        worst["iii"] = min(worst["iii"], slack)
    return worst


def _third_condition_reading(spec, K, K_F):
    """K_F >= K f^2 without zeros of f; K_F > 0 and |grad f| <= sqrt(K_F) otherwise."""
    zero_low, zero_high = _zero_ends(spec)
    grid = _interior_grid(spec)
    if not (zero_low or zero_high):
        return all(K_F >= K * spec.f(xb) ** 2 - 1e-12 for xb in grid)
    return K_F > 0 and all(math.sqrt(warp_gradient_sq(spec, xb)) <= math.sqrt(K_F) + 1e-9 for xb in grid)


def _random_triples(spec, space, count, rng):
    """Base point, fiber point and a C-unit tangent split as (xi, v)."""
    lo, hi = space.low, space.high
    fiber_grid = scan_points(spec.fiber, 64)
    for _ in range(count):
        xb = lo[: spec.d] + (hi[: spec.d] - lo[: spec.d]) * rng.random(spec.d)
        xf = fiber_grid[rng.integers(len(fiber_grid))]
        x = np.concatenate([xb, xf])
        w = rng.standard_normal(space.dim)
        w = w / space.norm(x, w)
        yield x, w[: spec.d], w[spec.d:]


def warped_ricci_check(spec, K, K_F=None, sample_n=500, rng=None, tolerance_scale=None,
                       fiber_points=100, fiber_dirs=8):
    """
    Certify CD(K(N+d-1), N+d) for (B x_f^N F, Z_flat) at sampled (x, xi, v):
    the product formula must dominate (N+d-1)K |xi+v|^2 whenever the fiber
    satisfies ric^N_{F,Z} >= (N-1) K_F. K_F defaults to the scanned fiber
    bound divided by N-1.
    """
    rng = rng if rng is not None else np.random.default_rng(setting("SEED"))
    report = lower_bound_scan(spec.fiber, spec.fiber_field, spec.N, n_points=fiber_points, n_dirs=fiber_dirs)
    fiber_inf = report.inf_estimate
    if K_F is None:
        if fiber_inf is None or spec.N == 1:
            raise ValueError("the fiber scan gives no finite K_F")
        K_F = fiber_inf / (spec.N - 1)

    conditions = _check_base_conditions(spec, K, K_F, setting("WARP_CONDITION_TOL"))
    extras = {
        "K_F": K_F, "fiber_inf": fiber_inf, "conditions": conditions,
        "third_condition_reading": _third_condition_reading(spec, K, K_F),
    }
    cd_K, cd_N = K * (spec.N + spec.d - 1), spec.N + spec.d

    hypothesis = fiber_inf is not None and fiber_inf >= (spec.N - 1) * K_F - 1e-12
    if not hypothesis:
        logger.info(f"fiber bound ric^{spec.N} >= {(spec.N - 1) * K_F} unmet for {spec.name}")
        return Verdict(
            condition="WarpedCD", K=cd_K, N=cd_N, margin=math.inf, passed=True,
            note="hypothesis unmet", extras=extras,
        )

    space, _ = build_warped(spec)
    rows = []
    for k, (x, xi, v) in enumerate(_random_triples(spec, space, sample_n, rng)):
        lhs = product_bakry_emery(spec, x, xi, v)
        rhs = cd_K  # |xi + v|_C = 1
        rows.append(Witness(t=None, geodesic=k, lhs=lhs, rhs=rhs, margin=lhs - rhs, tag=f"x={np.round(x, 6).tolist()}"))

    tol = tolerance("EXACT_TOL", tolerance_scale)
    margin = min(w.margin for w in rows)
    passed = all(w.margin >= -tol * (1 + abs(w.rhs)) for w in rows)
    return Verdict(
        condition="WarpedCD", K=cd_K, N=cd_N, margin=margin, passed=passed,
        witnesses=sorted(rows, key=lambda w: w.margin)[:5], extras=extras,
    )


# 4) the sphere example

@dataclass
class SphereExampleBundle:
    space: ModelSpace
    field: FieldSpec
    spec: WarpedSpec
    kappa: float
    fiber_inf: float
    K_F: float
    warped: Verdict
    bonnet_myers: Verdict
    literal_margin: Optional[float]
    verdict: Optional[Verdict] = None


def sphere_example_spec(N, alpha=0.0, kappa=None):
    """
    B = [0, pi], F = S^2 with the rotation field alpha * d/dphi and
    f = sqrt(K_F) sin, K_F the scanned fiber bound over N - 1.
    Returns (spec, kappa, fiber_inf).
    """
    if N < 2 or (N == 2 and alpha != 0):
        raise ValueError(f"the sphere example needs N > 2 (or N = 2 with alpha = 0), got N={N}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha > 0 and N - 2 < alpha:
        raise ValueError(f"need 1/(N-2) <= 1/alpha, got N={N}, alpha={alpha}")
    fiber = geometry.sphere2(1.0)
    if kappa is None:
        kappa = kappa_scan(fiber, rotation_field(1.0))
    if alpha * kappa > 0.5 + 1e-12:
        raise ValueError(f"need alpha * kappa <= 1/2, got {alpha * kappa}")

    fiber_field = rotation_field(alpha) if alpha > 0 else zero_field(2)
    report = lower_bound_scan(fiber, fiber_field, N, n_points=100, n_dirs=8)
    fiber_inf = report.inf_estimate
    f, grad_f, hess_f = sine_warp(math.sqrt(fiber_inf / (N - 1)))
    spec = WarpedSpec(
        base=geometry.interval(0.0, math.pi), fiber=fiber, f=f, grad_f=grad_f, hess_f=hess_f,
        N=N, fiber_field=fiber_field, name=f"sphere-example(N={N:g}, alpha={alpha:g})",
    )
    return spec, kappa, fiber_inf


def sphere_example(N, alpha=0.0, kappa=None, sample_n=500, rng=None, tolerance_scale=None):
    """Certifies CD(N, N+1) for the sphere example and the attained diameter pi."""
    spec, kappa, fiber_inf = sphere_example_spec(N, alpha, kappa)
    K_F = fiber_inf / (N - 1)
    fiber, fiber_field = spec.fiber, spec.fiber_field
    space, lifted = build_warped(spec)
    warped = warped_ricci_check(spec, 1.0, K_F=K_F, sample_n=sample_n, rng=rng, tolerance_scale=tolerance_scale)
    bonnet = bonnet_myers_check(space, lifted, float(N), N + 1, certified=warped.passed)

    fiber_row = Witness(t=None, geodesic=None, lhs=fiber_inf, rhs=0.5, margin=fiber_inf - 0.5, tag="fiber>=1/2")
    literal = None
    if N > 2:
        literal = fiber_inf - (N - 1) / (2 * (N - 2))

    rows = [fiber_row] + warped.witnesses[:1] + bonnet.witnesses
    passed = warped.passed and bonnet.passed and fiber_row.margin >= -tolerance("EXACT_TOL", tolerance_scale)
    verdict = Verdict(
        condition="SphereExample", K=float(N), N=N + 1,
        margin=min(fiber_row.margin, warped.margin, bonnet.margin), passed=passed,
        witnesses=sorted(rows, key=lambda w: w.margin),
        extras={
            "kappa": kappa, "alpha": alpha, "K_F": K_F, "fiber_inf": fiber_inf,
            "literal_K_F_margin": literal, "diameter": space.diameter,
            "field_sup": sup_norm(fiber, fiber_field),
        },
    )
    return SphereExampleBundle(
        space=space, field=lifted, spec=spec, kappa=kappa, fiber_inf=fiber_inf, K_F=K_F,
        warped=warped, bonnet_myers=bonnet, literal_margin=literal, verdict=verdict,
    )


# 5) manifolds with convex boundary

@dataclass
class ConvexDomainBound:
    ric_lower: float
    drift_lower: float
    drift_sup: float
    N: float
    dim: int

    @property
    def K(self):
        """CD(K + K', N + n) with K' = ric_lower and K = drift_lower."""
        return self.ric_lower + self.drift_lower

    @property
    def total_dimension(self):
        return self.N + self.dim

    def small_drift_K(self):
        """With -nabla^s Z >= 0, Ric >= K' + eps and |Z| <= sqrt(eps N) give CD(K', N + n)."""
        eps = self.drift_sup**2 / self.N
        return self.ric_lower - eps


def convex_domain_bound(space, field, N, n_points=100, n_dirs=8):
    """
    Scanned Ric >= K' and -nabla^s Z >= K + Z x Z / N on a convex domain.
    """
    ric_lower, drift_lower = math.inf, math.inf
    for x in scan_points(space, n_points):
        for v in direction_fan(space, x, n_dirs):
            ric_lower = min(ric_lower, geometry.ricci_at(space, x, v))
            z = space.inner(x, field.at(x), v)
            drift_lower = min(drift_lower, -symmetric_derivative(space, field, x, v) - z * z / N)
    return ConvexDomainBound(
        ric_lower=ric_lower, drift_lower=drift_lower,
        drift_sup=sup_norm(space, field, n_points), N=N, dim=space.dim,
    )


def convex_domain_check(space, field, N, n_points=100, n_dirs=8, tolerance_scale=None):
    """The split bound must not exceed the direct scan of ric^{N+n}."""
    bound = convex_domain_bound(space, field, N, n_points, n_dirs)
    report = lower_bound_scan(space, field, bound.total_dimension, n_points=n_points, n_dirs=n_dirs)
    direct = report.inf_estimate if report.bounded else -math.inf
    margin = direct - bound.K
    tol = tolerance("EXACT_TOL", tolerance_scale) * (1 + abs(bound.K))
    return Verdict(
        condition="ConvexDomain", K=bound.K, N=bound.total_dimension, margin=margin,
        passed=margin >= -tol,
        witnesses=[Witness(t=None, geodesic=None, lhs=direct, rhs=bound.K, margin=margin, tag="scan>=split")],
        extras={"ric_lower": bound.ric_lower, "drift_lower": bound.drift_lower,
                "small_drift_K": bound.small_drift_K()},
    )
