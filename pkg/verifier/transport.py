# verifier/transport.py
"""
Optimal transport at desk scale.

1-D measures (Interval, Circle) are coupled through their quantile functions;
both are piecewise linear in u, so costs, transported densities and the
Lagrangian entropies along the interpolation are exact. Small discrete
instances on any model go through POT's network simplex.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import ot
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.optimize import minimize_scalar

from . import geometry
from .conf import setting
from .entropy import DiscreteMeasure, cell_measure
from .exceptions import NonMapPlan, SizeExceeded
from .fields import line_integrals
from .geometry import Kind

logger = logging.getLogger(__name__)


# 1) quantile functions

@dataclass
class QuantileFunction:
    """
    Q on [0, 1] as segments [u[j], u[j+1]] on which Q runs linearly from
    left[j] to right[j]. Atoms give flat segments, cells give linear ones.
    """

    u: np.ndarray
    left: np.ndarray
    right: np.ndarray
    source: np.ndarray

    @property
    def slopes(self):
        du = np.diff(self.u)
        return np.where(du > 0, (self.right - self.left) / np.where(du > 0, du, 1.0), 0.0)

    def segment_of(self, u):
        idx = np.searchsorted(self.u, u, side="right") - 1
        return np.clip(idx, 0, len(self.left) - 1)

    def at(self, u, j):
        return self.left[j] + self.slopes[j] * (u - self.u[j])

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.at(u, self.segment_of(u))

    def lifted(self, length, copies=(-1, 0, 1, 2)):
        """Periodic extension G(u + k) = G(u) + k L used for circle couplings."""
        u = np.concatenate([self.u[:-1] + k for k in copies] + [[self.u[-1] + copies[-1]]])
        left = np.concatenate([self.left + k * length for k in copies])
        right = np.concatenate([self.right + k * length for k in copies])
        source = np.tile(self.source, len(copies))
        return QuantileFunction(u=u, left=left, right=right, source=source)


def quantile_function(mu):
    if mu.support.shape[1] != 1:
        raise ValueError("quantile functions need a 1-D measure")
    weights = mu.weights / mu.total
    if mu.is_cells:
        keep = np.flatnonzero(weights > 0)
        left, right = mu.edges[:-1][keep], mu.edges[1:][keep]
    else:
        order = np.argsort(mu.support[:, 0], kind="stable")
        keep = order[weights[order] > 0]
        left = right = mu.support[keep, 0]
    u = np.concatenate([[0.0], np.cumsum(weights[keep])])
    u[-1] = 1.0
    return QuantileFunction(u=u, left=np.array(left, dtype=float), right=np.array(right, dtype=float), source=keep)


def _merge_breaks(*arrays):
    u = np.unique(np.clip(np.concatenate(arrays), 0.0, 1.0))
    keep = np.concatenate([[True], np.diff(u) > 1e-15])
    u = u[keep]
    u[0], u[-1] = 0.0, 1.0
    return u


def _segments(qa, qb, shift=0.0):
    """Merged segments of the coupling u -> (Q_a(u), Q_b(u + shift))."""
    u = _merge_breaks(qa.u, qb.u - shift, [0.0, 1.0])
    a, b = u[:-1], u[1:]
    mid = 0.5 * (a + b)
    ja, jb = qa.segment_of(mid), qb.segment_of(mid + shift)
    return {
        "u0": a, "u1": b,
        "x0": qa.at(a, ja), "x1": qa.at(b, ja),
        "y0": qb.at(a + shift, jb), "y1": qb.at(b + shift, jb),
        "src": qa.source[ja], "tgt": qb.source[jb],
    }


def _segment_cost(seg):
    d0, d1 = seg["y0"] - seg["x0"], seg["y1"] - seg["x1"]
    # exact integral of a linear displacement squared
    return float(np.sum((seg["u1"] - seg["u0"]) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0))


# 2) plans

@dataclass
class TransportPlan:
    """A coupling as (source index, target index, mass) triples."""

    pairs: list
    cost: float
    source: DiscreteMeasure
    target: DiscreteMeasure
    space: geometry.ModelSpace
    segments: Optional[dict] = None
    offset: float = 0.0

    @property
    def w2(self):
        return math.sqrt(max(self.cost, 0.0))

    def marginals(self):
        a = np.zeros(len(self.source.weights))
        b = np.zeros(len(self.target.weights))
        for i, j, m in self.pairs:
            a[i] += m
            b[j] += m
        return a, b

    def is_map(self):
        sources = [i for i, _, m in self.pairs if m > 0]
        return len(sources) == len(set(sources))


def _pairs_from_segments(seg, n_target):
    pairs = {}
    for i, j, m in zip(seg["src"], seg["tgt"] % n_target, seg["u1"] - seg["u0"]):
        pairs[(int(i), int(j))] = pairs.get((int(i), int(j)), 0.0) + float(m)
    return [(i, j, m) for (i, j), m in sorted(pairs.items())]


def ot_exact(mu, nu, space):
    """Exact W2 coupling of two atomic measures by network simplex."""
    cap = setting("OT_MAX_SUPPORT")
    if len(mu.weights) > cap or len(nu.weights) > cap:
        raise SizeExceeded(f"exact transport is capped at {cap} support points")
    a = mu.weights / mu.total
    b = nu.weights / nu.total
    M = geometry.pairwise_distance(space, mu.support, nu.support) ** 2
    G = ot.emd(a, b, M, numItermax=1_000_000)
    pairs = [(int(i), int(j), float(G[i, j])) for i, j in np.argwhere(G > 1e-15)]
    plan = TransportPlan(pairs=pairs, cost=float(np.sum(G * M)), source=mu, target=nu, space=space)
    pa, pb = plan.marginals()
    gap = max(np.max(np.abs(pa - a)), np.max(np.abs(pb - b)))
    if gap > setting("MARGINAL_TOL"):
        logger.warning(f"network simplex marginals off by {gap:.2e}")
    return plan


def _circle_cost(qa, lifted, shift):
    return _segment_cost(_segments(qa, lifted, shift))


def _best_offset(qa, qb, length):
    lifted = qb.lifted(length)
    offsets = np.linspace(-1.0, 1.0, setting("CIRCLE_OFFSETS"), endpoint=False)
    costs = np.array([_circle_cost(qa, lifted, s) for s in offsets])
    k = int(np.argmin(costs))
    best, best_cost = offsets[k], costs[k]
    step = offsets[1] - offsets[0]

    try:
        res = minimize_scalar(
            lambda s: _circle_cost(qa, lifted, s),
            bracket=(best - step, best, best + step), method="golden",
        )
        if res.fun < best_cost:
            best, best_cost = float(res.x), float(res.fun)
    except (ValueError, RuntimeError):
        logger.debug("golden refinement found no bracket; keeping the scanned offset")

    # the cost has kinks where breakpoints of the two quantiles line up
    kinks = (lifted.u[:, None] - qa.u[None, :]).ravel()
    kinks = kinks[np.abs(kinks - best) <= 2 * step]
    for s in kinks:
        c = _circle_cost(qa, lifted, s)
        if c < best_cost:
            best, best_cost = float(s), c
    return best, lifted


def ot_1d(mu, nu, space):
    """Monotone (quantile) coupling; on Circle, the best shifted lift of it."""
    if space.dim != 1:
        raise ValueError("ot_1d needs a 1-D model")
    qa, qb = quantile_function(mu), quantile_function(nu)
    if space.kind is Kind.CIRCLE:
        shift, lifted = _best_offset(qa, qb, space.params["length"])
        seg = _segments(qa, lifted, shift)
    else:
        shift = 0.0
        seg = _segments(qa, qb)
    cost = _segment_cost(seg)
    pairs = _pairs_from_segments(seg, len(nu.weights))
    return TransportPlan(
        pairs=pairs, cost=cost, source=mu, target=nu, space=space, segments=seg, offset=shift,
    )


def w2_1d(mu, nu, space):
    return ot_1d(mu, nu, space).w2


def pushforward_density_1d(plan, t):
    """
    (e_t)#pi of a 1-D plan, exactly: each merged segment becomes a cell of
    uniform density. Edges are in the universal cover on Circle.
    """
    seg = plan.segments
    x0 = (1 - t) * seg["x0"] + t * seg["y0"]
    x1 = (1 - t) * seg["x1"] + t * seg["y1"]
    edges, weights = [x0[0]], []
    for p, q, m in zip(x0, x1, seg["u1"] - seg["u0"]):
        if p > edges[-1] + 1e-15:
            # gap between the images of two pieces (a jump of the quantile)
            edges.append(p)
            weights.append(0.0)
        edges.append(max(q, edges[-1]))
        weights.append(m)
    return cell_measure(edges, weights, label=f"t={t:g}")


# 3) Birkhoff-style splitting into map-like sub-plans

def birkhoff_decompose(plan, cap=None):
    """
    Split a plan whose source atoms branch into sub-plans that are maps.
    Each round hands every source its heaviest remaining target.
    """
    cap = cap or setting("BIRKHOFF_CAP")
    remaining = {}
    for i, j, m in plan.pairs:
        if m > 0:
            remaining.setdefault(i, []).append((m, j))
    for targets in remaining.values():
        targets.sort(reverse=True)
    rounds = max((len(v) for v in remaining.values()), default=0)
    if rounds > cap:
        raise NonMapPlan(f"plan needs {rounds} map-like sub-plans (cap {cap})")
    subplans = []
    for r in range(rounds):
        subplans.append([(i, targets[r][1], targets[r][0]) for i, targets in sorted(remaining.items()) if r < len(targets)])
    return subplans


# 4) dynamical plans and density paths

@dataclass
class DensityPath:
    """
    Slices of (e_t)#Pi on a spatial grid plus, for every plan geodesic, the
    density rho_t(gamma_t) against the reference measure.
    """

    t_grid: np.ndarray
    slices: list
    along: np.ndarray
    mode: str
    ac: np.ndarray
    reference: Optional[DiscreteMeasure] = None


@dataclass
class DynamicalPlan:
    geodesics: list
    masses: np.ndarray
    t_grid: np.ndarray
    space: geometry.ModelSpace
    pairs: list = field(default_factory=list)
    path: Optional[DensityPath] = None
    _phi_cache: dict = field(default_factory=dict, repr=False)

    @property
    def thetas(self):
        return np.array([g.speed for g in self.geodesics])

    @property
    def w2_squared(self):
        return float(np.sum(self.masses * self.thetas ** 2))

    def line_integrals(self, field_spec):
        """phi_t(gamma) for every geodesic (rows) and every t on the grid (columns)."""
        key = id(field_spec)
        if key not in self._phi_cache:
            if field_spec.is_zero:
                values = np.zeros((len(self.geodesics), len(self.t_grid)))
            else:
                values = np.array([line_integrals(g, field_spec, self.t_grid) for g in self.geodesics])
            self._phi_cache[key] = values
        return self._phi_cache[key]

    def phi_of_plan(self, field_spec):
        """phi_t(Pi) = sum of mass * phi_t(gamma) on the t-grid."""
        return self.masses @ self.line_integrals(field_spec)


def _reference_density(space, ref):
    if ref is not None and ref.is_cells:
        return lambda x: ref.lebesgue_density_at(x)
    if space.weight is None:
        return lambda x: np.ones_like(x, dtype=float)
    return lambda x: np.array([space.weight_at([p]) for p in x])


def default_grid(space, cells=256):
    """Cell edges over the chart of a 1-D model."""
    return np.linspace(space.low[0], space.high[0], cells + 1)


def _bin_segments(seg, t, edges, periodic, length):
    """Exact overlap of the transported segments with the grid cells."""
    p = (1 - t) * seg["x0"] + t * seg["y0"]
    q = (1 - t) * seg["x1"] + t * seg["y1"]
    mass = seg["u1"] - seg["u0"]
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    if periodic:
        wraps = np.floor((lo - edges[0]) / length) * length
        lo, hi = lo - wraps, hi - wraps
    out = np.zeros(len(edges) - 1)
    width = hi - lo
    flat = width <= 1e-14
    if np.any(flat):
        idx = np.clip(np.searchsorted(edges, lo[flat], side="right") - 1, 0, len(out) - 1)
        np.add.at(out, idx, mass[flat])
    spread = ~flat
    shifts = (0.0, -length) if periodic else (0.0,)
    for s in shifts:
        frac = np.clip((edges[None, :] - (lo[spread, None] + s)) / width[spread, None], 0.0, 1.0)
        out += (mass[spread, None] * np.diff(frac, axis=1)).sum(axis=0)
    return out


def _exact_path(plan, space, t_grid, ref, grid):
    seg = plan.segments
    nodes, wts = leggauss(setting("QUANTILE_NODES"))
    du = seg["u1"] - seg["u0"]
    frac = 0.5 * (nodes + 1.0)
    u = seg["u0"][:, None] + du[:, None] * frac[None, :]
    masses = (0.5 * du[:, None] * wts[None, :]).ravel()
    xs = (seg["x0"][:, None] + (seg["x1"] - seg["x0"])[:, None] * frac[None, :]).ravel()
    ys = (seg["y0"][:, None] + (seg["y1"] - seg["y0"])[:, None] * frac[None, :]).ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = np.where(du > 0, (seg["x1"] - seg["x0"]) / np.where(du > 0, du, 1.0), 0.0)
        sy = np.where(du > 0, (seg["y1"] - seg["y0"]) / np.where(du > 0, du, 1.0), 0.0)
    sx, sy = np.repeat(sx, len(nodes)), np.repeat(sy, len(nodes))
    pairs = list(zip(np.repeat(seg["src"], len(nodes)), np.repeat(seg["tgt"] % len(plan.target.weights), len(nodes))))

    geodesics = [geometry.geodesic_shoot(space, [x], [y - x]) for x, y in zip(xs, ys)]
    ref_density = _reference_density(space, ref)
    periodic = space.periodic[0]
    length = float(space.periods[0]) if periodic else 0.0
    if grid is None:
        grid = ref.edges if (ref is not None and ref.is_cells) else default_grid(space)
    ref_cells = ref if (ref is not None and ref.is_cells) else None

    along, slices, ac = [], [], []
    for t in t_grid:
        jac = (1 - t) * sx + t * sy
        with np.errstate(divide="ignore"):
            leb = np.where(jac > 0, 1.0 / np.where(jac > 0, jac, 1.0), np.inf)
        pts = xs + t * (ys - xs)
        if periodic:
            pts = space.low[0] + np.mod(pts - space.low[0], length)
        refd = ref_density(pts)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(refd > 0, leb / np.where(refd > 0, refd, 1.0), np.inf)
        along.append(rel)
        ac.append(bool(np.all(np.isfinite(rel[masses > 0]))))
        cells = _bin_segments(seg, t, grid, periodic, length)
        measure = cell_measure(grid, cells, label=f"t={t:g}")
        if ref_cells is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                measure.reference_density = np.where(ref_cells.weights > 0, cells / ref_cells.weights, np.inf)
        slices.append(measure)

    path = DensityPath(
        t_grid=t_grid, slices=slices, along=np.array(along), mode="exact",
        ac=np.array(ac), reference=ref_cells,
    )
    dyn = DynamicalPlan(geodesics=geodesics, masses=masses, t_grid=t_grid, space=space, pairs=pairs, path=path)
    return dyn, path


def grid_reference(space, bins=32):
    """Reference measure of a binning grid: cell volumes times the weight."""
    if space.dim == 1:
        edges = default_grid(space, bins)
        centers = 0.5 * (edges[:-1] + edges[1:])
        masses = np.diff(edges) * np.array([space.weight_at([c]) for c in centers])
        return cell_measure(edges, masses, label="grid")
    th = np.linspace(space.low[0], space.high[0], bins + 1)
    ph = np.linspace(space.low[1], space.high[1], bins + 1)
    centers, masses = [], []
    for a, b in zip(th[:-1], th[1:]):
        for c, d in zip(ph[:-1], ph[1:]):
            center = np.array([0.5 * (a + b), 0.5 * (c + d)])
            if space.kind is Kind.SPHERE2:
                area = space.params["radius"] ** 2 * (math.cos(a) - math.cos(b)) * (d - c)
            else:
                area = math.sqrt(np.linalg.det(space.metric(center))) * (b - a) * (d - c)
            centers.append(center)
            masses.append(area * space.weight_at(center))
    return DiscreteMeasure(support=np.array(centers), weights=np.array(masses), label="grid")


def _cell_index(space, ref, pts, bins):
    if space.dim == 1:
        return np.clip(np.searchsorted(ref.edges, pts[:, 0], side="right") - 1, 0, len(ref.weights) - 1)
    span = space.high - space.low
    ij = np.floor((pts - space.low) / span * bins).astype(int)
    ij = np.clip(ij, 0, bins - 1)
    return ij[:, 0] * bins + ij[:, 1]


def _binned_path(plan, space, t_grid, ref, binning, bins):
    pairs = [(i, j, m) for i, j, m in plan.pairs if m > 0]
    if not plan.is_map():
        if not binning:
            # NonMapPlan above the cap; otherwise ride the sub-plans in order
            subplans = birkhoff_decompose(plan)
            pairs = [p for sub in subplans for p in sub]
        else:
            logger.info(f"plan branches at {len(pairs) - len({i for i, _, _ in pairs})} atoms; binning")
    geodesics, masses = [], []
    for i, j, m in pairs:
        x, y = plan.source.support[i], plan.target.support[j]
        geodesics.append(geometry.geodesic_shoot(space, x, geometry.log_map(space, x, y)))
        masses.append(m)
    masses = np.array(masses)
    ref = ref if ref is not None else grid_reference(space, bins)

    along, slices, ac = [], [], []
    for t in t_grid:
        pts = np.array([g.at(t) for g in geodesics]).reshape(len(geodesics), -1)
        idx = _cell_index(space, ref, pts, bins)
        cells = np.zeros(len(ref.weights))
        np.add.at(cells, idx, masses)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel_cells = np.where(ref.weights > 0, cells / np.where(ref.weights > 0, ref.weights, 1.0), np.inf)
        measure = DiscreteMeasure(
            support=ref.support, weights=cells, edges=ref.edges,
            reference_density=rel_cells, label=f"t={t:g}",
        )
        slices.append(measure)
        along.append(rel_cells[idx])
        ac.append(bool(np.all(np.isfinite(rel_cells[idx]))))

    path = DensityPath(
        t_grid=t_grid, slices=slices, along=np.array(along), mode="binned",
        ac=np.array(ac), reference=ref,
    )
    dyn = DynamicalPlan(
        geodesics=geodesics, masses=masses, t_grid=t_grid, space=space,
        pairs=[(i, j) for i, j, _ in pairs], path=path,
    )
    return dyn, path


def displacement_path(plan, space, n_t, ref=None, binning=True, grid=None, bins=32):
    """
    Ride every atom of the plan along its geodesic and rebuild (e_t)#Pi.

    1-D quantile plans use the exact monotone-map Jacobian; other plans bin
    the pushforward onto a grid (`bins` cells per axis).
    """
    if n_t < 2:
        raise ValueError("n_t must be >= 2")
    t_grid = np.linspace(0.0, 1.0, n_t)
    if plan.segments is not None:
        return _exact_path(plan, space, t_grid, ref, grid)
    return _binned_path(plan, space, t_grid, ref, binning, bins)


# 5) Hopf-Lax semigroup and Kantorovich potentials

@dataclass
class GridFunction:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.points = np.asarray(self.points, dtype=float).reshape(len(self.values), -1)

    def __call__(self, x):
        """Linear interpolation (1-D grids only)."""
        return np.interp(x, self.points[:, 0], self.values)


def hopf_lax(phi, t, space):
    """Q_t phi(x) = min over grid points y of d(x, y)^2 / (2t) + phi(y)."""
    if t <= 0:
        raise ValueError("hopf_lax needs t > 0")
    D = geometry.pairwise_distance(space, phi.points, phi.points)
    return GridFunction(phi.points, np.min(D**2 / (2.0 * t) + phi.values[None, :], axis=1))


def _cdf(mu):
    cum = np.concatenate([[0.0], np.cumsum(mu.weights / mu.total)])
    return lambda x: np.interp(x, mu.edges, cum)


def kantorovich_potential_1d(mu, nu, step=1e-4):
    """
    A potential phi with phi' = x - T(x) for the monotone map T of mu onto
    nu, sampled on mu's support with spacing at most `step`.
    """
    if not (mu.is_cells and nu.is_cells):
        raise ValueError("kantorovich_potential_1d needs absolutely continuous (cell) measures")
    a, b = mu.edges[0], mu.edges[-1]
    n = int(math.ceil((b - a) / step)) + 1
    xs = np.linspace(a, b, n)
    T = quantile_function(nu)(np.clip(_cdf(mu)(xs), 0.0, 1.0))
    phi = cumulative_trapezoid(xs - T, xs, initial=0.0)
    return GridFunction(xs, phi)


def _gauss_nodes(measure, order=5):
    xg, wg = leggauss(order)
    left, right = measure.edges[:-1], measure.edges[1:]
    half = 0.5 * (right - left)
    xs = 0.5 * (left + right)[:, None] + half[:, None] * xg[None, :]
    dens = (measure.weights / measure.total) / np.where(right > left, right - left, 1.0)
    ws = (dens * half)[:, None] * wg[None, :]
    keep = (right > left)[:, None] & np.ones_like(xs, dtype=bool)
    return xs[keep], ws[keep]


def c_transform(phi, ys, chunk=64):
    """Q_1(-phi)(y) = min_x |x - y|^2/2 - phi(x) with a parabolic refinement."""
    xs, vals = phi.points[:, 0], phi.values
    out = np.empty(len(ys))
    for start in range(0, len(ys), chunk):
        y = ys[start:start + chunk]
        g = 0.5 * (xs[None, :] - y[:, None]) ** 2 - vals[None, :]
        k = np.clip(np.argmin(g, axis=1), 1, len(xs) - 2)
        rows = np.arange(len(y))
        gm, g0, gp = g[rows, k - 1], g[rows, k], g[rows, k + 1]
        curv = gm - 2 * g0 + gp
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = np.where(curv > 0, 0.5 * (gm - gp) / np.where(curv > 0, curv, 1.0), 0.0)
        delta = np.clip(delta, -1.0, 1.0)
        refined = g0 - 0.25 * (gm - gp) * delta
        out[start:start + chunk] = np.minimum(np.min(g, axis=1), refined)
    return out


def duality_value(phi, mu, nu):
    """2 (int phi dmu + int Q_1(-phi) dnu), which equals W2^2 at an optimal phi."""
    xm, wm = _gauss_nodes(mu)
    yn, wn = _gauss_nodes(nu)
    first = float(np.sum(wm * phi(xm)))
    second = float(np.sum(wn * c_transform(phi, yn)))
    return 2.0 * (first + second)


def potential_form_line_integral(phi, mu, field_spec, t, n_s=65):
    """
    phi_t(Pi) through the potential: int_0^t int <Z(x - s phi'(x)), -phi'(x)> dmu ds.
    Cross-checks the line-integral form on 1-D instances.
    """
    xm, wm = _gauss_nodes(mu)
    grad = np.gradient(phi.values, phi.points[:, 0])
    velocity = -np.interp(xm, phi.points[:, 0], grad)
    ss = np.linspace(0.0, t, n_s)
    inner = []
    for s in ss:
        pos = xm + s * velocity
        z = np.array([field_spec.at([p])[0] for p in pos])
        inner.append(float(np.sum(wm * z * velocity)))
    return float(simpson(inner, x=ss))
