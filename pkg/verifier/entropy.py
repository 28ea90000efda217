# verifier/entropy.py
"""
Boltzmann, N-Renyi and exponential entropies of grid measures, and the
line-integral-weighted Renyi entropy S^alpha_{N,t} of a dynamical plan.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import NotAbsolutelyContinuous

logger = logging.getLogger(__name__)


@dataclass
class DiscreteMeasure:
    """
    A finite measure on a model space.

    With `edges` (1-D only) atom i is spread uniformly in Lebesgue measure over
    the cell [edges[i], edges[i+1]]; without edges the weights sit on the
    support points, and two measures are compared point by point.
    """

    support: np.ndarray
    weights: np.ndarray
    edges: Optional[np.ndarray] = None
    reference_density: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        support = np.asarray(self.support, dtype=float)
        self.support = support.reshape(len(self.weights), -1)
        if self.edges is not None:
            self.edges = np.asarray(self.edges, dtype=float)
            if len(self.edges) != len(self.weights) + 1:
                raise ValueError("a cell measure needs one more edge than weights")
            if np.any(np.diff(self.edges) < 0):
                raise ValueError("cell edges must be nondecreasing")
        if np.any(self.weights < 0):
            raise ValueError("measure weights must be nonnegative")

    @property
    def total(self):
        return float(self.weights.sum())

    @property
    def is_cells(self):
        return self.edges is not None

    def is_probability(self, tol=1e-12):
        return abs(self.total - 1.0) <= tol

    def normalized(self):
        return DiscreteMeasure(
            support=self.support, weights=self.weights / self.total,
            edges=self.edges, label=self.label,
        )

    @property
    def cell_lengths(self):
        return np.diff(self.edges)

    def lebesgue_density(self):
        lengths = self.cell_lengths
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(lengths > 0, self.weights / np.where(lengths > 0, lengths, 1.0), np.inf)

    def lebesgue_density_at(self, x):
        """Piecewise-constant Lebesgue density; 0 outside the cells."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.weights)) & (x <= self.edges[-1])
        dens = self.lebesgue_density()
        out = np.zeros_like(x, dtype=float)
        out[inside] = dens[idx[inside]]
        return out

    def mean(self):
        return self.weights @ self.support / self.total


def cell_measure(edges, weights, label=""):
    edges = np.asarray(edges, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DiscreteMeasure(support=centers, weights=weights, edges=edges, label=label)


def atoms(points, weights, label=""):
    return DiscreteMeasure(support=points, weights=weights, label=label)


def from_density(edges, density, nodes=8, label="", normalize=True):
    """Cell masses of a Lebesgue density by Gauss-Legendre on each cell."""
    edges = np.asarray(edges, dtype=float)
    xg, wg = leggauss(nodes)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    xs = 0.5 * (left + right)[:, None] + half[:, None] * xg[None, :]
    values = np.vectorize(density, otypes=[float])(xs)
    masses = np.clip((values * wg[None, :]).sum(axis=1) * half, 0.0, None)
    if normalize:
        masses = masses / masses.sum()
    return cell_measure(edges, masses, label=label)


def lebesgue_reference(edges, weight=None, label="ref"):
    """Reference cells carrying vol (or weight * vol when the space is weighted)."""
    if weight is None:
        edges = np.asarray(edges, dtype=float)
        return cell_measure(edges, np.diff(edges), label=label)
    return from_density(edges, lambda x: weight(np.array([x])), label=label, normalize=False)


# 1) density against a reference

def _pieces(mu, ref):
    """Common refinement of two 1-D cell measures: (ref mass, density dmu/dref)."""
    cuts = np.union1d(mu.edges, ref.edges)
    lengths = np.diff(cuts)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    keep = lengths > 0
    lengths, mids = lengths[keep], mids[keep]
    d_mu = mu.lebesgue_density_at(mids)
    d_ref = ref.lebesgue_density_at(mids)
    return lengths * d_mu, lengths * d_ref


def _relative(mu, ref):
    """
    Arrays (mu mass, ref mass) over common pieces. Atoms of mu on a cell
    reference are not supported here: they make the entropy +inf.
    """
    if mu.is_cells and ref.is_cells:
        return _pieces(mu, ref)
    if mu.is_cells != ref.is_cells:
        raise ValueError("mu and ref must both be cell measures or both be point measures")
    if len(mu.weights) != len(ref.weights) or not np.allclose(mu.support, ref.support):
        raise ValueError("point measures must share their support with the reference")
    return mu.weights, ref.weights


def density(mu, ref):
    """rho = dmu/dref per common piece (+inf where ref vanishes and mu does not)."""
    m, r = _relative(mu, ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, m / np.where(r > 0, r, 1.0), np.where(m > 0, np.inf, 0.0))


# 2) entropy functionals

def ent(mu, ref):
    """Ent(mu) = int rho log rho dref; +inf as soon as mu has a singular part."""
    m, r = _relative(mu, ref)
    if np.any((r <= 0) & (m > 0)):
        return math.inf
    active = m > 0
    return float(np.sum(m[active] * np.log(m[active] / r[active])))


def renyi(mu, ref, N):
    """S_N(mu) = -int rho^{1-1/N} dref over the absolutely continuous part."""
    if not N >= 1 or N == math.inf:
        raise ValueError(f"renyi needs a finite N >= 1, got {N}")
    m, r = _relative(mu, ref)
    active = (m > 0) & (r > 0)
    if N == 1:
        # the 1-Renyi entropy is minus the reference mass of supp(rho)
        return -float(np.sum(r[active]))
    rho = m[active] / r[active]
    return -float(np.sum(r[active] * rho ** (1.0 - 1.0 / N)))


def u_n(mu, ref, N):
    """U_N(mu) = exp(-Ent(mu)/N); zero when the entropy is infinite."""
    value = ent(mu, ref)
    if value == math.inf:
        return 0.0
    return math.exp(-value / N)


def renyi_limit_gap(mu, ref, N):
    """|N(1 + S_N(mu)) - Ent(mu)|, which shrinks like 1/N."""
    return abs(N * (1.0 + renyi(mu, ref, N)) - ent(mu, ref))


# 3) Lagrangian forms along a dynamical plan

def _slice_index(path, t):
    hits = np.flatnonzero(np.isclose(path.t_grid, t, atol=1e-12))
    if len(hits) == 0:
        raise ValueError(f"t={t} is not on the density path's time grid")
    return int(hits[0])


def _along(plan, path, t):
    i = _slice_index(path, t)
    rho = path.along[i]
    active = plan.masses > 0
    if np.any(~np.isfinite(rho[active])) or np.any(rho[active] <= 0):
        raise NotAbsolutelyContinuous(f"(e_t)#Pi is not absolutely continuous at t={t:.6g}")
    return i, rho


def ent_along(plan, path, ref, t):
    """Ent((e_t)#Pi): Lagrangian sum in exact mode, slice entropy when binned."""
    if path.mode == "binned":
        return ent(path.slices[_slice_index(path, t)], ref)
    _, rho = _along(plan, path, t)
    return float(np.sum(plan.masses * np.log(rho)))


def renyi_along(plan, path, ref, N, t):
    if path.mode == "binned":
        return renyi(path.slices[_slice_index(path, t)], ref, N)
    _, rho = _along(plan, path, t)
    return -float(np.sum(plan.masses * rho ** (-1.0 / N)))


def weighted_renyi(plan, field_spec, N, t, path=None):
    """
    S^alpha_{N,t}(Pi) = -int rho_t(gamma_t)^{-1/N} e^{phi_t(gamma)/N} dPi.

    `path` defaults to the density path that displacement_path attached to
    the plan; rho_t is taken against that path's reference measure. Binned
    paths carry rho_t of the slice cell containing gamma_t.
    """
    path = path if path is not None else plan.path
    if path is None:
        raise ValueError("weighted_renyi needs the plan's density path")
    i, rho = _along(plan, path, t)
    phis = plan.line_integrals(field_spec)[:, i]
    return -float(np.sum(plan.masses * rho ** (-1.0 / N) * np.exp(phis / N)))
