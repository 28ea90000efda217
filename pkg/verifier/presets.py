# verifier/presets.py
"""
Named model spaces, field families and measure shapes that scenario files
refer to. Scenario files never carry code; everything is built from these
presets and their numeric parameters.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings

from . import fields, geometry
from .entropy import atoms, from_density, lebesgue_reference
from .exceptions import ScenarioParseError
from .transport import default_grid, grid_reference
from .warped import build_warped, sphere_example_spec

logger = logging.getLogger(__name__)

MEASURE_SHAPES = ("uniform", "bump", "gaussian", "atoms")


@dataclass
class BuiltSpace:
    """A model space plus, for warped kinds, the lifted field and the warp."""

    space: geometry.ModelSpace
    field: Optional[fields.FieldSpec] = None
    warp: Optional[object] = None


def _params(defaults, given, what):
    unknown = set(given) - set(defaults)
    if unknown:
        raise ScenarioParseError(f"unknown {what} parameters: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def build_space(kind, params=None):
    """A BuiltSpace from SPACE_KINDS."""
    if kind not in settings.SPACE_KINDS:
        raise ScenarioParseError(f"unknown space kind: {kind}")
    p = _params(settings.SPACE_KINDS[kind], params or {}, kind)
    if kind == "interval":
        return BuiltSpace(geometry.interval(float(p["a"]), float(p["b"])))
    if kind == "circle":
        return BuiltSpace(geometry.circle(float(p["length"])))
    if kind == "sphere2":
        return BuiltSpace(geometry.sphere2(float(p["radius"])))
    if kind == "flat-torus2":
        return BuiltSpace(geometry.flat_torus2(float(p["lx"]), float(p["ly"])))
    try:
        spec, kappa, _ = sphere_example_spec(float(p["N"]), float(p["alpha"]))
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc
    logger.debug(f"built {spec.name} with kappa={kappa:.6g}")
    space, lifted = build_warped(spec)
    return BuiltSpace(space, lifted, spec)


def build_field(family, params, dim):
    """A FieldSpec (and the potential V for gradient-of-v) from FIELD_FAMILIES."""
    if family not in settings.FIELD_FAMILIES:
        raise ScenarioParseError(f"unknown field family: {family}")
    p = _params(settings.FIELD_FAMILIES[family], params or {}, family)
    if family == "zero":
        return fields.zero_field(dim), None
    if family == "constant-drift":
        return fields.constant_drift(p["c"], dim), None
    if family == "ou-drift":
        return fields.ou_drift(float(p["rate"]), dim), None
    if family == "rotation-alpha":
        if dim != 2:
            raise ScenarioParseError("rotation-alpha lives on sphere2")
        return fields.rotation_field(float(p["alpha"])), None
    if dim != 1:
        raise ScenarioParseError("gradient-of-v is a 1-D family")
    return fields.gradient_of_polynomial(p["coefficients"], int(p["sign"]))


# measures

def _bump_profile(space, center, width):
    def density(x):
        d = geometry.distance(space, np.atleast_1d(x), np.atleast_1d(center))
        if d >= width:
            return 0.0
        return math.cos(0.5 * math.pi * d / width) ** 2
    return density


def _gaussian_profile(space, center, sigma):
    def density(x):
        d = geometry.distance(space, np.atleast_1d(x), np.atleast_1d(center))
        return math.exp(-0.5 * (d / sigma) ** 2)
    return density


def build_measure(space, spec, cells=128, bins=16):
    """
    A probability measure of a named shape. 1-D models get cell measures on
    `cells` cells, 2-D models point measures on the binning grid.
    """
    shape = spec.get("shape")
    if shape not in MEASURE_SHAPES:
        raise ScenarioParseError(f"unknown measure shape: {shape}")
    label = spec.get("label", shape)
    if shape == "atoms":
        points = np.asarray(spec["points"], dtype=float).reshape(-1, space.dim)
        weights = np.asarray(spec.get("weights", np.ones(len(points))), dtype=float)
        return atoms(points, weights / weights.sum(), label=label)

    cells = int(spec.get("cells", cells))
    center = spec.get("center", 0.5 * (space.low + space.high))
    if shape == "uniform":
        def profile(x):
            return 1.0
    elif shape == "bump":
        profile = _bump_profile(space, center, float(spec.get("width", 1.0)))
    else:
        profile = _gaussian_profile(space, center, float(spec.get("sigma", 0.5)))

    if space.dim == 1:
        edges = np.asarray(spec["edges"], dtype=float) if "edges" in spec else default_grid(space, cells)
        return from_density(edges, profile, label=label)

    grid = grid_reference(space, int(spec.get("bins", bins)))
    weights = grid.weights * np.array([profile(c) for c in grid.support])
    if weights.sum() <= 0:
        raise ScenarioParseError(f"measure {label} has no mass on the grid")
    return atoms(grid.support, weights / weights.sum(), label=label)


def reference_for(space, measure, bins=16):
    """The reference measure a measure of build_measure is compared against."""
    if measure.is_cells:
        return lebesgue_reference(measure.edges, space.weight)
    return grid_reference(space, bins)


def grid_function(nodes, spec):
    """Test functions for the gradient estimate: sin, cos or a polynomial in x."""
    kind = spec.get("kind", "sin")
    freq = float(spec.get("frequency", 1.0))
    if kind == "sin":
        return np.sin(freq * nodes)
    if kind == "cos":
        return np.cos(freq * nodes)
    if kind == "polynomial":
        return np.polynomial.polynomial.polyval(nodes, spec.get("coefficients", [0.0, 1.0]))
    raise ScenarioParseError(f"unknown test function: {kind}")
