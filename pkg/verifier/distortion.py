# verifier/distortion.py
"""
Comparison functions sin_{K/N} and the distortion coefficients sigma and tau.

The blow-up branch returns the tagged INFINITY value, never a float inf, so a
coefficient that is infinite cannot silently enter a weighted sum.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .conf import setting


@dataclass(frozen=True)
class CurvatureDimension:
    K: float
    N: float

    def __post_init__(self):
        if not math.isfinite(self.K):
            raise ValueError(f"K must be finite, got {self.K}")
        if not (self.N >= 1 or self.N == math.inf):
            raise ValueError(f"N must be >= 1 or +inf, got {self.N}")

    @property
    def infinite_dimension(self):
        return self.N == math.inf


@dataclass(frozen=True)
class ExtendedReal:
    """A nonnegative real or the tagged +inf of the sigma/tau blow-up branch."""

    value: float = 0.0
    infinite: bool = False

    @property
    def finite(self):
        return not self.infinite

    def __add__(self, other):
        other = _lift(other)
        if self.infinite or other.infinite:
            return INFINITY
        return ExtendedReal(self.value + other.value)

    __radd__ = __add__

    def __mul__(self, weight):
        weight = float(weight)
        if self.infinite:
            return INFINITY
        return ExtendedReal(self.value * weight)

    __rmul__ = __mul__

    def __float__(self):
        if self.infinite:
            raise ValueError("cannot convert the +inf distortion sentinel to float")
        return self.value

    def report_value(self):
        """Float for reports and CSV files only."""
        return math.inf if self.infinite else self.value

    def __repr__(self):
        return "ExtendedReal(+inf)" if self.infinite else f"ExtendedReal({self.value!r})"


INFINITY = ExtendedReal(0.0, True)


def _lift(x):
    return x if isinstance(x, ExtendedReal) else ExtendedReal(float(x))


def sin_kn(K, N, x):
    """
    Solution of u'' + (K/N) u = 0 with u(0)=0, u'(0)=1, evaluated at x.

    Accepts scalars or arrays. Below |K/N| x^2 < SERIES_CUTOFF the Taylor
    series is used so the K -> 0 limit has no cancellation.
    """
    if not N > 0 or N == math.inf:
        raise ValueError(f"sin_kn needs a finite N > 0, got {N}")
    kappa = K / N
    xs = np.asarray(x, dtype=float)

    if kappa > 0:
        root = math.sqrt(kappa)
        closed = np.sin(root * xs) / root
    elif kappa < 0:
        root = math.sqrt(-kappa)
        closed = np.sinh(root * xs) / root
    else:
        closed = xs

    series = xs - kappa * xs**3 / 6.0 + kappa**2 * xs**5 / 120.0
    out = np.where(abs(kappa) * xs**2 < setting("SERIES_CUTOFF"), series, closed)
    if out.ndim == 0:
        return float(out)
    return out


def blowup_threshold(K, N):
    """pi*sqrt(N/K) for K > 0, +inf float otherwise (a bound, not a coefficient)."""
    if K <= 0:
        return math.inf
    return math.pi * math.sqrt(N / K)


def _sigma(t, theta, K, N):
    # no CurvatureDimension validation: tau and the split checks need N-1 < 1
    if theta == 0 or t == 0 or t == 1:
        return ExtendedReal(float(t))
    if K > 0 and theta >= blowup_threshold(K, N):
        return INFINITY
    if K == 0:
        return ExtendedReal(float(t))
    return ExtendedReal(sin_kn(K, N, t * theta) / sin_kn(K, N, theta))


def sigma(t, theta, cd):
    """sigma^{(t)}_{K,N}(theta) = sin_{K/N}(t theta) / sin_{K/N}(theta)."""
    if cd.infinite_dimension:
        raise ValueError("sigma needs a finite N")
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    return _sigma(t, theta, cd.K, cd.N)


def tau(t, theta, cd):
    """tau^{(t)}_{K,N}(theta) = t^{1/N} [sigma^{(t)}_{K,N-1}(theta)]^{1-1/N}."""
    if cd.infinite_dimension:
        raise ValueError("tau needs a finite N")
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    K, N = cd.K, cd.N
    if theta == 0 or t == 0 or t == 1:
        return ExtendedReal(float(t))
    if N == 1:
        if K > 0:
            return INFINITY
        return ExtendedReal(float(t))
    inner = _sigma(t, theta, K, N - 1)
    if inner.infinite:
        return INFINITY
    return ExtendedReal(t ** (1.0 / N) * inner.value ** (1.0 - 1.0 / N))


def coefficient(kind, t, theta, cd):
    """Dispatch by name: "sigma" or "tau"."""
    if kind == "sigma":
        return sigma(t, theta, cd)
    if kind == "tau":
        return tau(t, theta, cd)
    raise ValueError(f"unknown distortion coefficient: {kind}")


def sin_power_integral(K, N, r):
    """int_0^r sin_{K/(N-1)}(s)^{N-1} ds, the model volume profile for N > 1."""
    if N == 1:
        return float(r)
    if K == 0:
        return r**N / N
    value, _ = quad(lambda s: sin_kn(K, N - 1, s) ** (N - 1), 0.0, r, limit=200)
    return value
