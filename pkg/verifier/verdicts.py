# verifier/verdicts.py
"""
Verdicts shared by every check: the worst signed slack of an inequality,
the witnesses that realize it and the curve written to CSV.
"""
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conf import tolerance

COEFFICIENT_NOTE = (
    "distortion coefficients read with superscript (1-t) on the t=0 term and (t) "
    "on the t=1 term; the exponential-entropy condition is tested with >= "
    "(concavity of U_N e^{phi/N})"
)


class Condition(enum.Enum):
    CD = "CD"
    CD_STAR = "CDstar"
    CD_INF = "CDinf"
    CD_E = "CDe"
    POINTWISE = "Pointwise"
    JACOBI_ODE = "JacobiODE"


@dataclass
class Witness:
    t: Optional[float]
    geodesic: Optional[int]
    lhs: float
    rhs: float
    margin: float
    tag: str = ""

    def as_dict(self):
        return {
            "t": self.t, "geodesic": self.geodesic, "lhs": _finite(self.lhs),
            "rhs": _finite(self.rhs), "margin": _finite(self.margin), "tag": self.tag,
        }


def _finite(x):
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


@dataclass
class Verdict:
    condition: str
    K: Optional[float]
    N: Optional[float]
    margin: float
    passed: bool
    witnesses: list = field(default_factory=list)
    note: str = ""
    extras: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)

    def summary(self):
        state = "PASS" if self.passed else "FAIL"
        return f"{self.condition}(K={self.K}, N={self.N}): {state} margin={self.margin:.3e}"


@dataclass
class CdVerdict(Verdict):
    """Verdict of one of the entropy/Jacobi conditions; always carries the reading note."""

    note: str = COEFFICIENT_NOTE


def tolerance_for(mode, scale=None):
    return tolerance("BINNED_TOL" if mode == "binned" else "EXACT_TOL", scale)


def reduce_rows(rows, tol, keep=5, slack=0.0):
    """
    rows: Witness objects. A row passes when margin >= -tol (1 + |lhs|) - slack.
    Returns (min margin, passed, worst witnesses).
    """
    if not rows:
        return math.inf, True, []
    passed = True
    for w in rows:
        scale = abs(w.lhs) if math.isfinite(w.lhs) else 0.0
        if not (w.margin >= -tol * (1.0 + scale) - slack):
            passed = False
    worst = sorted(rows, key=lambda w: w.margin)[:keep]
    return worst[0].margin, passed, worst


def curve_from_rows(rows):
    """One CSV row per t: the worst witness at that t."""
    by_t = {}
    for w in rows:
        if w.t is None:
            continue
        if w.t not in by_t or w.margin < by_t[w.t].margin:
            by_t[w.t] = w
    return [(t, by_t[t].lhs, by_t[t].rhs, by_t[t].margin) for t in sorted(by_t)]


def combine(condition, verdicts, K=None, N=None, note=""):
    """Min-margin reduction of several verdicts of the same check."""
    margin = min((v.margin for v in verdicts), default=math.inf)
    witnesses = sorted((w for v in verdicts for w in v.witnesses), key=lambda w: w.margin)[:5]
    curve = [row for v in verdicts for row in v.curve]
    return Verdict(
        condition=condition, K=K, N=N, margin=margin,
        passed=all(v.passed for v in verdicts), witnesses=witnesses,
        note=note or (verdicts[0].note if verdicts else ""), curve=curve,
    )


def grid_slack(ts, values):
    """
    C dt^2 for data sampled on ts, with C the largest third difference
    quotient |D^3 g| / dt^3. Zero for fewer than four samples or non-finite data.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ts) < 4 or not np.all(np.isfinite(values)):
        return 0.0
    dt = float(np.max(np.diff(ts)))
    C = float(np.max(np.abs(np.diff(values, 3)))) / dt**3
    return C * dt**2
