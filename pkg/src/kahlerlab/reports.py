"""Report records for verified inequalities and admissibility data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def format_float(x):
    """Stable float formatting used by every CSV writer (byte reproducible)."""
    return f"{float(x):.12g}"


@dataclass
class BoundReport:
    """Outcome of one inequality check.

    ``kind`` is "upper" when the check bounds lhs <= C * rhs (fitted constant
    is the sup of ratios) and "lower" for lhs >= c * rhs (fitted constant is
    the inf).  ``margin`` is bound - worst value for checks with an absolute
    bound, else 0.
    """

    name: str
    fitted_constant: float
    worst_lhs: float
    worst_rhs: float
    margin: float
    samples: int
    kind: str = "upper"
    family_param: float = math.nan

    @classmethod
    def from_samples(cls, name, lhs, rhs, kind="upper", bound=None,
                     family_param=math.nan):
        lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = lhs / rhs
        ok = np.isfinite(ratios)
        if not np.any(ok):
            return cls(name, math.nan, math.nan, math.nan, math.nan, 0,
                       kind, family_param)
        idx = np.flatnonzero(ok)
        pick = idx[np.argmax(ratios[ok])] if kind == "upper" else idx[np.argmin(ratios[ok])]
        fitted = float(ratios[pick])
        margin = 0.0
        if bound is not None:
            extreme = np.max(ratios[ok]) if kind == "upper" else np.min(ratios[ok])
            margin = float(bound - extreme) if kind == "upper" else float(extreme - bound)
        return cls(name, fitted, float(lhs[pick]), float(rhs[pick]), margin,
                   int(ok.sum()), kind, family_param)

    def csv_row(self):
        return [
            format_float(self.family_param),
            self.name,
            format_float(self.worst_lhs),
            format_float(self.worst_rhs),
            format_float(self.fitted_constant),
            format_float(self.margin),
            str(self.samples),
        ]


REPORT_CSV_HEADER = ["family_param", "check", "lhs", "rhs", "fitted_C", "margin", "samples"]


@dataclass
class AdmissibilityRecord:
    """Scalar admissibility data of one family member."""

    family_param: float
    complex_dim: int
    entropy_exponent: float
    class_cap: float
    entropy: float
    entropy_cap: float
    gamma_min: float
    volume: float
    intersection: float
    lambda1_intersection: float

    @property
    def gamma_min_positive(self):
        return self.gamma_min > 0

    def csv_row(self):
        return [
            format_float(self.family_param),
            format_float(self.volume),
            format_float(self.intersection),
            format_float(self.entropy),
            format_float(self.gamma_min),
            format_float(self.lambda1_intersection),
        ]


ADMISSIBILITY_CSV_HEADER = ["family_param", "V", "I", "entropy_p", "gamma_min", "lambda1_I"]


def uniformity_verdict(values, kind="upper", headroom=10.0):
    """Family uniformity rule for fitted constants.

    Upper bounds pass when every constant is finite and the family maximum
    stays within ``headroom`` times the family median; lower bounds pass when
    the family floor is positive (bounded away from zero is the claim, a
    positive floor is the reported witness).
    """
    vals = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        return False
    if kind == "upper":
        return bool(np.max(vals) <= headroom * float(np.median(vals)))
    return bool(np.min(vals) > 0)
