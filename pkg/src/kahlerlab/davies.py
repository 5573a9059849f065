"""Exponential-weight (Davies) machinery: the time schedule r(t), its three
defining integrals, and the off-diagonal Gaussian heat-kernel check.

The schedule increases from r(0) = 1 to infinity at the horizon T with a
profile controlled by beta in (0, 1).  The three integrals A, B, C are
horizon-independent; their beta = 1/2 values are pinned by the acceptance
suite.  The Gaussian check uses the derived exponent 1/((4 + 2 B) t) rather
than a cosmetic absolute constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidParameterError, QuadratureBudgetError
from .reports import BoundReport
from .spectral import heat_kernel_eval


def r_schedule(t, horizon, beta):
    """Davies time schedule r(t) on [0, horizon).

    Polynomial ramp (2^b - 1)(2t/T)^b + 1 on the first half, blow-up
    (T/(T-t))^b on the second; continuous with r(T/2) = 2^b from both
    branches.
    """
    if not 0 < beta < 1:
        raise InvalidParameterError(f"beta must lie in (0, 1), got {beta}")
    if horizon <= 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(tt >= horizon):
        raise InvalidParameterError(f"time must lie in [0, {horizon}), got {t}")
    first = (2.0**beta - 1.0) / (horizon / 2.0) ** beta * tt**beta + 1.0
    second = (horizon / (horizon - tt)) ** beta
    out = np.where(tt < horizon / 2.0, first, second)
    return float(out) if np.isscalar(t) else out


def r_schedule_derivative(t, horizon, beta):
    """dr/dt of the schedule (piecewise smooth)."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(tt >= horizon):
        raise InvalidParameterError(f"time must lie in [0, {horizon}), got {t}")
    with np.errstate(divide="ignore"):
        first = (2.0**beta - 1.0) / (horizon / 2.0) ** beta * beta * tt ** (beta - 1.0)
    second = beta * horizon**beta / (horizon - tt) ** (beta + 1.0)
    out = np.where(tt < horizon / 2.0, first, second)
    return float(out) if np.isscalar(t) else out


@dataclass(frozen=True)
class DaviesSchedule:
    """Schedule r(t) with quadrature evaluation of its defining integrals."""

    horizon: float
    beta: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise InvalidParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.horizon <= 0:
            raise InvalidParameterError(f"horizon must be positive, got {self.horizon}")

    def value(self, t):
        return r_schedule(t, self.horizon, self.beta)

    def derivative(self, t):
        return r_schedule_derivative(t, self.horizon, self.beta)

    def _split_quad(self, f1, f2):
        # both halves substituted to u in (0, 1); v = (2t/T)^beta on the
        # first branch, w = (2(T-t)/T)^beta on the second
        i1, e1 = quad(f1, 0.0, 1.0, limit=200)
        i2, e2 = quad(f2, 0.0, 1.0, limit=200)
        return i1 + i2, e1 + e2

    def integral_rprime_over_r2(self):
        """Quadrature of the telescoping identity integral (equals 1)."""
        beta = self.beta
        c = 2.0**beta - 1.0

        def first(v):
            return c / (c * v + 1.0) ** 2

        def second(w):
            return 0.5**beta + 0.0 * w

        val, _ = self._split_quad(first, second)
        return val

    def integral_r_minus_2_sq_over_r_minus_1(self):
        """Quadrature of int (r-2)^2/(r-1) dt over the horizon (equals T B)."""
        horizon, beta = self.horizon, self.beta
        c = 4.0**beta - 2.0**beta

        def first(v):
            # t = (T/2) v^(1/beta); singular factor handled by substitution
            return (
                (horizon / 2.0)
                / beta
                * (c * v / 2.0**beta - 1.0) ** 2
                / (c * v / 2.0**beta)
                * v ** (1.0 / beta - 1.0)
            )

        def second(w):
            tau = w / 2.0**beta  # (1 - s)^beta
            return (
                (horizon / 2.0)
                / beta
                * (1.0 - 2.0 * tau) ** 2
                / (tau * (1.0 - tau))
                * w ** (1.0 / beta - 1.0)
            )

        val, _ = self._split_quad(first, second)
        return val

    def integral_r_minus_1_over_r2(self):
        """Quadrature of int (r-1)/r^2 dt over the horizon (equals T C)."""
        horizon, beta = self.horizon, self.beta
        c = 2.0**beta - 1.0

        def first(v):
            return (horizon / 2.0) / beta * c * v / (c * v + 1.0) ** 2 * v ** (1.0 / beta - 1.0)

        def second(w):
            tau = w / 2.0**beta
            return (horizon / 2.0) / beta * (1.0 - tau) * tau * w ** (1.0 / beta - 1.0)

        val, _ = self._split_quad(first, second)
        return val


@dataclass(frozen=True)
class DaviesConstants:
    """The three schedule integrals with certified quadrature errors."""

    a_value: float
    b_value: float
    c_value: float
    a_error: float
    b_error: float
    c_error: float


def davies_integrals(beta, tol=1e-8):
    """Horizon-free integrals A, B, C of the schedule at a given beta.

    Endpoint singularities s^(beta-1) and (1-s)^(beta-1) are removed by the
    substitution s = u^(1/beta) (resp. 1-s = u^(1/beta)); residual pieces
    with closed-form antiderivatives are added exactly.  Raises when the
    certified quadrature error exceeds ``tol``.
    """
    if not 0 < beta < 1:
        raise InvalidParameterError(f"beta must lie in (0, 1), got {beta}")
    if tol <= 0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol}")
    c4 = 4.0**beta - 2.0**beta
    half_pow = 0.5**beta

    # A: substituted integrands carry only log endpoint singularities
    def a_first(u):
        return c4 / (c4 * u + 1.0) ** 2 * (math.log(beta) - math.log(u) / beta)

    def a_second(u):
        return math.log(beta) - math.log(u) / beta - math.log1p(-u)

    ia1, ea1 = quad(a_first, 0.0, half_pow, limit=300)
    ia2, ea2 = quad(a_second, 0.0, half_pow, limit=300)
    a_value, a_error = ia1 + ia2, ea1 + ea2

    # B: (c s^b - 1)^2/(c s^b) = c s^b - 2 + s^(-b)/c integrates in closed
    # form on (0, 1/2); the second branch reduces to 1/x^b + 1/(1 - x^b) - 4
    # on (0, 1/2) after partial fractions, leaving one smooth quadrature
    b_closed = (
        c4 * 0.5 ** (beta + 1.0) / (beta + 1.0)
        - 1.0
        + 0.5 ** (1.0 - beta) / (c4 * (1.0 - beta))
        + 0.5 ** (1.0 - beta) / (1.0 - beta)
        - 2.0
    )

    def b_smooth(x):
        return 1.0 / (1.0 - x**beta)

    ib, eb = quad(b_smooth, 0.0, 0.5, limit=300)
    b_value, b_error = b_closed + ib, eb

    # C: first branch via substitution, second branch in closed form
    def c_first(u):
        return c4 * u / (c4 * u + 1.0) ** 2 / beta * u ** (1.0 / beta - 1.0)

    ic1, ec1 = quad(c_first, 0.0, half_pow, limit=300)
    c_closed = 0.5 ** (beta + 1.0) / (beta + 1.0) - 0.5 ** (2.0 * beta + 1.0) / (
        2.0 * beta + 1.0
    )
    c_value, c_error = ic1 + c_closed, ec1

    total_error = a_error + b_error + c_error
    if total_error > tol:
        raise QuadratureBudgetError(
            f"certified quadrature error {total_error:.2e} exceeds tolerance {tol:.1e}"
        )
    return DaviesConstants(
        a_value=a_value,
        b_value=b_value,
        c_value=c_value,
        a_error=a_error,
        b_error=b_error,
        c_error=c_error,
    )


def gaussian_offdiag_check(spec, geom, q, intersection, volume, b_beta,
                           probe_pairs, t_grid, family_param=math.nan,
                           tol=1e-8):
    """Off-diagonal Gaussian bound with the derived exponent 4 + 2B.

    For each probe pair and time the bound quantity is
    H(x,y,t) V (t/I)^{q/(q-1)} exp(+d(x,y)^2 / ((4+2B) t)) for t <= I, and
    without the polynomial factor for t > I; the fitted constant is the sup.
    """
    expo = q / (q - 1.0)
    denom = 4.0 + 2.0 * b_beta
    lhs, rhs = [], []
    for x, y in probe_pairs:
        cx = geom.center_index(x)
        dist = geom.distances[cx, y]
        for t in t_grid:
            hval = heat_kernel_eval(spec, x, y, t, tol=tol).value
            gauss = math.exp(-dist**2 / (denom * t))
            poly = (intersection / t) ** expo if t <= intersection else 1.0
            lhs.append(hval * volume)
            rhs.append(poly * gauss)
    return BoundReport.from_samples(
        "gaussian_offdiag", lhs, rhs, kind="upper", family_param=family_param
    )
