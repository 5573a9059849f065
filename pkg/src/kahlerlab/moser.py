"""Local inequalities on subdomains and the sup bound for subsolutions,
plus the pointwise Green's-function bound they imply."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PreconditionError, SupportError
from .reports import BoundReport

RESIDUAL_FLOOR = -1e-12


def interior_nodes(op, ball_nodes):
    """Nodes of a ball whose whole stencil neighborhood stays in the ball."""
    mask = np.zeros(op.num_nodes, dtype=bool)
    mask[ball_nodes] = True
    adj = op.neighbors()
    # a node is interior when it has no stencil neighbor outside the ball
    outside_hits = adj @ (~mask).astype(float)
    return np.flatnonzero(mask & (outside_hits == 0))


@dataclass
class SubdomainProblem:
    """Subsolution data on a geodesic ball: Lu >= f on the interior of B_R.

    The one-sided residual is verified at construction; a violation raises
    PreconditionError naming the worst node.
    """

    center_pos: int
    r_inner: float
    r_outer: float
    ball_nodes: np.ndarray
    interior: np.ndarray
    u: np.ndarray
    f: np.ndarray
    s_exponent: float
    integrability: float

    @classmethod
    def build(cls, op, geom, center_pos, r_inner, r_outer, u, f,
              s_exponent, integrability, q):
        if not 0 < r_inner < r_outer:
            raise InvalidParameterError(
                f"need 0 < r < R, got r={r_inner}, R={r_outer}"
            )
        if s_exponent <= 0:
            raise InvalidParameterError(f"need s > 0, got {s_exponent}")
        if integrability <= q / (q - 1.0):
            raise InvalidParameterError(
                f"need N > q/(q-1) = {q / (q - 1.0):.4g}, got {integrability}"
            )
        ball = geom.ball_nodes(center_pos, r_outer)
        inter = interior_nodes(op, ball)
        u = np.asarray(u, dtype=float)
        f = np.asarray(f, dtype=float)
        residual = op.apply(u) - f
        if inter.size:
            worst_local = int(np.argmin(residual[inter]))
            worst = int(inter[worst_local])
            if residual[worst] < RESIDUAL_FLOOR * (1.0 + float(np.max(np.abs(f)))):
                raise PreconditionError(
                    f"differential inequality violated at node {worst}: "
                    f"Lu - f = {residual[worst]:.3e}",
                    node=worst,
                    value=float(residual[worst]),
                )
        return cls(
            center_pos=center_pos,
            r_inner=r_inner,
            r_outer=r_outer,
            ball_nodes=ball,
            interior=inter,
            u=u,
            f=f,
            s_exponent=s_exponent,
            integrability=integrability,
        )


def moser_sup_bound_check(problem, op, geom, volume, q, family_param=math.nan):
    """Mean-value sup bound for subsolutions on nested balls.

    sup over B_r of u+ against (R-r)^{-1/(q-1)} ||f||_N plus
    (R-r)^{-2/(s(q-1))} ||u+||_s, both volume-normalized over B_R; reports
    the fitted constant.
    """
    mu = op.mass_weights
    inner = geom.ball_nodes(problem.center_pos, problem.r_inner)
    u_plus = np.maximum(problem.u, 0.0)
    lhs = float(np.max(u_plus[inner]))

    ball = problem.ball_nodes
    n_exp = problem.integrability
    s_exp = problem.s_exponent
    f_norm = (np.sum(np.abs(problem.f[ball]) ** n_exp * mu[ball]) / volume) ** (1.0 / n_exp)
    u_norm = (np.sum(u_plus[ball] ** s_exp * mu[ball]) / volume) ** (1.0 / s_exp)
    gap = problem.r_outer - problem.r_inner
    rhs = gap ** (-1.0 / (q - 1.0)) * f_norm + gap ** (-2.0 / (s_exp * (q - 1.0))) * u_norm
    if rhs == 0.0:
        return BoundReport(
            name="moser_sup",
            fitted_constant=math.nan,
            worst_lhs=lhs,
            worst_rhs=0.0,
            margin=math.nan,
            samples=1,
            kind="upper",
            family_param=family_param,
        )
    return BoundReport(
        name="moser_sup",
        fitted_constant=lhs / rhs,
        worst_lhs=lhs,
        worst_rhs=rhs,
        margin=0.0,
        samples=1,
        kind="upper",
        family_param=family_param,
    )


def local_inequality_check(op, region, u, mode, q, volume, cutoff=None,
                           outer_region=None, family_param=math.nan):
    """Local Sobolev and Poincare quotients on a subdomain.

    mode "interior" needs a cutoff equal to 1 on the region and supported in
    ``outer_region``; mode "zero_boundary" needs u supported in the region
    and includes the volume-ratio factor on the right-hand side.  Returns a
    (sobolev, poincare) pair of reports.
    """
    if q <= 1:
        raise InvalidParameterError(f"exponent q must exceed 1, got {q}")
    u = np.asarray(u, dtype=float)
    mu = op.mass_weights
    region = np.asarray(region, dtype=int)
    in_region = np.zeros(op.num_nodes, dtype=bool)
    in_region[region] = True

    if mode == "interior":
        if cutoff is None:
            raise InvalidParameterError("interior mode needs a cutoff function")
        eta = np.asarray(cutoff, dtype=float)
        if np.any(np.abs(eta[region] - 1.0) > 1e-12):
            raise SupportError("cutoff must equal 1 on the region")
        if outer_region is not None:
            outside = np.ones(op.num_nodes, dtype=bool)
            outside[np.asarray(outer_region, dtype=int)] = False
            if np.any(eta[outside] != 0.0):
                raise SupportError("cutoff must vanish outside the outer region")
        region_volume = float(np.sum(mu[region]))
        mean_local = float(np.sum(u[region] * mu[region])) / region_volume
        centered = u[region] - mean_local
        energy = op.energy(eta * u)
        sob_lhs = (np.sum(np.abs(centered) ** (2 * q) * mu[region]) / volume) ** (1.0 / q)
        sob_rhs = energy / volume
        poin_lhs = float(np.sum(centered**2 * mu[region]))
        poin_rhs = energy
    elif mode == "zero_boundary":
        if np.any(u[~in_region] != 0.0):
            raise SupportError("field must vanish outside the region")
        complement_volume = volume - float(np.sum(mu[region]))
        if complement_volume <= 0:
            raise InvalidParameterError("region must have nonempty complement")
        factor = 1.0 + float(np.sum(mu[region])) / complement_volume
        energy = op.energy(u)
        sob_lhs = (np.sum(np.abs(u[region]) ** (2 * q) * mu[region]) / volume) ** (1.0 / q)
        sob_rhs = factor * energy / volume
        poin_lhs = float(np.sum(u[region] ** 2 * mu[region]))
        poin_rhs = factor * energy
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")

    def report(name, lhs, rhs):
        fitted = lhs / rhs if rhs > 0 else (math.nan if lhs > 0 else 0.0)
        return BoundReport(
            name=name,
            fitted_constant=fitted,
            worst_lhs=lhs,
            worst_rhs=rhs,
            margin=0.0,
            samples=1,
            kind="upper",
            family_param=family_param,
        )

    return (
        report(f"local_sobolev_{mode}", float(sob_lhs), float(sob_rhs)),
        report(f"local_poincare_{mode}", float(poin_lhs), float(poin_rhs)),
    )


def make_subharmonic_instance(op, rng):
    """Random exact subsolution: solve Lu = f for a mean-free source f >= -c.

    f is |g| recentered to mean zero for a standard normal field g, so the
    differential inequality Lu >= f holds with equality everywhere.
    """
    from .spectral import _grounded_factor

    g = rng.standard_normal(op.num_nodes)
    f = np.abs(g)
    f = f - op.mean(f)
    rhs = -(op.mass_weights * f)
    u = np.empty(op.num_nodes)
    u[0] = 0.0
    u[1:] = _grounded_factor(op).solve(rhs[1:])
    return u - op.mean(u), f


def green_pointwise_bound_check(greens, geom, q, volume, family_param=math.nan):
    """Pointwise Green bound G(x,y) <= (C/V) d(x,y)^{-2/(q-1)}.

    Probes where G <= 0 satisfy the bound trivially and coincident pairs are
    skipped; the fitted constant is the sup over the rest.
    """
    expo = 2.0 / (q - 1.0)
    lhs, rhs = [], []
    skipped = 0
    for green in greens:
        cx = geom.center_index(green.source)
        dist = geom.distances[cx]
        for y in range(green.values.size):
            if y == green.source or dist[y] == 0.0:
                skipped += 1
                continue
            val = green.values[y]
            if val <= 0.0:
                continue
            lhs.append(val * volume)
            rhs.append(dist[y] ** (-expo))
    if not lhs:
        return BoundReport(
            name="green_pointwise",
            fitted_constant=0.0,
            worst_lhs=0.0,
            worst_rhs=math.nan,
            margin=0.0,
            samples=0,
            kind="upper",
            family_param=family_param,
        )
    report = BoundReport.from_samples(
        "green_pointwise", lhs, rhs, kind="upper", family_param=family_param
    )
    return report
