"""Family sweeps: configuration, orchestration of every check over a
degenerating family, and deterministic report emission."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .davies import davies_integrals, gaussian_offdiag_check
from .errors import InvalidParameterError, KahlerLabError
from .functionals import (
    generate_test_battery,
    geodesic_geometry,
    nash_yau_entropy,
    noncollapsing_check,
    poincare_gap,
    radial_cutoff,
    sobolev_quotient,
)
from .grid import GridDomain
from .metrics import (
    build_degenerating_product_family,
    build_flat_torus,
    intersection_number,
    perturb_with_potential,
)
from .moser import (
    SubdomainProblem,
    local_inequality_check,
    make_subharmonic_instance,
    moser_sup_bound_check,
)
from .operators import assemble_laplacian
from .reports import (
    ADMISSIBILITY_CSV_HEADER,
    REPORT_CSV_HEADER,
    AdmissibilityRecord,
    BoundReport,
    format_float,
    uniformity_verdict,
)
from .spectral import (
    eigendecompose,
    green_function,
    green_integral_moments,
    green_representation_residual,
    heat_trace_bound_check,
    eigenvalue_growth_check,
    eigenfunction_sup_check,
)

DEFAULT_CHECKS = (
    "sobolev",
    "sobolev_moser",
    "heat_trace",
    "eigenvalue_growth",
    "eigenfunction_sup",
    "green_moment_grad",
    "green_moment_power",
    "green_min",
    "green_representation",
    "gaussian_offdiag",
    "noncollapsing",
    "poincare_gap",
    "moser_sup",
)

# checks verified against an absolute bound instead of family uniformity
ABSOLUTE_BOUNDS = {
    "green_moment_grad": (1.0, 1e-6),
    "green_representation": (0.0, 1e-9),
}

LOWER_KIND_CHECKS = {"eigenvalue_growth", "noncollapsing", "poincare_gap"}


def q_from_epsilon(epsilon0):
    """Sobolev exponent q = (1 + e)/(1 + e/2), strictly between 1 and 2."""
    if epsilon0 <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon0}")
    return (1.0 + epsilon0) / (1.0 + epsilon0 / 2.0)


@dataclass(frozen=True)
class SweepConfig:
    """Deterministic description of one family sweep."""

    complex_dim: int = 2
    resolution: int = 6
    side_length: float = 1.0
    family: str = "product_collapse"
    fiber_dim: int = 1
    t_grid: tuple = (1.0, 0.3, 0.1, 0.03)
    num_eigs: int = 0  # 0 = full spectrum when affordable
    solver_tol: float = 1e-8
    q: float = 4.0 / 3.0
    entropy_exponent: float = 0.0  # 0 = complex_dim + 1
    beta: float = 0.5
    green_eps: float = 1.0
    num_centers: int = 10
    num_probes: int = 5
    battery_size: int = 200
    heat_t_min: float = 0.02
    heat_t_max: float = 1.0
    heat_t_steps: int = 7
    moser_instances: int = 3
    seed: int = 0
    headroom: float = 10.0
    checks: tuple = DEFAULT_CHECKS
    output: str = "out"

    def __post_init__(self):
        if self.q <= 1:
            raise InvalidParameterError(f"q must exceed 1, got {self.q}")
        if not 0 < self.beta < 1:
            raise InvalidParameterError(f"beta must lie in (0,1), got {self.beta}")
        p = self.entropy_p
        if p <= self.complex_dim:
            raise InvalidParameterError(
                f"entropy exponent must exceed n = {self.complex_dim}, got {p}"
            )
        if any(t <= 0 for t in self.t_grid):
            raise InvalidParameterError("family parameters must be positive")
        if self.family == "product_collapse" and any(t > 1 for t in self.t_grid):
            raise InvalidParameterError("product parameters must lie in (0, 1]")
        unknown = set(self.checks) - set(DEFAULT_CHECKS) - {"local_interior", "local_zero_boundary"}
        if unknown:
            raise InvalidParameterError(f"unknown checks: {sorted(unknown)}")

    @property
    def entropy_p(self):
        return self.entropy_exponent if self.entropy_exponent else self.complex_dim + 1

    def domain(self):
        return GridDomain.cube(self.complex_dim, self.resolution, self.side_length)

    def canonical_text(self):
        """Flat key = value rendering with sections (hash and provenance)."""
        buf = io.StringIO()
        buf.write("[model]\n")
        for key in ("complex_dim", "resolution", "side_length", "family", "fiber_dim"):
            buf.write(f"{key} = {getattr(self, key)}\n")
        buf.write(f"t_grid = {','.join(format_float(t) for t in self.t_grid)}\n")
        buf.write("\n[spectral]\n")
        for key in ("num_eigs", "solver_tol"):
            buf.write(f"{key} = {getattr(self, key)}\n")
        buf.write("\n[checks]\n")
        for key in (
            "q", "entropy_exponent", "beta", "green_eps", "num_centers",
            "num_probes", "battery_size", "heat_t_min", "heat_t_max",
            "heat_t_steps", "moser_instances", "seed", "headroom",
        ):
            buf.write(f"{key} = {getattr(self, key)}\n")
        buf.write(f"enabled = {','.join(self.checks)}\n")
        buf.write("\n[output]\n")
        buf.write(f"path = {self.output}\n")
        return buf.getvalue()

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        defaults = {f.name: f.default for f in fields(cls)}
        kwargs = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key == "enabled":
                    kwargs["checks"] = tuple(x.strip() for x in raw.split(",") if x.strip())
                elif key == "path":
                    kwargs["output"] = raw.strip()
                elif key == "t_grid":
                    kwargs["t_grid"] = tuple(float(x) for x in raw.split(",") if x.strip())
                elif key in defaults:
                    default = defaults[key]
                    if isinstance(default, bool):
                        kwargs[key] = raw.strip().lower() in ("1", "true", "yes")
                    elif isinstance(default, int):
                        kwargs[key] = int(raw)
                    elif isinstance(default, float):
                        kwargs[key] = float(raw)
                    else:
                        kwargs[key] = raw.strip()
                else:
                    raise InvalidParameterError(f"unknown config key {key!r}")
        return cls(**kwargs)


@dataclass
class MemberResult:
    family_param: float
    admissibility: AdmissibilityRecord | None
    reports: dict
    failed: bool = False
    error: str = ""


@dataclass
class SweepReport:
    config: SweepConfig
    members: list
    verdicts: dict
    summary_stats: dict

    @property
    def all_passed(self):
        return all(self.verdicts.values()) and not any(m.failed for m in self.members)


def build_member(config, t):
    """Construct the family member at parameter t."""
    domain = config.domain()
    if config.family == "flat":
        return build_flat_torus(domain)
    if config.family == "product_collapse":
        return build_degenerating_product_family(t, domain, config.fiber_dim)
    if config.family == "potential_pinch":
        base = build_flat_torus(domain)
        coords = domain.coordinates()
        sides = np.asarray(domain.side_lengths)
        # pinch amplitude grows as t -> 0 while keeping the metric positive
        amplitude = (1.0 - t) * 0.9 / (math.pi**2 * domain.complex_dim)
        phi = amplitude * np.sum(
            np.cos(2.0 * np.pi * coords[:, 0::2] / sides[None, 0::2]), axis=1
        )
        return perturb_with_potential(base, phi)
    if config.family == "scaling":
        return build_flat_torus(domain).scaled(t)
    raise InvalidParameterError(f"unknown family {config.family!r}")


def _member_seed(config, index):
    return config.seed + 10007 * index


def evaluate_member(config, index, t, shared):
    """Run every enabled check on one family member."""
    metric = build_member(config, t)
    domain = metric.domain
    op = assemble_laplacian(metric)
    nnodes = op.num_nodes

    count = config.num_eigs
    if count <= 0:
        count = nnodes if nnodes <= 4096 else min(128, nnodes - 2)
    count = min(count, nnodes)
    spec = eigendecompose(op, count, tol=config.solver_tol)

    reference = build_flat_torus(domain)
    volume = metric.total_volume
    intersection = intersection_number(metric, reference)
    rng = np.random.default_rng(_member_seed(config, index))
    centers = np.sort(rng.choice(nnodes, size=min(config.num_centers, nnodes), replace=False))
    geom = geodesic_geometry(metric, centers)
    q = config.q

    admissibility = AdmissibilityRecord(
        family_param=t,
        complex_dim=domain.complex_dim,
        entropy_exponent=config.entropy_p,
        class_cap=math.inf,
        entropy=nash_yau_entropy(metric, config.entropy_p),
        entropy_cap=math.nan,  # family cap filled at aggregation
        gamma_min=float(np.min(metric.gamma_floor)),
        volume=volume,
        intersection=intersection,
        lambda1_intersection=poincare_gap(spec, intersection),
    )

    reports = {}
    enabled = set(config.checks)

    if {"sobolev", "sobolev_moser"} & enabled:
        battery = generate_test_battery(
            domain, geom, config.battery_size, _member_seed(config, index) + 1
        )
        ratios, moser_ratios = [], []
        for u in battery:
            quot = sobolev_quotient(op, u, q, intersection, volume)
            ratios.append(quot.ratio)
            moser_ratios.append(quot.moser_ratio)
        if "sobolev" in enabled:
            reports["sobolev"] = BoundReport.from_samples(
                "sobolev", ratios, np.ones(len(ratios)), family_param=t
            )
        if "sobolev_moser" in enabled:
            reports["sobolev_moser"] = BoundReport.from_samples(
                "sobolev_moser", moser_ratios, np.ones(len(moser_ratios)), family_param=t
            )

    if "heat_trace" in enabled:
        t_heat = np.geomspace(config.heat_t_min, config.heat_t_max, config.heat_t_steps)
        reports["heat_trace"] = heat_trace_bound_check(
            spec, t_heat, intersection, volume, q,
            x_samples=centers[: min(3, centers.size)], family_param=t,
        )

    if "eigenvalue_growth" in enabled:
        reports["eigenvalue_growth"] = eigenvalue_growth_check(
            spec, intersection, q, max_index=100, family_param=t
        )

    if "eigenfunction_sup" in enabled:
        reports["eigenfunction_sup"] = eigenfunction_sup_check(
            spec, intersection, volume, q, family_param=t
        )

    green_checks = {"green_moment_grad", "green_moment_power", "green_min",
                    "green_representation"} & enabled
    if green_checks:
        sources = centers[: min(config.num_probes, centers.size)]
        greens = [green_function(op, int(x)) for x in sources]
        if "green_representation" in enabled:
            u_probe = generate_test_battery(domain, geom, 1, _member_seed(config, index) + 2)[0]
            resid = green_representation_residual(op, greens, u_probe)
            reports["green_representation"] = BoundReport(
                name="green_representation", fitted_constant=resid,
                worst_lhs=resid, worst_rhs=1.0, margin=1e-9 - resid,
                samples=len(greens), kind="upper", family_param=t,
            )
        grad_vals, power_vals, c0_vals = [], [], []
        for green in greens:
            moments = green_integral_moments(green, config.green_eps, config.beta)
            grad_vals.append(config.beta * volume ** (-config.beta) * moments.moment_2)
            power_vals.append(volume**config.green_eps * moments.moment_1)
            c0_vals.append(max(0.0, -moments.min_value * volume))
        if "green_moment_grad" in enabled:
            reports["green_moment_grad"] = BoundReport.from_samples(
                "green_moment_grad", grad_vals, np.ones(len(grad_vals)),
                bound=1.0 + 1e-6, family_param=t,
            )
        if "green_moment_power" in enabled:
            reports["green_moment_power"] = BoundReport.from_samples(
                "green_moment_power", power_vals, np.ones(len(power_vals)), family_param=t
            )
        if "green_min" in enabled:
            reports["green_min"] = BoundReport.from_samples(
                "green_min", c0_vals, np.ones(len(c0_vals)), family_param=t,
            )

    if "gaussian_offdiag" in enabled:
        b_beta = shared["davies"].b_value
        pairs = [(int(centers[0]), int(centers[j]))
                 for j in range(1, min(config.num_probes + 1, centers.size))]
        t_heat = np.geomspace(config.heat_t_min, config.heat_t_max, config.heat_t_steps)
        reports["gaussian_offdiag"] = gaussian_offdiag_check(
            spec, geom, q, intersection, volume, b_beta, pairs, t_heat,
            family_param=t,
        )

    if "noncollapsing" in enabled:
        reports["noncollapsing"] = noncollapsing_check(geom, q, volume, family_param=t)

    if "poincare_gap" in enabled:
        gap = poincare_gap(spec, intersection)
        reports["poincare_gap"] = BoundReport(
            name="poincare_gap", fitted_constant=gap, worst_lhs=gap,
            worst_rhs=1.0, margin=0.0, samples=1, kind="lower", family_param=t,
        )

    if "moser_sup" in enabled:
        fitted = []
        diam = geom.diameter
        for j in range(config.moser_instances):
            u, f = make_subharmonic_instance(op, np.random.default_rng(
                _member_seed(config, index) + 100 + j))
            problem = SubdomainProblem.build(
                op, geom, center_pos=0, r_inner=0.2 * diam, r_outer=0.45 * diam,
                u=u, f=f, s_exponent=2.0, integrability=2.0 * q / (q - 1.0), q=q,
            )
            rep = moser_sup_bound_check(problem, op, geom, volume, q, family_param=t)
            fitted.append(rep.fitted_constant)
        reports["moser_sup"] = BoundReport.from_samples(
            "moser_sup", fitted, np.ones(len(fitted)), family_param=t
        )

    if "local_interior" in enabled or "local_zero_boundary" in enabled:
        diam = geom.diameter
        u_local = generate_test_battery(domain, geom, 1, _member_seed(config, index) + 3)[0]
        inner = geom.ball_nodes(0, 0.3 * diam)
        outer = geom.ball_nodes(0, 0.6 * diam)
        if "local_interior" in enabled:
            eta = radial_cutoff(geom, 0, 0.3 * diam, 0.6 * diam)
            sob, poin = local_inequality_check(
                op, inner, u_local, "interior", q, volume, cutoff=eta,
                outer_region=outer, family_param=t,
            )
            reports["local_interior"] = sob
        if "local_zero_boundary" in enabled:
            bump = radial_cutoff(geom, 0, 0.15 * diam, 0.3 * diam) * u_local
            mask = np.zeros(nnodes, dtype=bool)
            mask[inner] = True
            bump = np.where(mask, bump, 0.0)
            sob, poin = local_inequality_check(
                op, inner, bump, "zero_boundary", q, volume, family_param=t
            )
            reports["local_zero_boundary"] = sob

    return MemberResult(family_param=t, admissibility=admissibility, reports=reports)


def run_sweep(config):
    """Evaluate every family member and aggregate uniformity verdicts.

    A failed member is recorded and skipped; the sweep continues and the
    overall result is marked unsuccessful.
    """
    shared = {"davies": davies_integrals(config.beta, tol=1e-6)}
    members = []
    for index, t in enumerate(config.t_grid):
        try:
            members.append(evaluate_member(config, index, t, shared))
        except KahlerLabError as exc:
            members.append(MemberResult(
                family_param=t, admissibility=None, reports={},
                failed=True, error=str(exc),
            ))

    # fill the family entropy cap
    entropies = [m.admissibility.entropy for m in members if m.admissibility]
    cap = max(entropies) if entropies else math.nan
    for m in members:
        if m.admissibility:
            m.admissibility.entropy_cap = cap

    verdicts = {}
    stats = {}
    for name in config.checks:
        values = [m.reports[name].fitted_constant for m in members if name in m.reports]
        if not values:
            verdicts[name] = False
            continue
        arr = np.asarray(values, dtype=float)
        stats[name] = {
            "min": float(np.min(arr)),
            "median": float(np.median(arr)),
            "max": float(np.max(arr)),
        }
        if name in ABSOLUTE_BOUNDS:
            bound, slack = ABSOLUTE_BOUNDS[name]
            verdicts[name] = bool(np.all(arr <= bound + slack))
        elif name in LOWER_KIND_CHECKS:
            verdicts[name] = uniformity_verdict(values, kind="lower",
                                                headroom=config.headroom)
        else:
            verdicts[name] = uniformity_verdict(values, kind="upper",
                                                headroom=config.headroom)
    if any(m.failed for m in members):
        verdicts["members_complete"] = False

    return SweepReport(config=config, members=members, verdicts=verdicts,
                       summary_stats=stats)


def emit_reports(report, outdir):
    """Write reports.csv, admissibility.csv and summary.json.

    Output bytes depend only on the configuration and seed.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "reports.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_HEADER)
        for member in report.members:
            for name in report.config.checks:
                if name in member.reports:
                    writer.writerow(member.reports[name].csv_row())

    with open(out / "admissibility.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ADMISSIBILITY_CSV_HEADER)
        for member in report.members:
            if member.admissibility:
                writer.writerow(member.admissibility.csv_row())

    summary = {
        "config_sha256": report.config.config_hash(),
        "package_version": __version__,
        "verdicts": {k: bool(v) for k, v in report.verdicts.items()},
        "fitted_stats": report.summary_stats,
        "failed_members": [
            {"family_param": m.family_param, "error": m.error}
            for m in report.members if m.failed
        ],
        "all_passed": report.all_passed,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return out
