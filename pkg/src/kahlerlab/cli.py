"""Command-line face of the lab: per-check subcommands and family sweeps."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .davies import davies_integrals, gaussian_offdiag_check
from .functionals import generate_test_battery, geodesic_geometry, sobolev_quotient
from .metrics import build_flat_torus, intersection_number
from .moser import SubdomainProblem, make_subharmonic_instance, moser_sup_bound_check
from .operators import assemble_laplacian
from .reports import format_float
from .spectral import (
    eigendecompose,
    green_function,
    green_integral_moments,
    green_representation_residual,
    heat_kernel_eval,
    min_valid_time,
)
from .sweep import SweepConfig, build_member, emit_reports, run_sweep


def _add_shared(parser):
    parser.add_argument("--grid", type=int, default=16, help="nodes per real axis")
    parser.add_argument("--dim", type=int, default=1, help="complex dimension")
    parser.add_argument("--family", default="flat",
                        choices=["flat", "product_collapse", "potential_pinch", "scaling"])
    parser.add_argument("--t", type=float, default=1.0, help="family parameter")
    parser.add_argument("--t-min", type=float, default=0.03)
    parser.add_argument("--t-max", type=float, default=1.0)
    parser.add_argument("--t-steps", type=int, default=4)
    parser.add_argument("--num-eigs", type=int, default=0, help="0 = automatic")
    parser.add_argument("--q", type=float, default=4.0 / 3.0)
    parser.add_argument("--beta", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output file or directory")


def _config_from_args(args, **overrides):
    settings = dict(
        complex_dim=args.dim,
        resolution=args.grid,
        family=args.family,
        q=args.q,
        beta=args.beta,
        seed=args.seed,
        num_eigs=args.num_eigs,
    )
    settings.update(overrides)
    return SweepConfig(**settings)


def _write_lines(lines, out):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _build_setup(args):
    config = _config_from_args(args, t_grid=(args.t,))
    metric = build_member(config, args.t)
    op = assemble_laplacian(metric)
    count = args.num_eigs
    if count <= 0:
        count = op.num_nodes if op.num_nodes <= 4096 else min(128, op.num_nodes - 2)
    spec = eigendecompose(op, min(count, op.num_nodes))
    return config, metric, op, spec


def cmd_spectrum(args):
    _, _, op, spec = _build_setup(args)
    lines = ["k,lambda,residual"]
    for k in range(spec.count):
        lines.append(
            f"{k},{format_float(spec.eigenvalues[k])},{format_float(spec.residuals[k])}"
        )
    _write_lines(lines, args.out)
    return 0


def cmd_heat(args):
    _, metric, op, spec = _build_setup(args)
    rng = np.random.default_rng(args.seed)
    nodes = rng.choice(op.num_nodes, size=min(4, op.num_nodes), replace=False)
    t_grid = np.geomspace(args.t_min, args.t_max, args.t_steps)
    lines = ["x,y,t,H,tail_bound"]
    for x in nodes:
        for y in nodes:
            for t in t_grid:
                t_eval = max(t, min_valid_time(spec, int(x), int(y), 1e-8) * 1.001)
                ev = heat_kernel_eval(spec, int(x), int(y), t_eval)
                lines.append(
                    f"{x},{y},{format_float(t_eval)},{format_float(ev.value)},"
                    f"{format_float(ev.tail_bound)}"
                )
    _write_lines(lines, args.out)
    return 0


def cmd_green(args):
    _, metric, op, spec = _build_setup(args)
    rng = np.random.default_rng(args.seed)
    sources = rng.choice(op.num_nodes, size=min(4, op.num_nodes), replace=False)
    volume = op.total_volume
    greens = [green_function(op, int(x)) for x in sources]
    u = rng.standard_normal(op.num_nodes)
    resid = green_representation_residual(op, greens, u)
    lines = ["source,min_G,residual,zero_mean,moment_grad,moment_power"]
    for green in greens:
        moments = green_integral_moments(green, eps=1.0, beta=args.beta)
        grad_val = args.beta * volume ** (-args.beta) * moments.moment_2
        power_val = volume * moments.moment_1
        lines.append(
            f"{green.source},{format_float(moments.min_value)},"
            f"{format_float(green.defining_residual())},"
            f"{format_float(green.mean())},"
            f"{format_float(grad_val)},{format_float(power_val)}"
        )
    lines.append(f"representation_residual,{format_float(resid)},,,,")
    _write_lines(lines, args.out)
    return 0


def cmd_sobolev(args):
    config, metric, op, spec = _build_setup(args)
    reference = build_flat_torus(metric.domain)
    volume = op.total_volume
    intersection = intersection_number(metric, reference)
    rng = np.random.default_rng(args.seed)
    centers = np.sort(rng.choice(op.num_nodes, size=min(8, op.num_nodes), replace=False))
    geom = geodesic_geometry(metric, centers)
    battery = generate_test_battery(metric.domain, geom, args.battery, args.seed + 1)
    lines = ["index,ratio,moser_ratio"]
    worst = 0.0
    for i, u in enumerate(battery):
        quot = sobolev_quotient(op, u, args.q, intersection, volume)
        worst = max(worst, quot.ratio)
        lines.append(f"{i},{format_float(quot.ratio)},{format_float(quot.moser_ratio)}")
    lines.append(f"fitted_C,{format_float(worst)},")
    _write_lines(lines, args.out)
    return 0


def cmd_davies(args):
    constants = davies_integrals(args.beta, tol=args.tol)
    lines = [
        "beta,A,B,C,err_A,err_B,err_C",
        ",".join(
            format_float(v)
            for v in (
                args.beta,
                constants.a_value,
                constants.b_value,
                constants.c_value,
                constants.a_error,
                constants.b_error,
                constants.c_error,
            )
        ),
    ]
    _write_lines(lines, args.out)
    return 0


def cmd_moser(args):
    config, metric, op, spec = _build_setup(args)
    rng = np.random.default_rng(args.seed)
    centers = np.sort(rng.choice(op.num_nodes, size=min(6, op.num_nodes), replace=False))
    geom = geodesic_geometry(metric, centers)
    diam = geom.diameter
    volume = op.total_volume
    lines = ["instance,fitted_C"]
    for j in range(args.instances):
        u, f = make_subharmonic_instance(op, np.random.default_rng(args.seed + 100 + j))
        problem = SubdomainProblem.build(
            op, geom, center_pos=0, r_inner=0.2 * diam, r_outer=0.45 * diam,
            u=u, f=f, s_exponent=2.0, integrability=2.0 * args.q / (args.q - 1.0),
            q=args.q,
        )
        rep = moser_sup_bound_check(problem, op, geom, volume, args.q)
        lines.append(f"{j},{format_float(rep.fitted_constant)}")
    _write_lines(lines, args.out)
    return 0


def cmd_sweep(args):
    if args.config:
        config = SweepConfig.from_file(args.config)
        if args.out:
            config = SweepConfig(**{**config.__dict__, "output": args.out})
    else:
        t_grid = tuple(np.geomspace(args.t_max, args.t_min, args.t_steps).tolist())
        config = _config_from_args(
            args,
            family=args.family if args.family != "flat" else "product_collapse",
            complex_dim=max(args.dim, 2),
            t_grid=t_grid,
            battery_size=args.battery,
            output=args.out or "out",
        )
    report = run_sweep(config)
    outdir = emit_reports(report, config.output)
    for name in sorted(report.verdicts):
        print(f"{name}: {'PASS' if report.verdicts[name] else 'FAIL'}")
    print(f"reports written to {outdir}")
    return 0 if report.all_passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kahlerlab",
        description="Verification lab for uniform spectral estimates on "
        "degenerating Kahler model metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    specs = {
        "spectrum": (cmd_spectrum, "eigenvalues of the discrete Laplacian"),
        "heat": (cmd_heat, "heat-kernel probe evaluations"),
        "green": (cmd_green, "Green's-function residuals and moments"),
        "sobolev": (cmd_sobolev, "Sobolev quotients over a test battery"),
        "davies": (cmd_davies, "schedule integrals A, B, C"),
        "moser": (cmd_moser, "sup bounds for generated subsolutions"),
        "sweep": (cmd_sweep, "full family sweep with CSV reports"),
    }
    for name, (func, help_text) in specs.items():
        sp = sub.add_parser(name, help=help_text)
        _add_shared(sp)
        sp.set_defaults(func=func)
        if name == "davies":
            sp.add_argument("--tol", type=float, default=1e-8)
        if name in ("sobolev", "sweep"):
            sp.add_argument("--battery", type=int, default=50)
        if name == "moser":
            sp.add_argument("--instances", type=int, default=5)
        if name == "sweep":
            sp.add_argument("--config", default=None, help="key = value config file")

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
