"""Experiment runner.

Subcommands: solve | compare | lemmas | mms | audit.  Every run writes CSV
artifacts with a metadata header into the output directory and reports the
outcome through the exit code: 0 pass, 1 a requested check failed, 2 invalid
input or audit failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as cfg
from .algebra import inequality_sweep
from .assembly import structure_condition_audit
from .csvio import write_csv
from .solver import SolverFailure, solve_cauchy_dirichlet, solve_cauchy_expanding
from .verification import (
    ComparisonAuditError,
    check_comparison,
    discrete_energy_identity,
    energy_report,
    manufactured_error,
    manufactured_rhs,
    weak_residual,
)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3


def _echo_config(path, out_dir, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    if path is not None:
        with open(path) as handle:
            lines.append(handle.read())
    for key, value in (extra or {}).items():
        lines.append(f"# resolved {key} = {value}")
    with open(os.path.join(out_dir, "metadata.txt"), "w") as handle:
        handle.write("\n".join(lines) + "\n")


def _config_metadata(args, **extra):
    meta = [("config", getattr(args, "config", None)),
            ("seed", getattr(args, "seed", None)),
            ("threads", getattr(args, "threads", None))]
    meta.extend(sorted(extra.items()))
    return [(k, v) for k, v in meta if v is not None]


def _write_trajectories(result, out, settings):
    lattice_axes = [
        np.linspace(result.basis.domain.lower[d], result.basis.domain.upper[d],
                    settings.lattice)
        for d in range(result.basis.domain.dim)
    ]
    grids = np.meshgrid(*lattice_axes, indexing="ij")
    lattice = np.stack([g.ravel() for g in grids], axis=-1)
    coord_cols = [f"x_{d + 1}" for d in range(result.basis.domain.dim)]
    for idx, traj in enumerate(result.trajectories):
        times = list(traj.times[::settings.time_stride])
        if times[-1] != traj.times[-1]:
            times.append(traj.times[-1])
        rows = []
        for t in times:
            vals = traj.values_on(lattice, float(t))
            for point, val in zip(lattice, vals):
                rows.append((float(t), *[float(c) for c in point], float(val)))
        write_csv(
            os.path.join(out, f"trajectory_{idx:02d}.csv"),
            ["t", *coord_cols, "u"],
            rows,
            metadata=[("epsilon", traj.epsilon)],
        )


def cmd_solve(args) -> int:
    cp = cfg.read_config(args.config)
    out = args.out or cfg.build_output(cp).directory
    settings = cfg.build_output(cp)
    disc = cfg.build_discretization(cp)
    schedule = cfg.build_schedule(cp)
    checks = cfg.build_checks(cp)

    if cp.has_section("expanding"):
        return _run_expanding(args, cp, out, disc, schedule)

    problem = cfg.build_problem(cp)
    step_log = [] if settings.verbose or args.verbose else None
    try:
        result = solve_cauchy_dirichlet(
            problem, disc.modes_per_dim, schedule, disc.stepper,
            disc.quadrature_order, step_log=step_log,
        )
    except SolverFailure as exc:
        _emit_solver_failure(exc, out, args)
        return EXIT_SOLVER
    _echo_config(args.config, out, {"modes_per_dim": disc.modes_per_dim,
                                    "scheme": disc.stepper.scheme})
    _write_trajectories(result, out, settings)
    if step_log is not None:
        write_csv(os.path.join(out, "steps.csv"),
                  ["t", "residual", "newton_iters"], step_log,
                  metadata=_config_metadata(args))

    failed = []
    reports = [energy_report(traj, problem, result.quadrature)
               for traj in result.trajectories]
    write_csv(
        os.path.join(out, "energy.csv"),
        ["epsilon", "sup_norm_term", "gradient_total", "rhs_budget", "ratio"],
        [
            (traj.epsilon, rep.sup_norm_term, float(np.sum(rep.gradient_terms)),
             rep.rhs_budget, rep.ratio)
            for traj, rep in zip(result.trajectories, reports)
        ],
        metadata=_config_metadata(args),
    )
    write_csv(
        os.path.join(out, "distances.csv"),
        ["epsilon_from", "epsilon_to", "spacetime_distance"],
        [
            (result.trajectories[i].epsilon, result.trajectories[i + 1].epsilon, d)
            for i, d in enumerate(result.pairwise_distances)
        ],
        metadata=_config_metadata(args),
    )
    if checks.energy:
        if not all(np.isfinite(rep.lhs_total) for rep in reports):
            failed.append("energy: non-finite left-hand side")
        if len(reports) >= 2:
            a, b = reports[-2].lhs_total, reports[-1].lhs_total
            denom = max(abs(b), 1e-300)
            if abs(a - b) / denom > checks.energy_variation_tol:
                failed.append(
                    f"energy: variation {abs(a - b) / denom:.3e} over the last "
                    f"two levels exceeds {checks.energy_variation_tol}"
                )
    if checks.weak_residual:
        rows = weak_residual(
            result.final, problem, checks.weak_residual_modes,
            quad=result.quadrature,
        )
        write_csv(os.path.join(out, "weak_residual.csv"),
                  ["mode", "t1", "t2", "eps", "residual"], rows,
                  metadata=_config_metadata(args))
        worst = max(abs(r[-1]) for r in rows)
        if worst > checks.weak_residual_tol:
            failed.append(f"weak_residual: {worst:.3e} > {checks.weak_residual_tol}")
    if checks.identity:
        gaps = discrete_energy_identity(result.final, problem, result.quadrature)
        write_csv(os.path.join(out, "identity.csv"), ["step", "gap"],
                  list(enumerate(gaps.tolist())), metadata=_config_metadata(args))
        if float(np.max(np.abs(gaps))) > checks.identity_tol:
            failed.append(f"identity: gap {np.max(np.abs(gaps)):.3e}")

    for message in failed:
        print(f"CHECK FAILED: {message}", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_PASS


def _run_expanding(args, cp, out, disc, schedule) -> int:
    data = cfg.build_whole_space(cp)
    widths = cfg.get_floats(cp, "expanding", "half_widths", required=True)
    agreement_tol = cfg.get_float(cp, "expanding", "energy_agreement_tol", 0.01)
    try:
        result = solve_cauchy_expanding(
            data, widths, disc.modes_per_dim, schedule, disc.stepper,
            disc.quadrature_order,
        )
    except SolverFailure as exc:
        _emit_solver_failure(exc, out, args)
        return EXIT_SOLVER
    _echo_config(args.config, out, {"half_widths": widths})
    write_csv(
        os.path.join(out, "expanding_energies.csv"),
        ["half_width", "energy"],
        list(zip(result.half_widths, result.energies)),
        metadata=_config_metadata(args),
    )
    write_csv(
        os.path.join(out, "expanding_diffs.csv"),
        ["half_width_from", "half_width_to", "common_region_diff"],
        [
            (result.half_widths[i], result.half_widths[i + 1], d)
            for i, d in enumerate(result.common_region_diffs)
        ],
        metadata=_config_metadata(args),
    )
    failed = []
    spread = (max(result.energies) - min(result.energies)) / max(result.energies)
    if spread > agreement_tol:
        failed.append(f"expanding: energy spread {spread:.3e} > {agreement_tol}")
    diffs = result.common_region_diffs
    if any(b > a for a, b in zip(diffs, diffs[1:])):
        failed.append(f"expanding: common-region differences not decreasing {diffs}")
    for message in failed:
        print(f"CHECK FAILED: {message}", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_PASS


def cmd_compare(args) -> int:
    cp = cfg.read_config(args.config)
    out = args.out or cfg.build_output(cp).directory
    disc = cfg.build_discretization(cp)
    schedule = cfg.build_schedule(cp)
    problem_v = cfg.build_problem(cp, "problem_v")
    problem_w = cfg.build_problem(cp, "problem_w")
    tol = cfg.get_float(cp, "comparison", "tol", None)
    lattice = cfg.get_int(cp, "comparison", "lattice", 64)
    stride = cfg.get_int(cp, "comparison", "time_stride", 10)
    try:
        res_v = solve_cauchy_dirichlet(problem_v, disc.modes_per_dim, schedule,
                                       disc.stepper, disc.quadrature_order)
        res_w = solve_cauchy_dirichlet(problem_w, disc.modes_per_dim, schedule,
                                       disc.stepper, disc.quadrature_order)
    except SolverFailure as exc:
        _emit_solver_failure(exc, out, args)
        return EXIT_SOLVER
    report = check_comparison(res_v.final, res_w.final, lattice, tol, stride)
    _echo_config(args.config, out)
    write_csv(
        os.path.join(out, "comparison.csv"),
        ["min_gap", "violation_count", "tol", "lattice", "time_stride",
         "exploratory", "passed"],
        [(report.min_gap, report.violation_count, report.tol,
          report.lattice_resolution, report.time_stride, report.exploratory,
          report.passed)],
        metadata=_config_metadata(args),
    )
    return EXIT_PASS if report.passed else EXIT_CHECK_FAILED


def cmd_lemmas(args) -> int:
    alphas = [float(tok) for tok in args.alphas.split(",") if tok]
    rows = []
    ok = True
    for alpha in alphas:
        report = inequality_sweep(alpha, args.samples, args.seed)
        ok = ok and report.all_passed
        rows.extend(report.rows())
    out = args.out or "out"
    write_csv(
        os.path.join(out, "lemmas.csv"),
        ["lemma_id", "alpha", "samples", "worst_ratio", "pass"],
        rows,
        metadata=_config_metadata(args, alphas=args.alphas, samples=args.samples),
    )
    return EXIT_PASS if ok else EXIT_CHECK_FAILED


def cmd_mms(args) -> int:
    cp = cfg.read_config(args.config)
    out = args.out or cfg.build_output(cp).directory
    disc = cfg.build_discretization(cp)
    schedule = cfg.build_schedule(cp)
    problem = cfg.build_problem(cp)
    if not cp.has_option("mms", "exact"):
        raise cfg.ConfigError("mms", "exact", "missing exact-solution expression")
    exact = cfg.get_expr_callable(cp, "mms", "exact", problem.domain.dim)
    refinements = cfg.get_int(cp, "mms", "refinements", 3)
    ratio_floor = cfg.get_float(cp, "mms", "ratio_floor", 1.5)
    modes_base = cfg.get_int(cp, "mms", "modes_base", disc.modes_per_dim)

    if not cp.has_option("problem", "f"):
        rhs = manufactured_rhs(exact, problem.field, problem.exponents,
                               problem.domain, problem.horizon)
        problem = cfg.ProblemData(
            domain=problem.domain, horizon=problem.horizon, u0=problem.u0,
            g=problem.g, dt_g=problem.dt_g, f=rhs,
            exponents=problem.exponents, field=problem.field,
        )

    # refine modes and time step together so problems dominated by either
    # error source still show the improvement
    errors = []
    for level in range(refinements):
        m = modes_base * 2**level
        stepper = replace(disc.stepper, dt=disc.stepper.dt / 2**level)
        try:
            result = solve_cauchy_dirichlet(problem, m, schedule, stepper,
                                            disc.quadrature_order)
        except SolverFailure as exc:
            _emit_solver_failure(exc, out, args)
            return EXIT_SOLVER
        err = manufactured_error(result.final, exact, result.quadrature)
        errors.append((m, err.sup_norm, err.spacetime_norm))
    ratios = [errors[i][1] / errors[i + 1][1] for i in range(len(errors) - 1)]
    rows = [
        (m, sup, spacetime, ratios[i] if i < len(ratios) else "")
        for i, (m, sup, spacetime) in enumerate(errors)
    ]
    _echo_config(args.config, out)
    write_csv(os.path.join(out, "mms.csv"),
              ["modes_per_dim", "sup_error", "spacetime_error", "ratio_to_next"],
              rows, metadata=_config_metadata(args))
    if any(r < ratio_floor for r in ratios):
        print(f"CHECK FAILED: refinement ratios {ratios} below {ratio_floor}",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_PASS


def cmd_audit(args) -> int:
    cp = cfg.read_config(args.config)
    out = args.out or cfg.build_output(cp).directory
    problem = cfg.build_problem(cp)
    report = structure_condition_audit(
        problem.field, problem.exponents, args.samples, args.seed,
        domain=problem.domain, horizon=problem.horizon,
    )
    write_csv(
        os.path.join(out, "audit.csv"),
        ["condition", "samples", "violations", "worst_margin", "pass"],
        report.rows(),
        metadata=_config_metadata(args, samples=args.samples),
    )
    return EXIT_PASS if report.all_passed else EXIT_CHECK_FAILED


def _emit_solver_failure(exc, out, args):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "failure.txt"), "w") as handle:
        handle.write(str(exc) + "\n")
        handle.write(f"completed epsilon levels: {len(exc.partial)}\n")
    print(f"SOLVER FAILURE: {exc}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dngalerkin",
        description="Galerkin solver and verification harness for doubly "
                    "nonlinear anisotropic evolution equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="path to an INI config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="advisory; evaluation is vectorized and "
                            "deterministic regardless")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("solve", help="run the initial-boundary value solver")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run a comparison-principle experiment")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("lemmas", help="audit the algebraic inequalities")
    common(p, needs_config=False)
    p.add_argument("--alphas", default="0.25,0.5,1,2,3")
    p.add_argument("--samples", type=int, default=10000)
    p.set_defaults(func=cmd_lemmas)

    p = sub.add_parser("mms", help="manufactured-solution refinement study")
    common(p)
    p.set_defaults(func=cmd_mms)

    p = sub.add_parser("audit", help="audit a flux field's structure conditions")
    common(p)
    p.add_argument("--samples", type=int, default=2000)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"INVALID CONFIG: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ComparisonAuditError as exc:
        print(f"AUDIT FAILURE: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"INVALID INPUT: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
