"""Command-line front end.

Every command prints tab-delimited blocks to stdout::

    == checks ==
    name<TAB>PASS|FAIL<TAB>value<TAB>limit
    == info ==
    key<TAB>value

and exits 0 when all checks pass, 1 when a check fails, 2 on usage or
input errors. ``--report`` writes the same content as JSON and
``--figures`` renders PNG figures into a directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fileio
from .burst_solver import BurstConvergenceError, MembershipError
from .core import (SingularConfigurationError, center_of_vorticity_of, free_velocity,
                   moment_of_inertia_of, pair_product_sum)
from .dynamics import EventTrajectory, Merge, SystemSpec, simulate, time_reverse
from .markov import MarkovScenario, ensemble_stats, sample
from .nburst import OuterIterationError, PathBuilder
from .scenario import Scenario, ScenarioError, load_scenario
from .selfsimilar import (asrelation_residual, params_for, self_similar_positions,
                          spectrum_report, z_dot)
from .weakform import energy_ledger, invariant_drift, standard_battery, weak_residual

# Discriminant constants quoted for the explicit burst, per xi^2 and xi^4.
REFERENCE_DISCRIMINANTS = (3.4463e-4, 2.7035e-9)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2


@dataclass
class Report:
    command: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    figures: list = field(default_factory=list)

    def check(self, name: str, value, limit, passed: bool | None = None) -> bool:
        ok = bool(value <= limit) if passed is None else bool(passed)
        self.checks.append({"name": name, "passed": ok, "value": value, "limit": limit})
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def failures(self) -> list[str]:
        return [c["name"] for c in self.checks if not c["passed"]]

    def render(self) -> str:
        lines = [f"== {self.command} =="]
        lines.append("== checks ==")
        for c in self.checks:
            lines.append(f"{c['name']}\t{'PASS' if c['passed'] else 'FAIL'}\t"
                         f"{_fmt(c['value'])}\t{_fmt(c['limit'])}")
        lines.append("== info ==")
        for key, value in self.info.items():
            lines.append(f"{key}\t{_fmt(value)}")
        if self.figures:
            lines.append("== figures ==")
            lines.extend(self.figures)
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"command": self.command, "passed": self.passed, "checks": self.checks,
                "info": self.info, "figures": self.figures}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.6g}{value.imag:+.6g}j"
    if isinstance(value, (dict, list, tuple, np.ndarray)):
        return json.dumps(fileio.to_jsonable(value))
    return str(value)


# ---------------------------------------------------------------------------
# certificates shared by the trajectory commands


def certify_trajectory(traj: EventTrajectory, report: Report, tolerances, forced: bool = False):
    """Invariant drift, weak-residual battery and energy ledger."""
    drifts = invariant_drift(traj)
    worst_h = max(d["energy"] for d in drifts)
    report.check("energy_drift_per_segment", worst_h, tolerances.energy_rtol)
    inertia = [d["moment_of_inertia"] for d in drifts if d["moment_of_inertia"] is not None]
    centre = [d["centre"] for d in drifts if d["centre"] is not None]
    if inertia:
        report.check("moment_of_inertia_drift", max(inertia), tolerances.invariant_rtol)
    if centre:
        report.check("centre_of_vorticity_drift", max(centre), tolerances.invariant_rtol)
    if forced:
        report.info["weak_residual"] = "skipped: an external field acts on the trajectory"
        return None
    rep = weak_residual(traj, standard_battery(traj), tolerance=tolerances.weak_residual)
    report.check("weak_residual", rep.max_residual, tolerances.weak_residual)
    report.info["weak_residual_worst"] = rep.worst()
    ledger = energy_ledger(traj, rtol=tolerances.energy_rtol)
    report.info["energy_jumps"] = ledger.jumps
    report.info["segments"] = len(traj.segments)
    report.info["events"] = [f"{type(ev).__name__}@{ev.t:.6g}" for ev in traj.events]
    return rep


def _burst_checks(report: Report, meta: dict, sc: Scenario) -> None:
    limit = max(1e3 * sc.solver.picard_tol, 1e-9)
    report.check("burst_gamma_residual", meta["gamma_residual"], limit)
    report.check("burst_ode_residual", meta["ode_residual"], 1e-6)
    if "hamiltonian_spread" in meta:
        spread = meta["hamiltonian_spread"]
        report.check("burst_energy_spread", spread, sc.tolerances.energy_rtol)
    for key in ("T", "T_star", "halvings", "picard_iterations", "outer_history"):
        if key in meta:
            report.info[f"burst_{key}"] = meta[key]


def _figures(traj: EventTrajectory, report: Report, outdir, weak=None) -> None:
    from .plotting import plot_energy, plot_trajectory, plot_weak_residual

    out = Path(outdir)
    report.figures.append(plot_trajectory(traj, out / "trajectory.png"))
    report.figures.append(plot_energy(traj, out / "energy.png"))
    if weak is not None:
        report.figures.append(plot_weak_residual(weak, out / "weak_residual.png"))


def _finish(report: Report, args) -> int:
    if getattr(args, "report", None):
        fileio.write_json(report.as_dict(), args.report)
    print(report.render())
    if not report.passed:
        print("certificate failure: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _outputs(sc: Scenario, args):
    traj_path = args.out or sc.output.trajectory
    report_path = args.report or sc.output.report
    fig_dir = args.figures or sc.output.figures
    return traj_path, report_path, fig_dir


# ---------------------------------------------------------------------------
# commands


def cmd_selfsimilar(args) -> int:
    xi = args.xi
    p = params_for(xi)
    report = Report("selfsimilar")
    scale = abs(xi)
    report.info.update({"xi": xi, "a": p.a, "b": p.b, "a1": p.a1, "a2": p.a2, "a3": p.a3,
                        "intensities": p.intensities.tolist(), "spiral_rate": p.spiral_rate})
    t = np.logspace(-6, 0, 50)
    z = self_similar_positions(p, t)
    vel = free_velocity(p.intensities, z)
    exact = np.multiply.outer(z_dot(p, t), p.shape)
    ode = float(np.max(np.abs(vel - exact) / np.abs(exact)))
    spec = spectrum_report(p)
    d_lin, d_const = spec["discriminant_linear"], spec["discriminant_constant"]
    ref_lin, ref_const = REFERENCE_DISCRIMINANTS[0] * xi ** 2, REFERENCE_DISCRIMINANTS[1] * xi ** 4
    if args.check:
        report.check("asrelation_residual", asrelation_residual(p) / scale, 1e-12)
        report.check("pair_product_sum", abs(pair_product_sum(p.intensities)) / xi ** 2, 1e-12)
        report.check("moment_of_inertia", abs(float(moment_of_inertia_of(p.intensities, p.shape))) / xi ** 2, 1e-12)
        report.check("centre_of_vorticity", abs(complex(center_of_vorticity_of(p.intensities, p.shape))) / scale, 1e-12)
        report.check("self_similar_ode_residual", ode, 1e-10)
        report.check("charpoly_vs_dense_eigenvalues", spec["charpoly_vs_dense"] / abs(p.a), 1e-9)
    else:
        report.info["asrelation_residual"] = asrelation_residual(p)
        report.info["self_similar_ode_residual"] = ode
    report.info.update({
        "eigenvalues": spec["eigenvalues_charpoly"],
        "max_real_part_offset_over_a": spec["max_real_part_offset"] / abs(p.a),
        "c1": spec["c1"], "c2": spec["c2"],
        "discriminant_linear": d_lin, "discriminant_linear_reference": ref_lin,
        "discriminant_linear_rel_mismatch": abs(d_lin - ref_lin) / abs(ref_lin),
        "discriminant_constant": d_const, "discriminant_constant_reference": ref_const,
        "discriminant_constant_rel_mismatch": abs(d_const - ref_const) / abs(ref_const),
        "mu_condition_holds": spec["mu_condition_holds"],
    })
    if args.figures:
        from .plotting import plot_selfsimilar

        report.figures.append(plot_selfsimilar(p, spec["eigenvalues_charpoly"],
                                               Path(args.figures) / "selfsimilar.png"))
    return _finish(report, args)


def _run_burst(sc: Scenario) -> tuple[EventTrajectory, dict]:
    req = sc.burst
    if req is None:
        raise ScenarioError("scenario has no 'burst' section")
    path = PathBuilder(sc.config, 0.0, sc.geometry, sc.field, sc.integration)
    path.advance(req.time)
    meta = path.burst(req.vortex, sc.solver, rho=req.rho)
    if sc.t_end is not None:
        path.advance(sc.t_end)
    return path.build({"kind": "burst", "source": sc.source}), meta


def _trajectory_command(args, name: str) -> int:
    sc = load_scenario(args.scenario)
    traj_path, report_path, fig_dir = _outputs(sc, args)
    args.report = report_path
    report = Report(name)
    if name == "simulate":
        if sc.t_end is None:
            raise ScenarioError("simulate needs time.end")
        traj = simulate(SystemSpec(sc.config, sc.geometry, sc.field), (0.0, sc.t_end),
                        sc.integration)
        meta = None
    else:
        traj, meta = _run_burst(sc)
        _burst_checks(report, meta, sc)
        if name == "collapse":
            traj = time_reverse(traj)
            merges = [ev for ev in traj.events if isinstance(ev, Merge)]
            report.check("collapse_merged", len(merges), 1, passed=len(merges) >= 1)
    forced = not sc.field.is_zero
    weak = certify_trajectory(traj, report, sc.tolerances, forced)
    if traj_path:
        fileio.write_trajectory(traj, traj_path, {"external_field": forced})
        report.info["trajectory_file"] = traj_path
    if fig_dir:
        _figures(traj, report, fig_dir, weak)
    return _finish(report, args)


def cmd_burst(args) -> int:
    return _trajectory_command(args, "burst")


def cmd_collapse(args) -> int:
    return _trajectory_command(args, "collapse")


def cmd_simulate(args) -> int:
    return _trajectory_command(args, "simulate")


def cmd_verify(args) -> int:
    from .scenario import Tolerances

    traj, head = fileio.read_trajectory(args.trajectory)
    tol = Tolerances(weak_residual=args.weak_tol, energy_rtol=args.energy_rtol,
                     invariant_rtol=args.invariant_rtol)
    report = Report("verify")
    report.info["file"] = str(args.trajectory)
    weak = certify_trajectory(traj, report, tol, bool(head.get("external_field", False)))
    if args.figures:
        _figures(traj, report, args.figures, weak)
    return _finish(report, args)


def cmd_markov(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.markov is None:
        raise ScenarioError("scenario has no 'markov' section")
    if sc.geometry != "plane" or not sc.field.is_zero:
        raise ScenarioError("markov runs on the plane without external field")
    m = sc.markov
    msc = MarkovScenario(sc.config, m.rate, m.horizon, sc.seed, m.burst_T, m.isolated_rho)
    if args.scenario_solver:
        msc = replace(msc, gamma=sc.solver, integration=sc.integration)
    n = args.samples if args.samples is not None else m.samples
    workers = args.workers if args.workers is not None else m.workers
    traj_path, report_path, fig_dir = _outputs(sc, args)
    args.report = report_path
    summary = ensemble_stats(msc, n, certify=True, workers=workers)
    report = Report("markov")
    d = summary.as_dict()
    report.info.update(d)
    report.check("samples_certified", summary.uncertified, 0, passed=summary.uncertified == 0)
    report.check("energy_ledger_additivity", summary.energy_additivity_error, 1e-3)
    if traj_path:
        fileio.write_trajectory(sample(msc, 0).trajectory, traj_path)
        report.info["trajectory_file"] = traj_path
    if fig_dir:
        from .plotting import plot_markov

        report.figures.append(plot_markov(summary, Path(fig_dir) / "markov.png"))
    return _finish(report, args)


def cmd_export(args) -> int:
    traj, _ = fileio.read_trajectory(args.trajectory)
    if args.format == "table":
        text = fileio.export_table(traj)
    else:
        text = json.dumps(fileio.export_plotdata(traj)) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vortexburst",
                                     description="Point-vortex bursts, collapses and weak-solution certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    def outputs(p, trajectory=True):
        p.add_argument("--report", help="write the report as JSON to this path")
        p.add_argument("--figures", help="render PNG figures into this directory")
        if trajectory:
            p.add_argument("--out", help="write the trajectory file here")

    p = sub.add_parser("selfsimilar", help="explicit burst parameters and spectrum")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--check", action="store_true", help="exit nonzero if an algebraic check fails")
    outputs(p, trajectory=False)
    p.set_defaults(func=cmd_selfsimilar)

    for name, func, text in (("burst", cmd_burst, "construct a burst"),
                             ("collapse", cmd_collapse, "time-reversed burst ending in a merge"),
                             ("simulate", cmd_simulate, "integrate with merge continuation")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario")
        outputs(p)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="certify a trajectory file")
    p.add_argument("trajectory")
    p.add_argument("--weak-tol", type=float, default=1e-5)
    p.add_argument("--energy-rtol", type=float, default=1e-6)
    p.add_argument("--invariant-rtol", type=float, default=1e-8)
    outputs(p, trajectory=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("markov", help="ensemble of random bursts")
    p.add_argument("scenario")
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--scenario-solver", action="store_true",
                   help="use the scenario's solver and integration sections instead of the "
                        "coarser ensemble defaults")
    outputs(p)
    p.set_defaults(func=cmd_markov)

    p = sub.add_parser("export", help="flat tables for plotting")
    p.add_argument("trajectory")
    p.add_argument("--format", choices=("table", "plotdata"), required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_export)
    return parser


_INPUT_ERRORS = (ScenarioError, fileio.TrajectoryFormatError, FileNotFoundError, ValueError)
_SOLVER_ERRORS = (MembershipError, OuterIterationError, BurstConvergenceError,
                  SingularConfigurationError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except _SOLVER_ERRORS as exc:
        print(f"certificate failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
