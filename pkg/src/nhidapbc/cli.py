"""Command-line front end.

``nhidapbc run <scenario.json> ... --out <dir>`` integrates scenarios and
writes trajectory.csv, report.json, plotdata/ series and rendered figures.
``nhidapbc validate <scenario.json>`` checks model structure and matching
residuals without simulating.

Exit codes: 0 all agents converged, 1 validation failed, 2 not converged,
3 scenario/config error, 4 numerical or collision failure.  Set NHIDAPBC_LOG
to DEBUG/INFO/WARNING for verbosity.
"""

from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import reporting, sim
from .errors import CollisionError, NumericalFailure, ScenarioError
from .idapbc import matching_residuals
from .models import validate_pcd
from .pcdpot import PotentialMode, assemble_grad_Vd
from .phcore import ReducedState
from .scenario import build_world, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

log = logging.getLogger("nhidapbc")


def _setup_logging():
    level = os.environ.get("NHIDAPBC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _workspace_goals(world):
    """Workspace-plane targets per agent for the path figure."""
    goals = {}
    for agent in world.agents:
        if agent.goal.s_star is None:
            continue
        if agent.kind == "arm3dof":
            goals[agent.id] = tuple(agent.model.workspace(agent.goal.s_star)[:2])
        else:
            goals[agent.id] = tuple(agent.goal.s_star[:2])
    return goals


def _run_one(path, outdir, dt, t_final, figures):
    """Run one scenario file; returns the exit code for this run."""
    path = Path(path)
    outdir = Path(outdir)
    try:
        spec = load_scenario(path)
    except ScenarioError as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        return EXIT_CONFIG

    outdir.mkdir(parents=True, exist_ok=True)
    try:
        trajectory, report = sim.run(spec, dt=dt, t_final=t_final)
    except (NumericalFailure, CollisionError) as exc:
        click.echo(f"error: {path.name}: {type(exc).__name__}: {exc}", err=True)
        reporting.write_report_json(
            {"scenario": path.name, "failure": str(exc), "exit_code": EXIT_NUMERIC},
            outdir / "report.json")
        return EXIT_NUMERIC

    violations = sim.monitors(trajectory, safety_radius=spec.collision.safety_radius)
    code = EXIT_OK if report.all_converged else EXIT_NOT_CONVERGED

    reporting.write_trajectory_csv(trajectory, outdir / "trajectory.csv")
    reporting.write_plotdata(trajectory, outdir / "plotdata")
    payload = reporting.report_payload(report, violations, exit_code=code,
                                       scenario_name=path.name)
    reporting.write_report_json(payload, outdir / "report.json")
    if figures:
        from . import plots  # deferred: matplotlib import is slow
        world, _ = build_world(spec)
        plots.render_figures(trajectory, report, outdir / "figures",
                             goals=_workspace_goals(world),
                             safety_radius=spec.collision.safety_radius)

    status = "converged" if report.all_converged else (
        "stalled" if report.stalled else "not converged")
    click.echo(f"{path.name}: {status} at t={report.t_end:.3f}s "
               f"({report.steps} steps, {report.wall_clock_s:.1f}s wall, "
               f"{len(violations)} violations) -> {outdir}")
    log.info("report: %s", payload)
    return code


def _worker(args):
    return _run_one(*args)


@click.group()
def main():
    """Stabilization and cooperative control of nonholonomic robots."""
    _setup_logging()


@main.command("run")
@click.argument("scenarios", nargs=-1, required=True,
                type=click.Path(exists=False, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory (per-scenario subdirectories when several).")
@click.option("--dt", type=float, default=None, help="Override integrator step [s].")
@click.option("--t-final", type=float, default=None, help="Override horizon [s].")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Run scenario files concurrently.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures alongside the data files.")
def run_command(scenarios, out_dir, dt, t_final, jobs, figures):
    """Integrate scenario files and write trajectories, reports and plots."""
    out = Path(out_dir)
    if len(scenarios) == 1:
        tasks = [(scenarios[0], out, dt, t_final, figures)]
    else:
        tasks = [(p, out / Path(p).stem, dt, t_final, figures) for p in scenarios]

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_worker, tasks))
    else:
        codes = [_run_one(*task) for task in tasks]
    sys.exit(max(codes))


@main.command("validate")
@click.argument("scenario", type=click.Path(exists=False, dir_okay=False))
@click.option("--samples", type=int, default=200, show_default=True,
              help="Random states per structural check.")
def validate_command(scenario, samples):
    """Check decomposition assumptions and matching residuals, no simulation."""
    try:
        spec = load_scenario(scenario)
        world, _ = build_world(spec)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    rng = np.random.default_rng(0)
    all_ok = True
    for agent in world.agents:
        click.echo(f"agent {agent.id} [{agent.kind}]")
        rep = validate_pcd(agent.model, agent.pcd, n_samples=samples)
        for line in rep.lines():
            click.echo(f"  {line}")
        all_ok &= rep.passed

        n, k = agent.model.n, agent.model.k
        if n - k == agent.model.m:
            click.echo("  matching: vacuous (fully actuated in constrained space)")
            continue
        worst = 0.0
        for _ in range(samples):
            q = rng.uniform(-3.0, 3.0, n)
            pt = rng.uniform(-2.0, 2.0, n - k)
            gvd = assemble_grad_Vd(agent.pcd, agent.cfg, PotentialMode(), q, agent.goal)
            kin, pot = matching_residuals(agent.model, agent.pcd, agent.cfg,
                                          ReducedState(q, pt), gvd)
            if kin.size:
                worst = max(worst, float(np.max(np.abs(kin))),
                            float(np.max(np.abs(pot))))
        ok = worst <= 1e-8
        click.echo(f"  matching: max residual {worst:.3e} {'PASS' if ok else 'FAIL'}")
        all_ok &= ok

    click.echo("validation " + ("PASSED" if all_ok else "FAILED"))
    sys.exit(EXIT_OK if all_ok else EXIT_VALIDATION)


if __name__ == "__main__":
    main()
