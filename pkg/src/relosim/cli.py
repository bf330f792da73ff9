"""Command-line front door: validate, run, calibrate, whatif, report.

Exit codes: 0 success, 1 runtime failure, 2 validation failure.  Commands
never mutate their input files; all outputs go to the chosen output
directory.
"""

import json
import os
import sys

import click
import yaml

from . import calibration, figures, simulation
from .errors import ValidationError


def _fail_validation(exc: ValidationError):
    for msg in exc.messages:
        click.echo(f"error: {msg}", err=True)
    sys.exit(2)


def _parse_overrides(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError([f"override {pair!r} is not key=value"])
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_scenario(path, overrides):
    scenario = simulation.load_scenario(path)
    if overrides:
        scenario = scenario.apply_overrides(_parse_overrides(overrides))
    return scenario


@click.group()
@click.version_option(package_name="relosim")
def main():
    """Housing/mobility relocation simulator and calibration harness."""


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
def validate(scenario_path):
    """Check a scenario and all referenced files; print layer/agent counts."""
    try:
        scenario = simulation.load_scenario(scenario_path)
        world = simulation.World.from_scenario(scenario)
        total = int(world.capacity.sum())
        if scenario.n_agents > total:
            raise ValidationError(
                [f"insufficient housing supply: {scenario.n_agents} agents, {total} vacant spaces"]
            )
    except ValidationError as exc:
        _fail_validation(exc)
    click.echo(
        f"OK: {len(world.model.block_groups)} block groups / "
        f"{len(world.model.buildings)} buildings / "
        f"{len(world.workplaces)} workplaces / "
        f"{len(world.profiles)} profiles / {len(world.modes)} modes / "
        f"{total} vacant spaces / {scenario.n_agents} agents"
    )


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", required=True, type=click.Path())
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--save-state", is_flag=True, help="Persist the converged state for what-if runs.")
@click.option("--threads", default=1, show_default=True, help="Worker cap (results identical).")
def run(scenario_path, output_dir, overrides, save_state, threads):
    """Run a scenario to convergence; write summary, history, agent table."""
    try:
        scenario = _load_scenario(scenario_path, overrides)
        world = simulation.World.from_scenario(scenario)
        state = simulation.run_to_convergence(world)
    except ValidationError as exc:
        _fail_validation(exc)
    os.makedirs(output_dir, exist_ok=True)
    summary = simulation.summarize(state)
    simulation.write_summary(summary, os.path.join(output_dir, "summary.json"))
    simulation.write_history_csv(state, os.path.join(output_dir, "history.csv"))
    simulation.write_agents_csv(state, os.path.join(output_dir, "agents.csv"))
    if save_state:
        simulation.save_state(state, os.path.join(output_dir, "state.json"))
    if state.converged:
        click.echo(f"converged after {state.iteration} iterations (seed {state.seed})")
    else:
        click.echo(
            f"warning: not converged within {state.iteration} iterations", err=True
        )
        click.echo(f"finished (non-converged) after {state.iteration} iterations")


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", required=True, type=click.Path())
@click.option("--observed-housing", type=click.Path(exists=True),
              help="Override the scenario's observed housing table.")
@click.option("--observed-modes", type=click.Path(exists=True),
              help="Override the scenario's observed mode-share table.")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--threads", default=1, show_default=True)
def calibrate(scenario_path, output_dir, observed_housing, observed_modes, overrides, threads):
    """Fit the 64 criteria weights to observed data by restart hill climbing."""
    try:
        scenario = _load_scenario(scenario_path, overrides)
        world = simulation.World.from_scenario(scenario)
        cal = scenario.calibration
        housing_path = observed_housing or cal.get("observed_housing")
        modes_path = observed_modes or cal.get("observed_modes")
        if not housing_path or not modes_path:
            raise ValidationError(
                ["observed data files required (scenario calibration block or --observed-* flags)"]
            )
        observed = calibration.load_observed(housing_path, modes_path)
        config = calibration.CalibrationConfig(
            step_size=float(cal.get("step_size", 0.05)),
            max_evaluations=int(cal.get("max_evaluations", 3000)),
            restarts=int(cal.get("restarts", 5)),
            seed=int(cal.get("seed", 0)),
            threads=threads,
        )
        result = calibration.hill_climb(world, observed, config)
    except ValidationError as exc:
        _fail_validation(exc)

    os.makedirs(output_dir, exist_ok=True)
    # Error spread of the best vector under alternate simulation seeds, to
    # show how much of the fit depends on the fixed seed.
    alt_seeds = int(cal.get("alt_seeds", 3))
    housing, mobility = result.space.to_criteria(result.best_vector)
    spread = []
    for k in range(alt_seeds):
        seed = scenario.seed + k + 1
        st = simulation.run_to_convergence(
            world, seed=seed, housing_criteria=housing, mobility_criteria=mobility
        )
        spread.append(
            {
                "seed": seed,
                "housing_error": calibration.housing_error(st, observed),
                "mobility_error": calibration.mobility_error(st, observed),
            }
        )
    calibration.write_result(
        result, os.path.join(output_dir, "calibration_result.json"),
        extra={"seed_spread": spread},
    )
    calibration.write_trace_csv(result, os.path.join(output_dir, "trace.csv"))
    from .population import save_criteria

    save_criteria(
        housing, mobility,
        os.path.join(output_dir, "housing_criteria.csv"),
        os.path.join(output_dir, "mobility_criteria.csv"),
    )
    if result.budget_exhausted:
        click.echo("warning: evaluation budget exhausted; best-so-far written", err=True)
    click.echo(
        f"calibrated: housing={result.housing_error:.4f} "
        f"mobility={result.mobility_error:.4f} total={result.total:.4f} "
        f"({result.evaluations} evaluations)"
    )


@main.command()
@click.argument("baseline_state", type=click.Path(exists=True))
@click.argument("interventions_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", required=True, type=click.Path())
def whatif(baseline_state, interventions_path, output_dir):
    """Apply interventions to a saved baseline state and re-run to
    convergence; write the side-by-side comparison."""
    try:
        state = simulation.load_state(baseline_state)
        with open(interventions_path) as fh:
            doc = yaml.safe_load(fh)
        if isinstance(doc, dict):
            doc = doc.get("interventions", [])
        interventions = [simulation.Intervention.from_dict(d) for d in doc or []]
        baseline_summary = simulation.summarize(state)
        variant = simulation.whatif_run(state, interventions)
    except ValidationError as exc:
        _fail_validation(exc)
    os.makedirs(output_dir, exist_ok=True)
    variant_summary = simulation.summarize(variant)
    comparison = {
        "schema": "relosim-comparison/1",
        "interventions": [iv.to_dict() for iv in interventions],
        "baseline": baseline_summary,
        "whatif": variant_summary,
        "deltas": simulation.compare_summaries(baseline_summary, variant_summary),
    }
    with open(os.path.join(output_dir, "comparison.json"), "w") as fh:
        json.dump(comparison, fh, indent=1)
        fh.write("\n")
    simulation.write_history_csv(variant, os.path.join(output_dir, "whatif_history.csv"))
    click.echo(
        f"what-if converged after {variant.iteration - state.iteration} further iterations"
    )


@main.command()
@click.argument("result_dir", type=click.Path(exists=True))
@click.option("--output-dir", "-o", type=click.Path(), default=None,
              help="Where to write figures (defaults to RESULT_DIR).")
def report(result_dir, output_dir):
    """Render figures for a run, calibration, or what-if output directory."""
    out = output_dir or result_dir
    os.makedirs(out, exist_ok=True)
    written = []
    history_path = os.path.join(result_dir, "history.csv")
    if os.path.exists(history_path):
        history = simulation.read_history_csv(history_path)
        if history:
            mode_ids = list(history[0]["mode_shares"].keys())
            figures.save_movers_figure(history, os.path.join(out, "movers.png"))
            figures.save_mode_shares_figure(
                history, mode_ids, os.path.join(out, "mode_shares.png")
            )
            written += ["movers.png", "mode_shares.png"]
    trace_path = os.path.join(result_dir, "trace.csv")
    if os.path.exists(trace_path):
        rows = calibration.read_trace_csv(trace_path)
        if rows:
            figures.save_error_evolution_figure(
                rows, os.path.join(out, "error_evolution.png")
            )
            written.append("error_evolution.png")
    comparison_path = os.path.join(result_dir, "comparison.json")
    if os.path.exists(comparison_path):
        with open(comparison_path) as fh:
            comparison = json.load(fh)
        figures.save_comparison_figure(comparison, os.path.join(out, "comparison.png"))
        written.append("comparison.png")
    if not written:
        click.echo("error: nothing to report on (no history.csv, trace.csv, "
                   "or comparison.json found)", err=True)
        sys.exit(2)
    for name in written:
        click.echo(f"wrote {os.path.join(out, name)}")


if __name__ == "__main__":
    main()
