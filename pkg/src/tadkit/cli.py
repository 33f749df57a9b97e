"""Command-line entry points.

Exit codes are a stable contract for automation: 0 for a success outcome,
10 for a failure outcome, 11 when the iteration budget ran out, and 64+
for usage, config, or state-file problems.
"""

import csv
import json
import os
import sys

import click
import numpy as np

from . import campaign as camp
from .config import CampaignConfig, build_session, default_config
from .errors import (CampaignFinishedError, ConfigError, NoPendingBatchError,
                     StateParseError, TadkitError, UnsupportedVersionError)
from .persistence import export_history, load_state, save_state
from .testbed import SimulatedOracle, eval_test_function_batch

EXIT_SUCCESS = 0
EXIT_FAILURE_OUTCOME = 10
EXIT_MAX_ITERS = 11
EXIT_USAGE = 64
EXIT_CONFIG = 65
EXIT_STATE = 66

click.UsageError.exit_code = EXIT_USAGE


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return CampaignConfig.from_dict(raw)
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG, f"config is not valid JSON: {exc}")
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _load_session(state_path):
    try:
        persisted = load_state(state_path)
    except FileNotFoundError:
        _fail(EXIT_STATE, f"state file not found: {state_path}")
    except (UnsupportedVersionError, StateParseError) as exc:
        _fail(EXIT_STATE, str(exc))
    state = persisted.state
    oracle = None
    if state.oracle_mode == "simulated":
        if persisted.config is None or persisted.oracle_rng_state is None:
            _fail(EXIT_STATE, "state file lacks the simulated oracle stream")
        oracle = SimulatedOracle(eval_test_function_batch,
                                 persisted.config.noise_std)
        oracle.set_rng_state(persisted.oracle_rng_state)
    return persisted.config, state, oracle


def _save_session(state, state_path, config, oracle):
    save_state(state, state_path, config=config, oracle=oracle)


def _outcome_exit(state):
    if state.outcome == camp.OUTCOME_SUCCESS:
        return EXIT_SUCCESS
    if state.outcome == camp.OUTCOME_FAILURE:
        return EXIT_FAILURE_OUTCOME
    return EXIT_MAX_ITERS


def _print_status(state):
    click.echo(f"outcome:          {state.outcome}")
    click.echo(f"iteration:        {state.iteration}")
    click.echo(f"steps completed:  {state.step_count}")
    click.echo(f"kernel components:{state.n_components}")
    click.echo(f"points sampled:   {len(state.samples)}")
    click.echo(f"info-decay count: {state.conv.eig_counter}/{state.conv.eig_patience}")
    click.echo(f"target point:     {np.array2string(state.target_point, precision=4)}")
    ub = state.latest_ub()
    if ub is not None:
        click.echo(f"ub center:        {np.array2string(ub.center, precision=4)}")
        click.echo(f"ub half-widths:   {np.array2string(ub.half_widths, precision=4)}")
    if state.pending is not None:
        click.echo(f"pending batch:    {state.pending.n_rows} points "
                   f"({state.pending.kind})")


@click.group()
def main():
    """Adaptive targeted experiment campaigns."""


@main.command("init")
@click.option("--out", "out_path", default="campaign.json", show_default=True,
              help="Where to write the default config.")
def init_cmd(out_path):
    """Write a default campaign config for the built-in benchmark."""
    cfg = default_config()
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out_path}")


@main.command("run")
@click.option("--config", "config_path", required=True, help="Campaign config JSON.")
@click.option("--state", "state_path", default=None,
              help="State file to create/resume (default: <out>/state.json).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--max-iters", type=int, default=None, help="Override iteration budget.")
@click.option("--out", "out_dir", default="campaign_out", show_default=True,
              help="Directory for state and exports.")
def run_cmd(config_path, state_path, seed, max_iters, out_dir):
    """Run a simulated campaign to convergence or budget exhaustion."""
    config = _load_config(config_path)
    if seed is not None:
        config.seed = seed
    if config.oracle_mode != "simulated":
        _fail(EXIT_USAGE, "run drives simulated campaigns; use propose/ingest "
                          "for interactive mode")
    budget = max_iters if max_iters is not None else config.max_iters
    os.makedirs(out_dir, exist_ok=True)
    if state_path is None:
        state_path = os.path.join(out_dir, "state.json")
    if os.path.exists(state_path):
        config, state, oracle = _load_session(state_path)
        click.echo(f"resuming from {state_path} at iteration {state.iteration}")
    else:
        state, oracle = build_session(config)
    try:
        camp.run(state, oracle, budget)
    finally:
        _save_session(state, state_path, config, oracle)
    if state.history:
        export_history(state, out_dir)
    click.echo(f"outcome: {state.outcome} after {state.iteration} iterations, "
               f"{len(state.samples)} samples")
    sys.exit(_outcome_exit(state))


@main.command("step")
@click.option("--state", "state_path", required=True)
def step_cmd(state_path):
    """Advance a simulated campaign by one iteration."""
    config, state, oracle = _load_session(state_path)
    if state.oracle_mode != "simulated":
        _fail(EXIT_USAGE, "step drives simulated campaigns; use propose/ingest")
    try:
        record = camp.step(state, oracle)
    except CampaignFinishedError as exc:
        _fail(EXIT_USAGE, str(exc))
    _save_session(state, state_path, config, oracle)
    click.echo(f"iteration {record.iteration} ({record.branch}): "
               f"p={record.p_value:.4f} eig={record.eig:.5f} outcome={state.outcome}")


@main.command("propose")
@click.option("--state", "state_path", required=True)
@click.option("--out", "out_dir", default=None,
              help="Also write the pending batch as CSV here.")
def propose_cmd(state_path, out_dir):
    """Interactive mode: compute and print the next batch to measure."""
    config, state, oracle = _load_session(state_path)
    try:
        pending = camp.propose(state)
    except CampaignFinishedError as exc:
        _fail(EXIT_USAGE, str(exc))
    _save_session(state, state_path, config, oracle)
    points = pending.all_points()
    click.echo(f"pending batch ({pending.kind}), one row per point:")
    for row in points:
        click.echo("  " + ", ".join(repr(float(v)) for v in row))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "pending_batch.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{i}" for i in range(points.shape[1])])
            for row in points:
                writer.writerow([repr(float(v)) for v in row])
        click.echo(f"wrote {path}")


@main.command("ingest")
@click.option("--state", "state_path", required=True)
@click.option("--observations", "obs_path", required=True,
              help="CSV: one row per pending point, one column per design value.")
def ingest_cmd(state_path, obs_path):
    """Interactive mode: feed measured design values into the campaign."""
    config, state, oracle = _load_session(state_path)
    try:
        with open(obs_path, "r", encoding="utf-8") as fh:
            rows = []
            for row in csv.reader(fh):
                if not row or not row[0].strip():
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    continue  # header line
        observations = np.asarray(rows, dtype=float)
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"observations file not found: {obs_path}")
    try:
        record = camp.ingest(state, observations)
    except (NoPendingBatchError, CampaignFinishedError) as exc:
        _fail(EXIT_USAGE, str(exc))
    except TadkitError as exc:
        _fail(EXIT_CONFIG, str(exc))
    _save_session(state, state_path, config, oracle)
    if record is None:
        click.echo("initial batch recorded")
    else:
        click.echo(f"iteration {record.iteration} ({record.branch}): "
                   f"p={record.p_value:.4f} outcome={state.outcome}")


@main.command("status")
@click.option("--state", "state_path", required=True)
def status_cmd(state_path):
    """Print a campaign summary."""
    _, state, _ = _load_session(state_path)
    _print_status(state)


@main.command("export")
@click.option("--state", "state_path", required=True)
@click.option("--out", "out_dir", default="campaign_out", show_default=True)
def export_cmd(state_path, out_dir):
    """Write history.csv and samples.csv for a campaign."""
    _, state, _ = _load_session(state_path)
    if not state.history:
        _fail(EXIT_USAGE, "campaign has no completed iterations to export")
    history_path, samples_path = export_history(state, out_dir)
    click.echo(f"wrote {history_path} and {samples_path}")


@main.command("new")
@click.option("--config", "config_path", required=True)
@click.option("--state", "state_path", required=True)
@click.option("--seed", type=int, default=None)
def new_cmd(config_path, state_path, seed):
    """Initialize a campaign state file without running any iterations."""
    config = _load_config(config_path)
    if seed is not None:
        config.seed = seed
    state, oracle = build_session(config)
    _save_session(state, state_path, config, oracle)
    click.echo(f"initialized {state_path} (mode: {state.oracle_mode})")


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--state", "state_path", default=None,
              help="Preload one campaign from a state file.")
def serve_cmd(port, host, state_path):
    """Start the HTTP service (and dashboard backend)."""
    import uvicorn

    from .service import CampaignRegistry, create_app

    registry = CampaignRegistry()
    if state_path is not None:
        config, state, oracle = _load_session(state_path)
        session = registry.add(config, state, oracle)
        click.echo(f"preloaded campaign {session.id} from {state_path}")
    app = create_app(registry)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
