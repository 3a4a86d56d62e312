"""Command-line entry points: sim, serve, replay."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .engine import METRICS_COLUMNS, Engine, InvariantViolation
from .scenario import ScenarioError, load_scenario
from .sm import CorruptLedger, canonical_json, load_ledger, replay

EXIT_SCHEMA = 2
EXIT_INVARIANT = 3
EXIT_CORRUPT_LEDGER = 4


def write_outputs(engine: Engine, out_dir: Path, figures: bool = True) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out_dir / "metrics.csv",
        "ledger": out_dir / "ledger.jsonl",
        "snapshot": out_dir / "snapshot.json",
    }
    with open(paths["metrics"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(engine.metrics_rows)
    with open(paths["ledger"], "w", encoding="utf-8") as fh:
        for line in engine.ledger_lines:
            fh.write(line + "\n")
    with open(paths["snapshot"], "w", encoding="utf-8") as fh:
        fh.write(canonical_json(engine.snapshot()) + "\n")
    if figures:
        from .report import render_figures

        for path in render_figures(engine.metrics_rows, engine.scenario.band, out_dir):
            paths[path.stem] = path
    return paths


@click.group()
def main() -> None:
    """Dynamic spectrum management demonstrator."""


@main.command("sim")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--until", "until_ms", type=int, default=None, help="Stop at this sim time (ms).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, help="Render report figures.")
def sim(scenario_path: str, seed: int | None, until_ms: int | None, out_dir: str, figures: bool) -> None:
    """Run a scenario to completion and write metrics, ledger, and snapshot."""
    try:
        scenario = load_scenario(scenario_path)
    except (ScenarioError, ValueError) as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_SCHEMA)
    if seed is not None:
        scenario.seed = seed
    engine = Engine(scenario)
    try:
        engine.run(until_ms=until_ms)
    except InvariantViolation as exc:
        click.echo(f"invariant violated: {exc}", err=True)
        sys.exit(EXIT_INVARIANT)
    paths = write_outputs(engine, Path(out_dir), figures=figures)
    click.echo(f"simulated {engine.now} ms, {len(engine.ledger_lines)} ledger events")
    for name, path in paths.items():
        click.echo(f"  {name}: {path}")


@main.command("serve")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8080", help="HOST:PORT to bind.")
def serve(scenario_path: str, listen: str) -> None:
    """Run the engine wall-clock paced behind the HTTP/event API."""
    try:
        scenario = load_scenario(scenario_path)
    except (ScenarioError, ValueError) as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_SCHEMA)
    host, _, port = listen.rpartition(":")
    from .server import run_server

    try:
        run_server(scenario, host or "127.0.0.1", int(port))
    except OSError as exc:
        click.echo(f"cannot bind {listen}: {exc}", err=True)
        sys.exit(1)


@main.command("replay")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
def replay_cmd(ledger_path: str) -> None:
    """Rebuild the spectrum-manager state from a ledger file and print it."""
    try:
        events = load_ledger(ledger_path)
        state = replay(events)
    except (CorruptLedger, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"corrupt ledger: {exc}", err=True)
        sys.exit(EXIT_CORRUPT_LEDGER)
    click.echo(canonical_json(state.snapshot()))


if __name__ == "__main__":
    main()
