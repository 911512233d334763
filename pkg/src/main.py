#!/usr/bin/env python3
"""
ruinsim - Main CLI Entry Point

Commands:
  - run: Validate an experiment, estimate and write report.csv, summary.txt, meta.json
  - validate: Assembly checks only, no simulation
  - asymptotic: Asymptotic values only
  - status: Settings and bundled experiments
  - version: Version information
"""

import logging
from pathlib import Path

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

app = typer.Typer(
    name="ruinsim",
    help="ruinsim - rare-event simulation and asymptotic validation for discounted multivariate risk models",
    add_completion=False
)

console = Console()

# Exit code for configs or models rejected before any simulation
VALIDATION_EXIT_CODE = 2


def setup_logging(verbose: bool):
    """Route library logging through rich"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=verbose, show_path=verbose)],
        force=True,
    )


def _load(config_path: Path):
    from runner.experiment import load_experiment

    return load_experiment(config_path)


def _print_problems(title: str, problems):
    console.print(f"\n[red]{title}:[/red]")
    for problem in problems:
        console.print(f"  [red]✗[/red] {problem}")


@app.command()
def run(
    config_path: Path = typer.Argument(..., help="Experiment config (.json)"),
    workers: int = typer.Option(None, "--workers", "-w", help="Worker processes (default: from the config)"),
    out: Path = typer.Option(None, "--out", "-o", help="Output directory (default: output/<experiment name>)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")
):
    """
    Run an experiment and write its reports

    Steps:
      - Schema and cross-field validation of the config
      - Assembly checks (moment window, estimator preconditions, optional factorial moment check)
      - Asymptotic values on the x-grid, truncation count for an infinite horizon
      - Every requested estimator at every x

    RUINSIM_SEED overrides the config seed.

    Examples:
      ruinsim run config/experiments/cor31_validation.json
      ruinsim run config/experiments/thm32_validation.json --workers 4 --out output/thm32
    """
    from core.errors import AssumptionError, ConfigError, EstimatorPreconditionError, RuinsimError
    from core.settings import get_settings
    from runner.pipeline import run_experiment
    from runner.reporting import ratio_table

    setup_logging(verbose)

    try:
        config = _load(config_path)
    except ConfigError as e:
        console.print(f"\n[red]Error in experiment config:[/red] {e}")
        _print_problems("Problems", e.problems)
        raise typer.Exit(code=VALIDATION_EXIT_CODE)

    out_dir = out or Path(get_settings()['output']['base_directory']) / config.name
    console.print(Panel.fit(
        "[bold cyan]Experiment Run[/bold cyan]\n"
        f"Name: {config.name}\n"
        f"Estimators: {', '.join(config.estimators)} | x-grid: {', '.join(f'{x:g}' for x in config.x_grid)}\n"
        f"[dim]{config.n_paths:,} paths per estimate | output: {out_dir}[/dim]",
        border_style="cyan"
    ))

    try:
        with console.status("[cyan]Running...[/cyan]") as status:
            result = run_experiment(
                config, out_dir, workers=workers,
                progress=lambda message: status.update(f"[cyan]{message}...[/cyan]")
            )
    except (AssumptionError, EstimatorPreconditionError) as e:
        console.print(f"\n[red]Experiment rejected:[/red] {e}")
        raise typer.Exit(code=VALIDATION_EXIT_CODE)
    except RuinsimError as e:
        console.print(f"\n[red]Error running experiment:[/red] {e}")
        raise typer.Exit(code=1)

    console.print()
    console.print(ratio_table(result.rows))
    if result.truncation_count is not None:
        console.print(f"\n[cyan]Truncation:[/cyan] M = {result.truncation_count}, "
                      f"remainder bound {result.remainder_bound:.3g}")
    if result.flags:
        console.print("\n[yellow]Flags:[/yellow]")
        for flag in result.flags:
            console.print(f"  [yellow]![/yellow] {flag}")

    console.print(f"\n[green]✓ Reports written to:[/green] {out_dir}")
    for name, path in result.paths.items():
        console.print(f"  - {name}: {path}")


@app.command()
def validate(
    config_path: Path = typer.Argument(..., help="Experiment config (.json)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")
):
    """
    Validate an experiment without simulating

    Runs the schema, the cross-field rules and every assembly check, including
    the factorial moment check when the config requests it.

    Exit code 0 when every check passes, 2 otherwise.

    Examples:
      ruinsim validate config/experiments/thm32_validation.json
    """
    from core.errors import ConfigError
    from runner.checks import validate_experiment

    setup_logging(verbose)

    try:
        config = _load(config_path)
    except ConfigError as e:
        console.print(f"\n[red]Error in experiment config:[/red] {e}")
        _print_problems("Problems", e.problems)
        raise typer.Exit(code=VALIDATION_EXIT_CODE)

    console.print(Panel.fit(
        "[bold magenta]Experiment Validation[/bold magenta]\n"
        f"Name: {config.name}\n"
        f"Claims: {config.claims.radial.kind} | Arrivals: {config.arrivals.kind} | "
        f"T: {'inf' if config.is_infinite else f'{config.T:g}'} | r: {config.r:g}",
        border_style="magenta"
    ))

    with console.status("[magenta]Checking assumptions...[/magenta]"):
        report = validate_experiment(config)

    for note in report.notes:
        console.print(f"  [green]✓[/green] {note}")

    if not report.ok:
        _print_problems("Validation failed", report.problems + report.estimator_problems)
        raise typer.Exit(code=VALIDATION_EXIT_CODE)

    console.print("\n[bold green]✓ All checks passed[/bold green]")


@app.command()
def asymptotic(
    config_path: Path = typer.Argument(..., help="Experiment config (.json)"),
    out: Path = typer.Option(None, "--out", "-o", help="Also write asymptotic.csv to this directory"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")
):
    """
    Evaluate the asymptotic values on the x-grid (no simulation)

    Examples:
      ruinsim asymptotic config/experiments/cor31_validation.json
      ruinsim asymptotic config/experiments/thm32_validation.json --out output/thm32
    """
    from core.errors import AssumptionError, ConfigError, EstimatorPreconditionError, RuinsimError
    from runner.pipeline import run_asymptotic
    from runner.reporting import asymptotic_table

    setup_logging(verbose)

    try:
        config = _load(config_path)
        with console.status("[blue]Integrating...[/blue]"):
            rows = run_asymptotic(config, out_dir=out)
    except ConfigError as e:
        console.print(f"\n[red]Error in experiment config:[/red] {e}")
        _print_problems("Problems", e.problems)
        raise typer.Exit(code=VALIDATION_EXIT_CODE)
    except (AssumptionError, EstimatorPreconditionError) as e:
        console.print(f"\n[red]Experiment rejected:[/red] {e}")
        raise typer.Exit(code=VALIDATION_EXIT_CODE)
    except RuinsimError as e:
        console.print(f"\n[red]Error evaluating asymptotic values:[/red] {e}")
        raise typer.Exit(code=1)

    console.print()
    console.print(asymptotic_table(rows))
    if out:
        console.print(f"\n[green]✓ Saved to:[/green] {out}")


@app.command()
def status():
    """Show settings and bundled experiments"""
    from core.settings import DEFAULT_CONFIG_PATH, PROJECT_ROOT, get_settings

    console.print(Panel.fit(
        "[bold cyan]ruinsim - Status[/bold cyan]",
        border_style="cyan"
    ))

    try:
        settings = get_settings()

        if DEFAULT_CONFIG_PATH.exists():
            console.print("\n[green]✓[/green] Settings loaded from config/config.yaml")
        else:
            console.print("\n[yellow]⧖[/yellow] config/config.yaml not found, using built-in defaults")
        console.print(f"  - Batch size: {settings['simulation']['batch_size']} "
                      f"(surplus: {settings['simulation']['surplus_batch_size']})")
        console.print(f"  - Mean-measure cache: {settings['mean_measure']['nodes']} nodes, "
                      f"{settings['mean_measure']['paths']} paths")
        console.print(f"  - Minimum hits before flagging: {settings['estimators']['min_hits']}")
        console.print(f"  - Output directory: {settings['output']['base_directory']}")

        experiments = sorted((PROJECT_ROOT / "config" / "experiments").glob("*.json"))
        table = Table(title="Bundled experiments")
        table.add_column("file", style="cyan")
        table.add_column("status")
        for path in experiments:
            try:
                _load(path)
                table.add_row(path.name, "[green]valid[/green]")
            except Exception as e:
                table.add_row(path.name, f"[red]{e}[/red]")
        console.print()
        console.print(table)

    except Exception as e:
        console.print(f"\n[red]Error loading settings:[/red] {e}")


@app.command()
def version():
    """Show version information"""
    from core import __version__, __author__
    console.print(f"\n[cyan]ruinsim[/cyan] v{__version__}")
    console.print(f"Author: {__author__}\n")


if __name__ == "__main__":
    app()
