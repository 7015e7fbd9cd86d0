"""Command-line entry point for batch runs."""
import logging
from typing import Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import config
from .cli.runner import run
from .cli.spec import load_run_spec
from .errors import InvalidRunSpec
from .problems import get_problem, list_forcings, list_problems


def setup_logging(level: str = config.LOG_LEVEL) -> None:
    """Route the package logger to stderr through rich, or silence it."""
    if level not in config.LOG_LEVELS:
        raise ValueError(f"LIPIMPL_LOG must be one of {', '.join(config.LOG_LEVELS)}, got '{level}'")
    logger = logging.getLogger("lipimpl")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    if level == "off":
        logger.addHandler(logging.NullHandler())
        logger.setLevel(logging.CRITICAL + 1)
        logger.propagate = False
        return
    logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    logger.setLevel(logging.DEBUG if level == "debug" else logging.INFO)
    logger.propagate = False


def _problem_table() -> Table:
    table = Table(title="Registered Problems")
    table.add_column("Name", style="cyan", no_wrap=True)
    table.add_column("Kind", style="magenta")
    table.add_column("Description", style="white")
    for name in list_problems():
        problem = get_problem(name)
        table.add_row(name, problem.kind, problem.description)
    return table


@click.command()
@click.option('--spec', '-s', 'spec_path', type=click.Path(exists=True, dir_okay=False), help='JSON run file')
@click.option('--out', '-o', type=click.Path(file_okay=False), default='results', help='Output directory')
@click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default=None, help='Overrides output.format')
@click.option('--workers', type=click.IntRange(min=1), default=None, help='Sweep points run concurrently')
@click.option('--seed', type=int, default=None, help='Overrides the run seed')
@click.option('--list-problems', 'show_problems', is_flag=True, help='List registered problems and forcings')
def main(spec_path: Optional[str] = None, out: str = 'results', fmt: Optional[str] = None,
         workers: Optional[int] = None, seed: Optional[int] = None, show_problems: bool = False):
    """Run a batch of solver, perturbation or oscillator computations.

    Exit status is 0 when every certificate holds, 1 when one fails,
    2 for an invalid run file and 3 for a numerical breakdown.

    Examples:
        \b
        # Solve the cubic built-in and write CSV results
        lipimpl --spec runs/cubic.json --out results/cubic

        # Same run as JSON, with four sweep points at a time
        lipimpl --spec runs/cubic.json --format json --workers 4
    """
    try:
        setup_logging()
    except ValueError as e:
        raise click.UsageError(str(e))
    console = Console()

    if show_problems:
        console.print(_problem_table())
        console.print(f"\nForcings: {', '.join(list_forcings())}")
        return
    if not spec_path:
        raise click.UsageError("Missing option '--spec'")

    try:
        spec = load_run_spec(spec_path)
        console.print(f"[bold cyan]Running[/bold cyan] {spec.command} from {spec_path}")
        summary = run(spec, out, fmt=fmt, workers=workers, seed=seed)
    except InvalidRunSpec as e:
        console.print(f"[bold red]Invalid run file:[/bold red] {escape(str(e))}")
        raise SystemExit(2)

    table = Table(title="Results")
    table.add_column("Point", style="cyan", no_wrap=True)
    table.add_column("Status")
    table.add_column("Failed", style="red")
    table.add_column("Detail", style="white")
    for point in summary.points:
        style = "green" if point.status == "passed" else "red"
        table.add_row(
            str(point.index),
            f"[{style}]{point.status}[/{style}]",
            ", ".join(point.failed),
            escape(point.message or point.file or ""),
        )
    console.print(table)
    for point in summary.points:
        for notice in point.notices:
            console.print(f"[yellow]Notice:[/yellow] {escape(notice)}")
    raise SystemExit(summary.exit_code)


if __name__ == '__main__':
    main()
