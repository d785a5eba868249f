"""
CLI application module.
Command-line interface for the mildlab tool.

Exit codes: 0 when everything passes, 1 when hypotheses, convergence or the automorphy
criterion fail, 2 for usage and load errors.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Callable, Iterator, List, Optional

import typer

EXIT_FAILURE = 1
EXIT_USAGE = 2


class OutputFormat(str, Enum):
    """Supported CLI output formats."""

    RICH = "rich"
    PLAIN = "plain"
    JSON = "json"


class PathFormat(str, Enum):
    """File format of simulated path files."""

    CSV = "csv"
    PARQUET = "parquet"


@dataclass
class _AppState:
    """Per-invocation state threaded through Typer's context object."""

    output_format: OutputFormat = OutputFormat.RICH
    verbosity: int = 0


app = typer.Typer(
    name="mildlab",
    help="Numerical lab for mild solutions of Levy-driven integro-differential equations",
    add_completion=False,
)


def _get_state(ctx: typer.Context) -> _AppState:
    return ctx.find_root().obj or _AppState()


def _get_formatter(ctx: typer.Context) -> Any:
    """Lazy load formatter based on output format stored in context state."""
    state = _get_state(ctx)
    if state.output_format == OutputFormat.PLAIN:
        from mildlab.plain_output import PlainOutputFormatter

        return PlainOutputFormatter()
    if state.output_format == OutputFormat.JSON:
        from mildlab.plain_output import JsonOutputFormatter

        return JsonOutputFormatter()
    from mildlab.output import OutputFormatter

    return OutputFormatter()


def _configure_logging(verbosity: int) -> None:
    from rich.logging import RichHandler

    from mildlab.output import err_console

    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logger = logging.getLogger("mildlab")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.addHandler(RichHandler(console=err_console, show_path=False, markup=False))
    logger.setLevel(level)
    logger.propagate = False


def _run_with_error_handling(
    ctx: typer.Context,
    operation: Callable[[Any], None],
    *,
    generic_error_prefix: str,
) -> None:
    """Execute a CLI operation and map failures onto the exit-code contract."""
    from mildlab.errors import ConvergenceError

    formatter = _get_formatter(ctx)
    try:
        operation(formatter)
    except typer.Exit:
        raise
    except ConvergenceError as e:
        formatter.print_error(str(e))
        raise typer.Exit(code=EXIT_FAILURE) from e
    except (FileNotFoundError, ValueError, FileExistsError) as e:
        formatter.print_error(str(e))
        raise typer.Exit(code=EXIT_USAGE) from e
    except Exception as e:
        formatter.print_error(f"{generic_error_prefix}: {e}")
        raise typer.Exit(code=EXIT_FAILURE) from e


@contextmanager
def _progress(
    ctx: typer.Context, description: str
) -> Iterator[Optional[Callable[[int, int], None]]]:
    """Rich progress bar in rich mode; no callback otherwise."""
    if _get_state(ctx).output_format != OutputFormat.RICH:
        yield None
        return

    from rich.progress import (
        BarColumn,
        Progress,
        SpinnerColumn,
        TextColumn,
        TimeRemainingColumn,
    )

    from mildlab.output import console

    with Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TimeRemainingColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"[cyan]{description}...", total=None)

        def update_progress(current: int, total: int) -> None:
            if progress.tasks[task].total is None and total:
                progress.update(task, total=total)
            progress.update(task, completed=current)

        yield update_progress


ScenarioArgument = Annotated[
    str, typer.Argument(help="Scenario file (.toml, .json) or built-in name")
]
DeltaOption = Annotated[
    Optional[float], typer.Option("--delta", help="Override the coefficient amplitude delta")
]
OutOption = Annotated[
    Optional[Path],
    typer.Option("--out", help="Output directory (default: under $MILDLAB_OUTPUT_ROOT)"),
]
PathsOption = Annotated[int, typer.Option("--paths", "-n", help="Number of sample paths")]
T0Option = Annotated[float, typer.Option("--t0", help="Start of the observation window")]
T1Option = Annotated[float, typer.Option("--t1", help="End of the observation window")]
DtOption = Annotated[float, typer.Option("--dt", help="Time step")]
BurnInOption = Annotated[
    float, typer.Option("--burn-in", help="Burn-in length before the window")
]
SeedOption = Annotated[int, typer.Option("--seed", help="Global seed")]
WorkersOption = Annotated[int, typer.Option("--workers", "-w", help="Worker processes")]
TolOption = Annotated[float, typer.Option("--tol", help="Picard tolerance (sup norm)")]
MaxIterOption = Annotated[int, typer.Option("--max-iter", help="Picard iteration cap")]


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: Annotated[bool, typer.Option("--version", help="Show version information")] = False,
    output: Annotated[
        OutputFormat, typer.Option("--output", "-o", help="Output format")
    ] = OutputFormat.RICH,
    verbose: Annotated[
        int, typer.Option("--verbose", "-v", count=True, help="Log more (-vv for debug)")
    ] = 0,
) -> None:
    """Numerical lab for mild solutions of Levy-driven integro-differential equations."""
    state = ctx.ensure_object(_AppState)
    state.output_format = output
    state.verbosity = verbose
    _configure_logging(verbose)

    if version:
        from mildlab import __version__

        typer.echo(f"mildlab-cli version {__version__}")
        raise typer.Exit()

    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())
        raise typer.Exit()


@app.command()
def check(
    ctx: typer.Context,
    scenario: ScenarioArgument,
    delta: DeltaOption = None,
    out: OutOption = None,
    window: Annotated[
        Optional[float], typer.Option("--window", help="Sup window length for the moduli")
    ] = None,
    step: Annotated[
        Optional[float], typer.Option("--step", help="Sup grid step for the moduli")
    ] = None,
) -> None:
    """Check the existence-theorem hypotheses of a scenario."""

    def operation(formatter: Any) -> None:
        from mildlab.hypotheses import report_to_dict, summary_line
        from mildlab.pipeline import resolve_scenario, run_check

        result = run_check(resolve_scenario(scenario, delta), out, step=step, window=window)
        formatter.print_hypothesis_report(
            report_to_dict(result.report), summary_line(result.report), result.report_path
        )
        if not result.report.all_pass:
            raise typer.Exit(code=EXIT_FAILURE)

    _run_with_error_handling(ctx, operation, generic_error_prefix="Failed to check scenario")


@app.command()
def simulate(
    ctx: typer.Context,
    scenario: ScenarioArgument,
    paths: PathsOption = 16,
    t0: T0Option = 0.0,
    t1: T1Option = 10.0,
    dt: DtOption = 0.01,
    burn_in: BurnInOption = 3.0,
    seed: SeedOption = 0,
    out: OutOption = None,
    workers: WorkersOption = 1,
    path_format: Annotated[
        PathFormat, typer.Option("--format", "-f", help="Path file format")
    ] = PathFormat.CSV,
    convergence_check: Annotated[
        bool,
        typer.Option(
            "--convergence-check",
            help="Also record a dt, dt/2, dt/4 self-convergence study in the manifest",
        ),
    ] = False,
    dump_noise: Annotated[
        bool, typer.Option("--dump-noise", help="Also dump the noise sample of path 0")
    ] = False,
    delta: DeltaOption = None,
    tol: TolOption = 1e-6,
    max_iter: MaxIterOption = 50,
) -> None:
    """Solve an ensemble of mild solutions and write path files plus a manifest."""

    def operation(formatter: Any) -> None:
        from mildlab.pipeline import grid_from_options, resolve_scenario, run_simulate

        scn = resolve_scenario(scenario, delta)
        grid = grid_from_options(t0, t1, dt, burn_in)
        with _progress(ctx, f"Solving {paths} path(s)") as callback:
            result = run_simulate(
                scn,
                grid,
                paths,
                seed,
                out=out,
                tol=tol,
                max_iter=max_iter,
                workers=workers,
                suffix=f".{path_format.value}",
                convergence_check=convergence_check,
                dump_noise=dump_noise,
                progress_callback=callback,
            )
        formatter.print_simulation_result(result.manifest, result.directory)

    _run_with_error_handling(ctx, operation, generic_error_prefix="Failed to simulate")


@app.command()
def automorphy(
    ctx: typer.Context,
    scenario: Annotated[
        Optional[str],
        typer.Argument(help="Scenario file or built-in name (omit when using --ensemble)"),
    ] = None,
    ensemble: Annotated[
        Optional[List[Path]],
        typer.Option(
            "--ensemble",
            "-e",
            help=(
                "Simulated ensemble directory; first is the base, then at least two shifted"
                " ones (the worst recurring one is the control)"
            ),
        ),
    ] = None,
    paths: PathsOption = 64,
    t0: T0Option = 0.0,
    t1: T1Option = 10.0,
    dt: DtOption = 0.01,
    burn_in: BurnInOption = 3.0,
    seed: SeedOption = 0,
    horizon: Annotated[
        float, typer.Option("--horizon", help="Search horizon for recurrence shifts")
    ] = 200.0,
    shifts: Annotated[int, typer.Option("--shifts", help="Number of recurrence shifts")] = 3,
    t_samples: Annotated[
        int, typer.Option("--t-samples", help="Number of sampled window times")
    ] = 20,
    projection: Annotated[
        int, typer.Option("--projection", "-m", help="Leading modes kept for beta")
    ] = 8,
    pass_fraction: Annotated[
        float,
        typer.Option("--pass-fraction", help="Win fraction over the control needed to pass"),
    ] = 0.5,
    svg: Annotated[bool, typer.Option("--svg", help="Also write an SVG chart")] = False,
    out: OutOption = None,
    workers: WorkersOption = 1,
    delta: DeltaOption = None,
    tol: TolOption = 1e-6,
    max_iter: MaxIterOption = 50,
) -> None:
    """Estimate almost automorphy in distribution along recurrence shifts."""

    def operation(formatter: Any) -> None:
        from mildlab.errors import InvalidArgumentError
        from mildlab.pipeline import (
            grid_from_options,
            resolve_scenario,
            run_automorphy,
            run_automorphy_from_ensembles,
            shift_summary,
        )

        if (scenario is None) == (not ensemble):
            raise InvalidArgumentError("give either a scenario or --ensemble directories")
        if ensemble:
            result = run_automorphy_from_ensembles(
                ensemble,
                t_samples=t_samples,
                m=projection,
                pass_fraction=pass_fraction,
                out=out,
                svg=svg,
            )
        else:
            scn = resolve_scenario(scenario, delta)
            grid = grid_from_options(t0, t1, dt, burn_in)
            with _progress(ctx, "Solving base, shifted and control ensembles") as callback:
                result = run_automorphy(
                    scn,
                    grid,
                    paths,
                    seed,
                    horizon=horizon,
                    count=shifts,
                    t_samples=t_samples,
                    m=projection,
                    pass_fraction=pass_fraction,
                    out=out,
                    tol=tol,
                    max_iter=max_iter,
                    workers=workers,
                    svg=svg,
                    progress_callback=callback,
                )
        formatter.print_automorphy_report(
            result.report.summary(), shift_summary(result.report), result.directory
        )
        if not result.report.passed:
            raise typer.Exit(code=EXIT_FAILURE)

    _run_with_error_handling(ctx, operation, generic_error_prefix="Failed to compute automorphy")


@app.command()
def report(
    ctx: typer.Context,
    directory: Annotated[Path, typer.Argument(help="Run directory containing manifest.json")],
) -> None:
    """Render a run directory written by check, simulate or automorphy."""

    def operation(formatter: Any) -> None:
        from mildlab.pipeline import load_run, run_passed

        run = load_run(directory)
        formatter.print_run(run)
        if not run_passed(run):
            raise typer.Exit(code=EXIT_FAILURE)

    _run_with_error_handling(ctx, operation, generic_error_prefix="Failed to read run")


if __name__ == "__main__":
    app()
