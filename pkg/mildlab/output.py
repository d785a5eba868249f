"""
Output formatting module.
Rich rendering of hypothesis reports, simulation manifests and automorphy reports.
"""

import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Tuple

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

console = Console()
err_console = Console(stderr=True)


def _console_encoding() -> str:
    stream = getattr(console, "file", None)
    encoding = getattr(stream, "encoding", None) or getattr(console, "encoding", None)
    return encoding or sys.stdout.encoding or "utf-8"


def _safe_text(text: str, fallback: str) -> str:
    """Prefer richer labels when encodable, otherwise use ASCII-safe fallbacks."""
    try:
        text.encode(_console_encoding())
        return text
    except UnicodeEncodeError:
        return fallback


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(item) for item in value)
    return str(value)


def _panel(lines: Iterable[Tuple[str, Any]], title: str, ok: bool = True) -> Panel:
    color = "green" if ok else "red"
    content = [
        f"[cyan]{key}:[/cyan] [yellow]{_format_value(value)}[/yellow]" for key, value in lines
    ]
    return Panel(
        "\n".join(content),
        title=f"[bold {color}]{title}[/bold {color}]",
        border_style=color,
        box=box.ROUNDED,
    )


class OutputFormatter:
    """Formatter for the Rich console."""

    @staticmethod
    def print_error(message: str) -> None:
        err_console.print(
            f"[bold red]{_safe_text(chr(0x274C) + ' Error:', 'Error:')}[/bold red] {message}"
        )

    @staticmethod
    def print_hypothesis_report(report: Dict[str, Any], summary: str, path: Path) -> None:
        passed = bool(report["all_pass"])
        title = _safe_text(chr(0x1F4D0) + " Hypotheses", "Hypotheses")
        console.print(
            _panel(
                [
                    ("scenario", f"{report['scenario']} ({report['scenario_hash']})"),
                    ("delta", report["delta"]),
                    ("K / omega", f"{report['K']:.6g} / {report['omega']:.6g}"),
                    ("theta", report["theta"]),
                    ("b", report["b"]),
                    ("radius interval", report["radius_interval"]),
                    ("vartheta", report["vartheta"]),
                    ("report", path),
                ],
                title,
                ok=passed,
            )
        )

        table = Table(box=box.ROUNDED, show_header=True, header_style="bold magenta")
        table.add_column("Condition", style="cyan", no_wrap=True)
        table.add_column("Result")
        for name, ok in report["passes"].items():
            table.add_row(name, "[green]pass[/green]" if ok else "[red]fail[/red]")
        constants = Table(box=box.ROUNDED, show_header=True, header_style="bold magenta")
        constants.add_column("Constant", style="cyan", no_wrap=True)
        constants.add_column("Value", style="yellow", justify="right")
        for name in ("L_g", "L_f", "L_h", "L_F", "L_G"):
            constants.add_row(name, _format_value(report[name]))
        console.print(table)
        console.print(constants)
        console.print(summary)

    @staticmethod
    def print_simulation_result(manifest: Dict[str, Any], directory: Path) -> None:
        grid = manifest["grid"]
        timings = manifest.get("timings", {})
        lines = [
            ("scenario", f"{manifest['scenario']} ({manifest['scenario_hash']})"),
            ("paths", manifest["n_paths"]),
            ("seed", manifest["seed"]),
            ("window", f"[{grid['t_start']}, {grid['t_end']}] dt={grid['dt']}"),
            ("burn-in", grid["burn_in"]),
            ("max iterations", max(manifest["iterations"])),
            ("vartheta", manifest.get("vartheta")),
            ("output", directory),
            ("time elapsed", f"{timings.get('solve_seconds', 0.0):.2f}s"),
        ]
        study = manifest.get("self_convergence")
        if study is not None:
            lines.append(("convergence ratios", study["ratios"]))
            lines.append(("first order", study["first_order"]))
        title = _safe_text(chr(0x2705) + " Simulation Complete", "Simulation Complete")
        console.print(_panel(lines, title))

    @staticmethod
    def print_automorphy_report(
        summary: Dict[str, Any], rows: Iterable[Dict[str, Any]], directory: Path
    ) -> None:
        passed = bool(summary["passed"])
        title = _safe_text(chr(0x1F501) + " Automorphy", "Automorphy")
        console.print(
            _panel(
                [
                    ("scenario", f"{summary['scenario']} ({summary['scenario_hash']})"),
                    ("paths", summary["n_paths"]),
                    ("projection", summary["projection_dim"]),
                    ("best tau", summary["best_tau"]),
                    ("control tau", summary["control_tau"]),
                    ("win fraction", summary["win_fraction"]),
                    ("rank correlation", summary["rank_correlation"]),
                    ("passed", passed),
                    ("output", directory),
                ],
                title,
                ok=passed,
            )
        )
        table = Table(
            title="[bold blue]beta by shift[/bold blue]",
            box=box.ROUNDED,
            show_header=True,
            header_style="bold magenta",
        )
        for column in ("role", "tau", "epsilon", "mean beta", "max beta"):
            table.add_column(column, style="cyan" if column == "role" else None)
        for row in rows:
            table.add_row(
                row["role"],
                _format_value(row["tau"]),
                _format_value(row["epsilon"]),
                _format_value(row["mean_beta"]),
                _format_value(row["max_beta"]),
            )
        console.print(table)

    @staticmethod
    def print_run(run: Dict[str, Any]) -> None:
        manifest = run["manifest"]
        lines = list(run["details"].items())
        lines += [
            ("kind", manifest["kind"]),
            ("scenario hash", manifest["scenario_hash"]),
            ("versions", ", ".join(f"{k} {v}" for k, v in manifest["versions"].items())),
            ("directory", run["directory"]),
        ]
        title = _safe_text(chr(0x1F4C4) + " Run " + manifest["kind"], "Run " + manifest["kind"])
        console.print(_panel(lines, title))
