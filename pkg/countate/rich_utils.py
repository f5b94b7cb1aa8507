"""
Terminal output helpers.

Everything human-readable goes to stderr; stdout is reserved for the JSON summary.

"Beauty is in the eye of the beholder. But colors help." — schema.cx
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from typing import Any

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table
from rich.text import Text

console = Console(stderr=True)

MISSING = "-----"


class Colors:
    """Styles shared by every command."""

    SUCCESS = "green"
    ERROR = "red"
    WARNING = "yellow"
    INFO = "cyan"
    ESTIMATE = "bold blue"
    BORDER = "cyan"


# (style, prefix) per status line kind
_STATUS = {
    "success": (Colors.SUCCESS, "✅"),
    "error": (Colors.ERROR, "❌"),
    "warning": (Colors.WARNING, "⚠️"),
    "info": (Colors.INFO, "ℹ️"),
}


def setup_logging(verbose: bool = False) -> None:
    """Route library logging through a RichHandler on the stderr console."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=verbose, rich_tracebacks=True)],
        force=True,
    )


def _status(kind: str, message: str) -> None:
    style, prefix = _STATUS[kind]
    console.print(Text(f"{prefix} {message}", style=style))


def print_success(message: str) -> None:
    _status("success", message)


def print_error(message: str) -> None:
    _status("error", message)


def print_warning(message: str) -> None:
    _status("warning", message)


def print_info(message: str) -> None:
    _status("info", message)


def print_header(title: str, subtitle: str | None = None) -> None:
    """Boxed command title with an optional dim second line."""
    body = Text(title, style=f"bold {Colors.BORDER}")
    if subtitle:
        body.append("\n" + subtitle, style="dim")
    console.print(Panel(body, border_style=Colors.BORDER, padding=(0, 1)))


def print_key_value(key: str, value: Any, key_width: int = 20) -> None:
    console.print(f"  [dim]{key:<{key_width}}:[/dim] {value}")


def format_estimate(mean: float, sd: float) -> str:
    """Posterior mean ± sd as console markup."""
    return f"[{Colors.ESTIMATE}]{mean:.4f}[/{Colors.ESTIMATE}] ± {sd:.4f}"


def create_summary_table(title: str) -> Table:
    return Table(title=title, header_style=f"bold {Colors.BORDER}", border_style=Colors.BORDER)


def rows_table(title: str, rows: Iterable[Mapping[str, Any]], digits: int = 4) -> Table:
    """Render homogeneous dict rows (report ``to_dict`` output) as a table."""
    table = create_summary_table(title)
    columns: list[str] = []
    for row in rows:
        if not columns:
            columns = list(row)
            for name in columns:
                table.add_column(name, justify="right")
        table.add_row(*(_cell(row[name], digits) for name in columns))
    return table


def _cell(value: Any, digits: int) -> str:
    if value is None:
        return MISSING
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def progress_bar() -> Progress:
    """Spinner + counter progress display on the stderr console."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        console=console,
        transient=True,
    )
