"""
Rich-markup prefixes for the lines the pipeline commands log.

Every command reports through the same handful of markers so a build, a
training run and an evaluation read alike in the terminal.
"""

__all__ = ["OK", "FAIL", "WARN", "INFO", "STEP"]

#: Finished stage (green ✔).
OK = "[bold green]✔[/bold green]"

#: Fatal error, the command exits nonzero (red ✘).
FAIL = "[bold red]✘[/bold red]"

#: Skipped object, interrupt or degraded result (yellow !).
WARN = "[bold yellow]![/bold yellow]"

#: Run banner and timings (blue *).
INFO = "[bold blue]*[/bold blue]"

#: Checkpoint or other periodic milestone (cyan »).
STEP = "[bold cyan]»[/bold cyan]"
