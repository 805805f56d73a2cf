"""Command handlers, one module per subcommand."""

from vphnav.routes.run import cmd_run
from vphnav.routes.batch import cmd_batch
from vphnav.routes.plot import cmd_plot

__all__ = [
    "cmd_run",
    "cmd_batch",
    "cmd_plot",
]
