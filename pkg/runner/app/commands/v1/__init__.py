# Subcommand handlers, keyed by CLI name
from .gaussian import COMMANDS as _GAUSSIAN_COMMANDS
from .grid import COMMANDS as _GRID_COMMANDS

COMMANDS = {**_GAUSSIAN_COMMANDS, **_GRID_COMMANDS}
