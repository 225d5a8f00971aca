import logging

from django.core.management.base import CommandError

from simulations.exceptions import ConfigurationError, ScenarioConfigError

CONFIG_EXIT_CODE = 2
RUNTIME_EXIT_CODE = 3

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.INFO, 3: logging.DEBUG}


def apply_verbosity(verbosity: int):
    logging.getLogger("simulations").setLevel(VERBOSITY_LEVELS.get(verbosity, logging.DEBUG))


def command_error(exc: Exception) -> CommandError:
    """Map a service failure onto the exit code of its category."""
    if isinstance(exc, ScenarioConfigError):
        message = "invalid scenario:\n" + "\n".join(f"  {error}" for error in exc.errors)
        return CommandError(message, returncode=CONFIG_EXIT_CODE)
    if isinstance(exc, ConfigurationError):
        return CommandError(str(exc), returncode=CONFIG_EXIT_CODE)
    return CommandError(f"{type(exc).__name__}: {exc}", returncode=RUNTIME_EXIT_CODE)
