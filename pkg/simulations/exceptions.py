from __future__ import annotations

from typing import List


class SimulationError(ValueError):
    """Base class for every failure raised by the simulation services."""


class ConfigurationError(SimulationError):
    """Invalid grid, packet, potential, time or collision parameters."""


class ScenarioConfigError(ConfigurationError):
    """A scenario document failed validation; ``errors`` holds every message."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        summary = "; ".join(self.errors) if self.errors else "invalid scenario"
        super().__init__(summary)


class ShapeError(SimulationError):
    """Fields sampled on different or incompatible grids."""


class DegenerateInputError(SimulationError):
    """Input that cannot be normalised, e.g. an exactly cancelling superposition."""


class InvalidPreconditionError(SimulationError):
    """An operation was asked to act on a state that does not satisfy its precondition."""


class StepSizeError(SimulationError):
    """A rate step would overdraw a weight in a single step."""


class SafetyAssertionError(SimulationError):
    """Post-collision charge density went negative at the scattering time."""

    def __init__(self, message: str, *, min_density: float, position: float):
        self.min_density = min_density
        self.position = position
        super().__init__(message)


class OutputError(SimulationError):
    """A run output could not be written, read back or verified."""


class RunDirectoryBusyError(OutputError):
    """Another run holds the output directory."""
