"""Unit system of the simulator: lengths in nm, times in fs, energies in eV."""
from __future__ import annotations

from dataclasses import dataclass

from scipy import constants

from simulations.exceptions import ConfigurationError

SPEED_OF_LIGHT_NM_PER_FS = constants.c * 1e9 / 1e15
HBAR_EV_FS = constants.hbar / constants.e * 1e15
ELECTRON_REST_ENERGY_EV = constants.physical_constants["electron mass energy equivalent in MeV"][0] * 1e6

KINETIC_PREFACTOR_REFERENCE = 0.0381
KINETIC_PREFACTOR_TOLERANCE = 1e-4


@dataclass(frozen=True)
class UnitSystem:
    """ħ in eV·fs and the free electron mass in eV·fs²/nm²."""

    hbar: float
    electron_rest_mass: float

    def __post_init__(self):
        if self.hbar <= 0 or self.electron_rest_mass <= 0:
            raise ConfigurationError("hbar and electron_rest_mass must be positive")
        gate = self.kinetic_prefactor(1.0)
        if abs(gate - KINETIC_PREFACTOR_REFERENCE) > KINETIC_PREFACTOR_TOLERANCE:
            raise ConfigurationError(
                f"hbar^2/(2 m0) = {gate:.5f} eV nm^2 is inconsistent with "
                f"{KINETIC_PREFACTOR_REFERENCE} eV nm^2"
            )

    def kinetic_prefactor(self, effective_mass: float) -> float:
        """ħ²/(2 m* m₀) in eV·nm² for m* given in units of m₀."""
        if effective_mass <= 0:
            raise ConfigurationError("effective_mass must be positive")
        return self.hbar ** 2 / (2.0 * effective_mass * self.electron_rest_mass)

    def group_velocity(self, k0: float, effective_mass: float) -> float:
        """ħk₀/m* in nm/fs."""
        if effective_mass <= 0:
            raise ConfigurationError("effective_mass must be positive")
        return self.hbar * k0 / (effective_mass * self.electron_rest_mass)

    def to_representation(self) -> dict:
        return {
            "length_unit": "nm",
            "time_unit": "fs",
            "energy_unit": "eV",
            "hbar": self.hbar,
            "electron_rest_mass": self.electron_rest_mass,
        }


DEFAULT_UNITS = UnitSystem(
    hbar=HBAR_EV_FS,
    electron_rest_mass=ELECTRON_REST_ENERGY_EV / SPEED_OF_LIGHT_NM_PER_FS ** 2,
)
