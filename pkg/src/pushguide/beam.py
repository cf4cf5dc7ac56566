"""Diverging Gaussian pushing-guiding beam along the vertical axis.

z points downwards with its origin at the MOT1 centre; the focus sits at
``focus_position`` (negative when above MOT1).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelValidityWarning
from .species import saturation_intensity

RAYLEIGH_TOLERANCE = 5.0


@dataclass(frozen=True)
class BeamParams:
    power: float
    detuning: float
    waist_min: float
    focus_position: float
    rayleigh_length: float
    polarization_factor: float = 2.0 / 3.0
    transverse_average_factor: float = 0.5

    def __post_init__(self):
        if not self.power >= 0:
            raise ConfigError("beam power must be >= 0")
        if not self.waist_min > 0:
            raise ConfigError("beam waist must be > 0")
        if not self.rayleigh_length > 0:
            raise ConfigError("Rayleigh length must be > 0")
        if not self.polarization_factor > 0 or not self.transverse_average_factor > 0:
            raise ConfigError("beam correction factors must be > 0")
        if not all(math.isfinite(v) for v in (self.detuning, self.focus_position)):
            raise ConfigError("beam detuning and focus position must be finite")

    def replace(self, **changes):
        fields = dict(vars(self))
        fields.update(changes)
        return BeamParams(**fields)


def ideal_rayleigh_length(waist_min, wavelength):
    return math.pi * waist_min ** 2 / wavelength


def make_beam(power, detuning, waist_min, focus_position, wavelength, rayleigh_length=None, **factors):
    """Build a BeamParams, deriving z_R = pi w0^2 / lambda when it is not given.

    A supplied z_R (measured beams are not perfectly Gaussian) is accepted
    within a factor 5 of the ideal value, with a warning if it differs by more
    than 10 %.
    """
    ideal = ideal_rayleigh_length(waist_min, wavelength)
    if rayleigh_length is None:
        rayleigh_length = ideal
    else:
        ratio = rayleigh_length / ideal
        if not 1 / RAYLEIGH_TOLERANCE <= ratio <= RAYLEIGH_TOLERANCE:
            raise ConfigError(
                f"Rayleigh length {rayleigh_length * 1e3:.4g} mm inconsistent with "
                f"pi w0^2/lambda = {ideal * 1e3:.4g} mm"
            )
        if abs(ratio - 1) > 0.1:
            warnings.warn(
                f"Rayleigh length {rayleigh_length * 1e3:.4g} mm differs from the ideal "
                f"Gaussian value {ideal * 1e3:.4g} mm",
                ModelValidityWarning,
                stacklevel=2,
            )
    return BeamParams(power, detuning, waist_min, focus_position, rayleigh_length, **factors)


def waist_at(beam, z):
    """1/e^2 intensity radius at height z."""
    u = (np.asarray(z, dtype=float) - beam.focus_position) / beam.rayleigh_length
    return beam.waist_min * np.sqrt(1.0 + u * u)


def waist_sq_ratio(beam, z):
    """w0^2 / w(z)^2, i.e. intensity relative to the focus."""
    u = (np.asarray(z, dtype=float) - beam.focus_position) / beam.rayleigh_length
    return 1.0 / (1.0 + u * u)


def peak_intensity(beam, z):
    """On-axis intensity 2 P0 / (pi w(z)^2)."""
    return 2.0 * beam.power / (math.pi * beam.waist_min ** 2) * waist_sq_ratio(beam, z)


def saturation_parameter(beam, species, detuning_used, z):
    """polarization_factor * (I/I_s) / (1 + 4 detuning^2 / Gamma^2).

    The caller picks the detuning: delta-bar for the upper ground state,
    delta-bar - Delta_HFS for the lower one, or delta in the two-level picture.
    """
    lorentz = 1.0 + 4.0 * detuning_used ** 2 / species.gamma ** 2
    return beam.polarization_factor * peak_intensity(beam, z) / saturation_intensity(species) / lorentz
