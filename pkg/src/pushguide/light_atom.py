"""Scattering rate, light shifts, hyperfine optical pumping and the pushing force."""

import warnings
from dataclasses import dataclass

import numpy as np

from .beam import saturation_parameter, waist_at, waist_sq_ratio
from .errors import ModelValidityError, ModelValidityWarning
from .units import HBAR, KB, TWO_PI

S_VALIDITY_LIMIT = 0.1
ETA_VALIDITY_LIMIT = 0.2
# below this |delta-bar| the single mean-detuning picture of the excited
# hyperfine manifold stops being trustworthy
MEAN_DETUNING_LIMIT = TWO_PI * 0.5e9


@dataclass(frozen=True)
class PumpingState:
    eta: float
    alpha: float
    effective_detuning: float

    @property
    def valid(self):
        return self.eta <= ETA_VALIDITY_LIMIT

    def bracket(self, exact=True):
        """Population-weighted pushing factor.

        The exact form (1-eta) + eta ((d-D)/d)^2 reduces identically to
        1 - eta + alpha once eta follows the stationary ratio; the shortcut
        drops eta against 1.
        """
        return 1.0 - self.eta + self.alpha if exact else 1.0 + self.alpha


def scattering_rate(s, species):
    """Gamma' = (Gamma/2) s / (1 + s)."""
    s = np.asarray(s, dtype=float)
    return species.gamma / 2.0 * s / (1.0 + s)


def lower_detuning(pumping, species):
    return pumping.effective_detuning - species.delta_hfs_ground


def two_level_light_shift(beam, species, z):
    """(hbar delta / 2) s at the cycling-transition detuning; ln(1+s) -> s."""
    s = saturation_parameter(beam, species, beam.detuning, z)
    if np.any(s > S_VALIDITY_LIMIT):
        warnings.warn(f"saturation parameter {np.max(s):.3g} exceeds {S_VALIDITY_LIMIT}", ModelValidityWarning, stacklevel=2)
    return HBAR * beam.detuning / 2.0 * s


def effective_detuning(beam, species, warn=True):
    """Mean detuning over the excited hyperfine manifold, delta + Delta'_HFS / 2."""
    d = beam.detuning + species.delta_hfs_excited / 2.0
    if warn and abs(d) < MEAN_DETUNING_LIMIT:
        warnings.warn(
            f"effective detuning {d / TWO_PI / 1e9:.3g} GHz: mean-detuning approximation unreliable",
            ModelValidityWarning,
            stacklevel=2,
        )
    return d


def upper_state_fraction(species, effective):
    """Stationary upper-ground-state fraction eta = alpha (d / (d - Delta_HFS))^2."""
    denom = effective - species.delta_hfs_ground
    if denom == 0:
        raise ModelValidityError("effective detuning resonant with the lower ground state")
    alpha = species.alpha
    return PumpingState(eta=alpha * (effective / denom) ** 2, alpha=alpha, effective_detuning=effective)


def pumping_state(beam, species, warn=True):
    return upper_state_fraction(species, effective_detuning(beam, species, warn))


def lower_saturation(beam, species, pumping, z):
    return saturation_parameter(beam, species, lower_detuning(pumping, species), z)


def pushing_force(beam, species, pumping, z, exact=True):
    """Mean longitudinal radiation-pressure force on the beam axis (N)."""
    s_bar = lower_saturation(beam, species, pumping, z)
    return beam.transverse_average_factor * species.gamma / 2.0 * HBAR * species.k * s_bar * pumping.bracket(exact)


def pushing_potential(beam, species, pumping, z, exact=True):
    """Potential whose negative gradient is ``pushing_force``.

    U(z) = -chi (Gamma/2) hbar k s0 z_R B arctan((z - z0)/z_R), with s0 the
    lower-state saturation at the focus and no additive offset.
    """
    s0 = lower_saturation(beam, species, pumping, beam.focus_position)
    pref = beam.transverse_average_factor * species.gamma / 2.0 * HBAR * species.k * s0 * pumping.bracket(exact)
    zr = beam.rayleigh_length
    return -pref * zr * np.arctan((np.asarray(z, dtype=float) - beam.focus_position) / zr)


def guide_depth(beam, species, pumping, z):
    """On-axis lower-ground-state light shift (J); negative for red detuning."""
    d = lower_detuning(pumping, species)
    return HBAR * d / 2.0 * saturation_parameter(beam, species, d, z)


def transverse_frequency(beam, species, pumping, z):
    """Harmonic frequency of the Gaussian guide, sqrt(4 |U0| / (M w^2))."""
    if beam.power == 0:
        raise ModelValidityError("no guide: beam power is zero")
    depth = np.abs(guide_depth(beam, species, pumping, z))
    return np.sqrt(4.0 * depth / (species.mass * waist_at(beam, z) ** 2))


def transverse_frequency_ratio(beam, z):
    """omega_p(z) / omega_p(0) = w(0)^2 / w(z)^2."""
    return waist_sq_ratio(beam, z) / waist_sq_ratio(beam, 0.0)


def guided_radius(beam, species, pumping, z, temperature):
    """rms transverse size sqrt(k_B T / M) / omega_p of a guided thermal cloud."""
    return np.sqrt(KB * np.asarray(temperature) / species.mass) / transverse_frequency(beam, species, pumping, z)

