"""Steady-state MOT bookkeeping linking MOT1 loading, extracted flux and MOT2 loading."""

import warnings
from dataclasses import dataclass

from .errors import ModelValidityError


@dataclass(frozen=True)
class MotRateParams:
    loading_rate: float
    background_loss: float
    push_loss: float = 0.0
    two_body_rate: float = 0.0  # cm^3/s
    density: float = 0.0  # atoms/cm^3

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def steady_state_number(p):
    """N = L / (gamma + gamma_p + beta n)."""
    loss = p.background_loss + p.push_loss + p.two_body_rate * p.density
    if loss <= 0:
        raise ModelValidityError("total MOT loss rate is zero; no steady state")
    return p.loading_rate / loss


def outgoing_flux(loading_rate, background_loss, n_pushed):
    """Flux leaking out of MOT1 through the guide, L1 - gamma N1^p.

    Negative values (measurement noise) are clamped to zero with a warning.
    """
    for value in (loading_rate, background_loss, n_pushed):
        if value < 0:
            raise ValueError("rate inputs must be >= 0")
    flux = loading_rate - background_loss * n_pushed
    if flux < 0:
        warnings.warn(f"outgoing flux {flux:.3g} atoms/s is negative; clamped to 0", stacklevel=2)
        return 0.0
    return flux


def transfer_efficiency(mot2_loading_rate, flux_out):
    if flux_out <= 0:
        raise ModelValidityError("outgoing flux must be positive to define a transfer efficiency")
    eff = mot2_loading_rate / flux_out
    if eff > 1:
        warnings.warn(f"transfer efficiency {eff:.3g} > 1: inconsistent flux data", stacklevel=2)
    return eff
