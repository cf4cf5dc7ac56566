"""Physical constants and lab-unit <-> SI conversion.

Frequencies given in Hz/kHz/MHz/GHz are cyclic (they describe delta/2pi);
internally every linewidth and detuning is an angular frequency in rad/s.
"""

import math

# CODATA 2018, 10 significant figures
HBAR = 1.054571817e-34  # J s
KB = 1.380649000e-23  # J/K
C = 299792458.0  # m/s
AMU = 1.660539067e-27  # kg
G_EARTH = 9.81  # m/s^2, fixed so regression values do not drift

TWO_PI = 2.0 * math.pi

# unit -> (dimension, factor to SI)
UNITS = {
    "rad/s": ("angular_frequency", 1.0),
    "Hz": ("angular_frequency", TWO_PI),
    "kHz": ("angular_frequency", TWO_PI * 1e3),
    "MHz": ("angular_frequency", TWO_PI * 1e6),
    "GHz": ("angular_frequency", TWO_PI * 1e9),
    "W": ("power", 1.0),
    "mW": ("power", 1e-3),
    "uW": ("power", 1e-6),
    "µW": ("power", 1e-6),
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "µm": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "K": ("temperature", 1.0),
    "mK": ("temperature", 1e-3),
    "uK": ("temperature", 1e-6),
    "µK": ("temperature", 1e-6),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "µs": ("time", 1e-6),
    "kg": ("mass", 1.0),
    "amu": ("mass", AMU),
    "u": ("mass", AMU),
    "1/s": ("rate", 1.0),
    "atoms/s": ("rate", 1.0),
    "m/s": ("velocity", 1.0),
    "mm/s": ("velocity", 1e-3),
    "m/s2": ("acceleration", 1.0),
    "m/s^2": ("acceleration", 1.0),
    "cm3/s": ("volume_rate", 1e-6),
    "m3/s": ("volume_rate", 1.0),
    "atoms/cm3": ("density", 1e6),
    "1/cm3": ("density", 1e6),
    "1/m3": ("density", 1.0),
    "W/m2": ("intensity", 1.0),
    "mW/cm2": ("intensity", 10.0),
}


def dimension(unit):
    try:
        return UNITS[unit][0]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}") from None


def to_si(value, unit):
    """Convert ``value`` expressed in ``unit`` to coherent SI (rad/s for frequencies)."""
    return value * UNITS[unit][1] if unit in UNITS else _unknown(unit)


def from_si(value, unit):
    return value / UNITS[unit][1] if unit in UNITS else _unknown(unit)


def convert(value, src, dst):
    if dimension(src) != dimension(dst):
        raise ValueError(f"cannot convert {src} to {dst}")
    return from_si(to_si(value, src), dst)


def _unknown(unit):
    raise ValueError(f"unknown unit {unit!r}")
