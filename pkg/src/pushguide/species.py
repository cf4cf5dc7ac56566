"""Atomic species constants, trap geometry and single-atom derived quantities."""

import math
from dataclasses import dataclass

from .document import ConfigDocument, Entry
from .errors import ConfigError
from .units import AMU, C, G_EARTH, HBAR, KB, TWO_PI, dimension, to_si


@dataclass(frozen=True)
class SpeciesParams:
    """D2-line alkali constants, all SI with angular frequencies in rad/s."""

    name: str
    gamma: float
    wavelength: float
    mass: float
    delta_hfs_ground: float
    delta_hfs_excited: float
    f_lower: int

    def __post_init__(self):
        for field in ("gamma", "wavelength", "mass", "delta_hfs_ground"):
            value = getattr(self, field)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"species.{field} must be positive and finite, got {value}")
        if not (self.delta_hfs_excited >= 0 and math.isfinite(self.delta_hfs_excited)):
            raise ConfigError("species.delta_hfs_excited must be non-negative")
        if int(self.f_lower) != self.f_lower or self.f_lower < 1:
            raise ConfigError(f"species.f_lower must be an integer >= 1, got {self.f_lower}")

    @property
    def k(self):
        return TWO_PI / self.wavelength

    @property
    def alpha(self):
        """Ratio of Zeeman-substate counts, (2F+3)/(2F+1)."""
        return (2 * self.f_lower + 3) / (2 * self.f_lower + 1)


@dataclass(frozen=True)
class Geometry:
    trap_separation: float
    mot2_radius: float
    mot1_radius: float = 10e-3
    gravity: float = G_EARTH

    def __post_init__(self):
        if not self.trap_separation > 0:
            raise ConfigError("geometry: trap separation must be positive")
        if not self.mot2_radius > 0:
            raise ConfigError("geometry: MOT2 radius must be positive")
        if not 0 < self.mot1_radius < self.trap_separation:
            raise ConfigError("geometry: MOT1 radius must lie in (0, separation)")


# Wavelengths and masses are standard D2-line reference values (not in the
# source material); linewidths and hyperfine widths are the rounded values
# the transfer model was calibrated with.
CS133 = SpeciesParams(
    name="Cs133",
    gamma=TWO_PI * 5.2e6,
    wavelength=852.34727582e-9,
    mass=132.905451961 * AMU,
    delta_hfs_ground=TWO_PI * 9.2e9,
    delta_hfs_excited=TWO_PI * 600e6,
    f_lower=3,
)

RB87 = SpeciesParams(
    name="Rb87",
    gamma=TWO_PI * 5.9e6,
    wavelength=780.241209686e-9,
    mass=86.909180527 * AMU,
    delta_hfs_ground=TWO_PI * 6.8e9,
    delta_hfs_excited=TWO_PI * 500e6,
    f_lower=1,
)

BUILTIN = {"Cs133": CS133, "Rb87": RB87}

# guide-entrance temperature after extraction from MOT1
DEFAULT_T0 = {"Cs133": 25e-6, "Rb87": 40e-6}


def saturation_intensity(species):
    """I_s = hbar c k^3 (Gamma/2pi) / 6, in W/m^2."""
    return HBAR * C * species.k ** 3 * species.gamma / TWO_PI / 6.0


def recoil_quantities(species):
    """Return (v_rec, T_rec) with T_rec defined by k_B T_rec = M v_rec^2."""
    v_rec = HBAR * species.k / species.mass
    return v_rec, species.mass * v_rec ** 2 / KB


def capture_velocity(species, geometry):
    """Largest speed MOT2 can stop over its beam diameter: sqrt(Gamma R v_rec)."""
    v_rec, _ = recoil_quantities(species)
    return math.sqrt(species.gamma * geometry.mot2_radius * v_rec)


_SPECIES_FIELDS = {
    "gamma": "angular_frequency",
    "wavelength": "length",
    "mass": "mass",
    "delta_hfs_ground": "angular_frequency",
    "delta_hfs_excited": "angular_frequency",
}


def _quantity(entry: Entry, dim):
    if entry.unit is None:
        raise ConfigError(f"{entry.key}: unit tag required (e.g. '{entry.value} {_example_unit(dim)}')", entry.line)
    try:
        got = dimension(entry.unit)
    except ValueError as exc:
        raise ConfigError(str(exc), entry.line) from None
    if got != dim:
        raise ConfigError(f"{entry.key}: unit {entry.unit} is not a {dim.replace('_', ' ')}", entry.line)
    return to_si(entry.number(), entry.unit)


def _example_unit(dim):
    return {"angular_frequency": "MHz", "length": "nm", "mass": "amu"}[dim]


def load_species(config: ConfigDocument):
    """Build a SpeciesParams from the ``species.*`` keys of a config document.

    ``species.name`` selects a built-in (Cs133, Rb87) or ``custom``; individual
    ``species.<field>`` keys override built-in values and are all required for
    a custom species.
    """
    name_entry = config.get("species.name")
    if name_entry is None:
        raise ConfigError("missing required key species.name")
    name = name_entry.value
    if name in BUILTIN:
        fields = dict(vars(BUILTIN[name]))
    elif name == "custom":
        fields = {"name": config.get("species.label").value if "species.label" in config else "custom"}
    else:
        raise ConfigError(f"unknown species {name!r} (known: {', '.join(BUILTIN)}, custom)", name_entry.line)

    for field, dim in _SPECIES_FIELDS.items():
        entry = config.get(f"species.{field}")
        if entry is not None:
            value = _quantity(entry, dim)
            if not value > 0 and not (field == "delta_hfs_excited" and value == 0):
                raise ConfigError(f"{entry.key} must be positive, got {entry.value}", entry.line)
            fields[field] = value
        elif field not in fields:
            raise ConfigError(f"custom species requires species.{field}")
    entry = config.get("species.f_lower")
    if entry is not None:
        f = entry.number()
        if f != int(f) or f < 1:
            raise ConfigError(f"species.f_lower must be an integer >= 1, got {entry.value}", entry.line)
        fields["f_lower"] = int(f)
    elif "f_lower" not in fields:
        raise ConfigError("custom species requires species.f_lower")
    return SpeciesParams(**fields)
