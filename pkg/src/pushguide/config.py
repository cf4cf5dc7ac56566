"""Validated run configuration built from the flat ``key = value [unit]`` format.

Keys whose name ends in a unit (``beam.power_mW``) take bare numbers in that
unit; an explicit unit tag of the same dimension is converted. Every unknown
key, missing required key, unit mismatch or invariant violation raises
ConfigError with the offending line number.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import __version__
from .beam import make_beam
from .document import ConfigDocument, Entry, parse_document, parse_line
from .errors import ConfigError
from .species import DEFAULT_T0, Geometry, load_species
from .transport import ModelOptions
from .units import G_EARTH, TWO_PI, dimension, from_si, to_si

NUMBER = "number"
INTEGER = "integer"
TEXT = "text"

# key -> (kind, default unit or None, default value in that unit or None)
SCHEMA = {
    "species.name": (TEXT, None, None),
    "species.label": (TEXT, None, None),
    "species.gamma": ("angular_frequency", None, None),
    "species.wavelength": ("length", None, None),
    "species.mass": ("mass", None, None),
    "species.delta_hfs_ground": ("angular_frequency", None, None),
    "species.delta_hfs_excited": ("angular_frequency", None, None),
    "species.f_lower": (INTEGER, None, None),
    "beam.power_mW": ("power", "mW", None),
    "beam.detuning_GHz": ("angular_frequency", "GHz", None),
    "beam.waist_um": ("length", "um", None),
    "beam.focus_cm": ("length", "cm", None),
    "beam.rayleigh_mm": ("length", "mm", None),
    "beam.polarization_factor": (NUMBER, None, 2.0 / 3.0),
    "beam.transverse_average_factor": (NUMBER, None, 0.5),
    "geometry.separation_mm": ("length", "mm", None),
    "geometry.mot2_radius_mm": ("length", "mm", 4.0),
    "geometry.mot1_radius_mm": ("length", "mm", 10.0),
    "geometry.gravity_mps2": ("acceleration", "m/s2", G_EARTH),
    "model.T0_uK": ("temperature", "uK", None),
    "model.bracket": (TEXT, None, "exact"),
    "model.f_exponent": (NUMBER, None, 10.0),
    "model.grid_points": (INTEGER, None, 2000),
    "mc.n_atoms": (INTEGER, None, 10000),
    "mc.seed": (INTEGER, None, 20240601),
    "mc.time_step_us": ("time", "us", None),
    "mc.initial_radius_um": ("length", "um", None),
    "mc.initial_temperature_uK": ("temperature", "uK", None),
    "mc.record_points": (INTEGER, None, 37),
    "mc.rate_model": (TEXT, None, "averaged"),
    "mc.block_size": (INTEGER, None, 1000),
    "sweep.axis1": (TEXT, None, None),
    "sweep.axis2": (TEXT, None, None),
    "sweep.axis3": (TEXT, None, None),
    "sweep.objective": (TEXT, None, "refined_score"),
    "optimize.free": (TEXT, None, None),
    "optimize.objective": (TEXT, None, "refined_score"),
    "optimize.max_evals": (INTEGER, None, 500),
    "optimize.tolerance": (NUMBER, None, 1e-4),
    "rates.L1": ("rate", "atoms/s", None),
    "rates.tau": ("time", "s", None),
    "rates.gamma": ("rate", "1/s", None),
    "rates.N1_push": (NUMBER, None, None),
    "rates.L2": ("rate", "atoms/s", None),
    "rates.push_loss": ("rate", "1/s", 0.0),
    "rates.beta": ("volume_rate", "cm3/s", 0.0),
    "rates.density": ("density", "atoms/cm3", 0.0),
}
# optimize.bounds.<parameter key> = lo hi
BOUNDS_PREFIX = "optimize.bounds."

PHYSICS_REQUIRED = (
    "species.name",
    "beam.power_mW",
    "beam.detuning_GHz",
    "beam.waist_um",
    "beam.focus_cm",
    "geometry.separation_mm",
)
RATES_REQUIRED = ("rates.L1", "rates.N1_push")
SUBCOMMANDS = ("simulate", "sweep", "optimize", "mc", "rates", "figures")

BUNDLED = ("cs_paper.cfg", "rb_paper.cfg")


def _fraction(text, entry):
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{entry.key}: expected a number, got {text!r}", entry.line) from None


def value_of(entry: Entry):
    """Decode an entry to SI (numbers) or text according to the schema."""
    kind, unit, _ = SCHEMA[entry.key]
    if kind == TEXT:
        return entry.value
    if kind == INTEGER:
        x = _fraction(entry.value, entry)
        if x != int(x):
            raise ConfigError(f"{entry.key}: expected an integer, got {entry.value!r}", entry.line)
        return int(x)
    x = _fraction(entry.value, entry)
    if kind == NUMBER:
        if entry.unit is not None:
            raise ConfigError(f"{entry.key} is dimensionless, got unit {entry.unit}", entry.line)
        return x
    src = entry.unit or unit
    if src is None:
        raise ConfigError(f"{entry.key}: unit tag required", entry.line)
    if dimension(src) != kind:
        raise ConfigError(f"{entry.key}: unit {src} is not a {kind.replace('_', ' ')}", entry.line)
    return to_si(x, src)


def _check_keys(doc):
    for entry in doc:
        if entry.key in SCHEMA:
            continue
        if entry.key.startswith(BOUNDS_PREFIX) and entry.key[len(BOUNDS_PREFIX):] in SCHEMA:
            continue
        raise ConfigError(f"unknown key {entry.key!r}", entry.line)


@dataclass(frozen=True)
class RunConfig:
    document: ConfigDocument
    species: object = None
    beam: object = None
    geometry: object = None
    T0: float | None = None
    options: ModelOptions = field(default_factory=ModelOptions)
    rates: dict = field(default_factory=dict)

    def get(self, key, default=None):
        """SI value of ``key`` (explicit or schema default)."""
        entry = self.document.get(key)
        if entry is not None:
            return value_of(entry)
        kind, unit, dflt = SCHEMA[key]
        if dflt is None:
            return default
        if kind in (TEXT, NUMBER, INTEGER):
            return dflt
        return to_si(dflt, unit)

    @property
    def has_physics(self):
        return self.beam is not None

    def with_overrides(self, overrides):
        return build_config(apply_overrides(self.document, overrides))

    def with_values(self, values):
        """Copy with ``{config key: number in the key's unit}`` substituted."""
        doc = ConfigDocument(self.document)
        for key, value in values.items():
            doc.set(Entry(key, repr(float(value)), None, None))
        return build_config(doc)

    @property
    def sweep(self):
        from .sweep import sweep_spec_from_config

        return sweep_spec_from_config(self)

    @property
    def optimize(self):
        from .sweep import optimize_spec_from_config

        return optimize_spec_from_config(self)

    @property
    def mc(self):
        from .monte_carlo import mc_config_from_config

        return mc_config_from_config(self)

    def effective(self):
        """Every effective parameter as ``(key, display string)``, defaults included."""
        rows = [("tool.version", __version__)]
        sp = self.species
        if sp is not None:
            rows += [
                ("species.name", sp.name),
                ("species.gamma", f"{_g(sp.gamma / TWO_PI / 1e6)} MHz"),
                ("species.wavelength", f"{_g(sp.wavelength * 1e9)} nm"),
                ("species.mass", f"{_g(from_si(sp.mass, 'amu'))} amu"),
                ("species.delta_hfs_ground", f"{_g(sp.delta_hfs_ground / TWO_PI / 1e9)} GHz"),
                ("species.delta_hfs_excited", f"{_g(sp.delta_hfs_excited / TWO_PI / 1e6)} MHz"),
                ("species.f_lower", str(sp.f_lower)),
            ]
        if self.beam is not None:
            b = self.beam
            rows += [
                ("beam.power_mW", _g(b.power * 1e3)),
                ("beam.detuning_GHz", _g(b.detuning / TWO_PI / 1e9)),
                ("beam.waist_um", _g(b.waist_min * 1e6)),
                ("beam.focus_cm", _g(b.focus_position * 1e2)),
                ("beam.rayleigh_mm", _g(b.rayleigh_length * 1e3)),
                ("beam.polarization_factor", _g(b.polarization_factor)),
                ("beam.transverse_average_factor", _g(b.transverse_average_factor)),
            ]
            g = self.geometry
            rows += [
                ("geometry.separation_mm", _g(g.trap_separation * 1e3)),
                ("geometry.mot2_radius_mm", _g(g.mot2_radius * 1e3)),
                ("geometry.mot1_radius_mm", _g(g.mot1_radius * 1e3)),
                ("geometry.gravity_mps2", _g(g.gravity)),
                ("model.T0_uK", _g(self.T0 * 1e6)),
                ("model.bracket", "exact" if self.options.exact_bracket else "shortcut"),
                ("model.f_exponent", _g(self.options.f_exponent)),
                ("model.grid_points", str(self.options.grid_points)),
            ]
        shown = {k for k, _ in rows}
        for entry in self.document:
            if entry.key not in shown:
                rows.append((entry.key, entry.value + (f" {entry.unit}" if entry.unit else "")))
        return rows


def _g(x):
    return format(float(x), ".15g")


def apply_overrides(doc, overrides):
    """Return a copy of ``doc`` with ``key=value [unit]`` overrides applied."""
    out = ConfigDocument(doc)
    for text in overrides or ():
        entry = parse_line(text.replace("=", " = ", 1) if "=" in text else text)
        if entry is None:
            continue
        out.set(Entry(entry.key, entry.value, entry.unit, None))
    return out


def _missing(doc, keys):
    return [k for k in keys if k not in doc]


def build_config(doc, subcommand=None):
    """Validate a parsed document into a RunConfig."""
    _check_keys(doc)
    only_rates = len(doc) > 0 and all(e.key.startswith("rates.") for e in doc)
    needs_physics = subcommand not in (None, "rates") or (subcommand is None and not only_rates)
    if subcommand == "rates" or only_rates:
        missing = _missing(doc, RATES_REQUIRED)
        if not ("rates.tau" in doc or "rates.gamma" in doc):
            missing.append("rates.tau | rates.gamma")
        if subcommand == "rates" and missing:
            raise ConfigError("missing required keys: " + ", ".join(missing))
    if needs_physics:
        missing = _missing(doc, PHYSICS_REQUIRED)
        if missing:
            raise ConfigError("missing required keys: " + ", ".join(missing))
    for entry in doc:
        if not entry.key.startswith(BOUNDS_PREFIX):  # bounds are checked by the optimize spec
            value_of(entry)  # type/unit check every key up front

    cfg = RunConfig(document=doc)
    rates = {k[len("rates."):]: cfg.get(k) for k in SCHEMA if k.startswith("rates.") and cfg.get(k) is not None}
    if not needs_physics:
        return RunConfig(document=doc, rates=rates)

    species = load_species(doc)
    get = cfg.get

    def line(key):
        e = doc.get(key)
        return None if e is None else e.line

    try:
        beam = make_beam(
            power=get("beam.power_mW"),
            detuning=get("beam.detuning_GHz"),
            waist_min=get("beam.waist_um"),
            focus_position=get("beam.focus_cm"),
            wavelength=species.wavelength,
            rayleigh_length=get("beam.rayleigh_mm"),
            polarization_factor=get("beam.polarization_factor"),
            transverse_average_factor=get("beam.transverse_average_factor"),
        )
    except ConfigError as exc:
        raise ConfigError(str(exc), line("beam.rayleigh_mm") or line("beam.power_mW")) from None
    if beam.detuning >= 0:
        raise ConfigError("beam.detuning_GHz must be negative (red detuning)", line("beam.detuning_GHz"))
    geometry = Geometry(
        trap_separation=get("geometry.separation_mm"),
        mot2_radius=get("geometry.mot2_radius_mm"),
        mot1_radius=get("geometry.mot1_radius_mm"),
        gravity=get("geometry.gravity_mps2"),
    )
    T0 = get("model.T0_uK")
    if T0 is None:
        if species.name not in DEFAULT_T0:
            raise ConfigError("model.T0_uK is required for a custom species")
        T0 = DEFAULT_T0[species.name]
    if T0 < 0:
        raise ConfigError("model.T0_uK must be >= 0", line("model.T0_uK"))
    bracket = get("model.bracket")
    if bracket not in ("exact", "shortcut"):
        raise ConfigError("model.bracket must be 'exact' or 'shortcut'", line("model.bracket"))
    try:
        options = ModelOptions(
            exact_bracket=bracket == "exact",
            f_exponent=get("model.f_exponent"),
            grid_points=get("model.grid_points"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(doc, species, beam, geometry, T0, options, rates)


def parse_config(text, subcommand=None, overrides=None):
    doc = apply_overrides(parse_document(text), overrides)
    if len(doc) == 0:
        raise ConfigError("empty configuration; required keys: " + ", ".join(PHYSICS_REQUIRED))
    return build_config(doc, subcommand)


def bundled_text(name):
    return resources.files("pushguide.data").joinpath(name).read_text()


def load_config(path=None, subcommand=None, overrides=None):
    """Read a config file (or a bundled config by name) and validate it."""
    if path is None:
        text = ""
    else:
        p = Path(path)
        if p.exists():
            text = p.read_text()
        elif Path(path).name in BUNDLED or f"{path}.cfg" in BUNDLED:
            name = Path(path).name if Path(path).name in BUNDLED else f"{path}.cfg"
            text = bundled_text(name)
        else:
            raise ConfigError(f"config file {path} not found")
    if not text.strip() and overrides:
        return build_config(apply_overrides(ConfigDocument(), overrides), subcommand)
    return parse_config(text, subcommand, overrides)

