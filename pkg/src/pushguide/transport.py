"""Longitudinal and transverse dynamics of the atomic beam between the two traps.

The full model chains: entrance velocity out of the MOT1 region, the
energy-conservation velocity profile inside the diverging beam, the
adiabatic-cooling-plus-recoil-heating temperature of the guided atoms, the
point where the guide stops confining them, and the ballistic expansion down
to MOT2. ``simulate`` runs the whole chain for one parameter set.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .beam import saturation_parameter, waist_at, waist_sq_ratio
from .errors import ModelValidityError, NumericalError
from .light_atom import (
    ETA_VALIDITY_LIMIT,
    MEAN_DETUNING_LIMIT,
    S_VALIDITY_LIMIT,
    guide_depth,
    lower_saturation,
    pumping_state,
    scattering_rate,
    transverse_frequency,
)
from .species import capture_velocity, recoil_quantities, saturation_intensity
from .units import HBAR, KB

# Gauss-Legendre nodes per grid segment for the time-of-flight integral
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
SQRT8 = math.sqrt(8.0)


@dataclass(frozen=True)
class ModelOptions:
    exact_bracket: bool = True
    f_exponent: float = 10.0
    grid_points: int = 2000
    heating: bool = True

    def __post_init__(self):
        if self.grid_points < 10:
            raise ValueError("grid_points must be >= 10")
        if not self.f_exponent > 0:
            raise ValueError("f_exponent must be > 0")


def condition_score(x, exponent=10.0):
    """Smooth step f(x) = 1 / (1 + x^n): 1 when a condition holds, 0 when badly violated."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + x ** exponent)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- velocity


def entrance_velocity(beam, species, geometry, pumping=None):
    """Speed at the edge of the MOT1 region, starting from rest.

    Inside MOT1 the repumper keeps every atom in the upper ground state, so
    the push uses the saturation at the effective detuning. The closed form is
    the exact integral of the arctan-shaped potential over [0, mot1_radius].
    """
    if pumping is None:
        pumping = pumping_state(beam, species, warn=False)
    v_rec, _ = recoil_quantities(species)
    z0, zr = beam.focus_position, beam.rayleigh_length
    r1 = geometry.mot1_radius
    s_up = saturation_parameter(beam, species, pumping.effective_detuning, z0)
    push = species.gamma * v_rec * beam.transverse_average_factor * s_up * zr
    v_sq = 2.0 * geometry.gravity * r1 + push * (math.atan((r1 - z0) / zr) + math.atan(z0 / zr))
    return math.sqrt(max(v_sq, 0.0))


class VelocityProfile:
    """v(z) from energy conservation in gravity plus the pushing potential."""

    def __init__(self, beam, species, pumping, geometry, v0, exact_bracket=True):
        if v0 < 0:
            raise ValueError("entrance velocity must be >= 0")
        self.beam = beam
        self.geometry = geometry
        self.v0 = float(v0)
        v_rec, _ = recoil_quantities(species)
        s0 = float(lower_saturation(beam, species, pumping, beam.focus_position))
        self.s0 = s0
        self._push = (
            species.gamma * v_rec * s0 * beam.rayleigh_length
            * pumping.bracket(exact_bracket) * beam.transverse_average_factor
        )

    @property
    def length(self):
        return self.geometry.trap_separation

    def v_squared(self, z):
        z = np.asarray(z, dtype=float)
        z0, zr = self.beam.focus_position, self.beam.rayleigh_length
        arc = np.arctan((z - z0) / zr) + math.atan(z0 / zr)
        return self.v0 ** 2 + 2.0 * self.geometry.gravity * z + self._push * arc

    def __call__(self, z):
        return np.sqrt(np.maximum(self.v_squared(z), 0.0))


class ConstantVelocity:
    """Uniform motion; handy as a stand-in profile."""

    def __init__(self, v, length):
        self.v0 = float(v)
        self.length = float(length)

    def v_squared(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.v0 ** 2)

    def __call__(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.v0)


def _check_positive(profile, z):
    v2 = profile.v_squared(z)
    if np.any(v2[np.asarray(z) > 0] <= 0):
        raise NumericalError("velocity vanishes or turns back inside the transfer region")


def travel_time(profile, length=None, rtol=1e-8):
    """Adaptive quadrature of dz / v over [0, length].

    Integrated in u = sqrt(z) so that a zero entrance velocity (v ~ sqrt(z))
    leaves a smooth integrand.
    """
    length = profile.length if length is None else length
    _check_positive(profile, np.linspace(0.0, length, 257))

    def integrand(u):
        v = float(profile(u * u))
        if v <= 0:
            if u == 0:
                return 0.0 if profile.v0 > 0 else _small_u_limit(profile)
            raise NumericalError(f"non-positive velocity at z = {u * u:.4g} m")
        return 2.0 * u / v

    value, err = quad(integrand, 0.0, math.sqrt(length), epsabs=0.0, epsrel=rtol, limit=200)
    if not math.isfinite(value):
        raise NumericalError("travel-time integral did not converge")
    return value


def _small_u_limit(profile):
    u = 1e-9
    return 2.0 * u / float(profile(u * u))


class TimeOfFlight:
    """Cumulative time t(z) = integral_0^z dz'/v on a cached grid.

    Each grid segment is integrated with 8-point Gauss-Legendre in sqrt(z);
    queries between nodes integrate the partial segment the same way, so no
    interpolation error enters t(z).
    """

    def __init__(self, profile, grid_points=2000):
        length = profile.length
        self.profile = profile
        self.z = np.linspace(0.0, length, grid_points)
        _check_positive(profile, self.z)
        seg = self._segment(self.z[:-1], self.z[1:])
        self.t = np.concatenate([[0.0], np.cumsum(seg)])

    def _segment(self, a, b):
        ua, ub = np.sqrt(a), np.sqrt(b)
        half = 0.5 * (ub - ua)
        mid = 0.5 * (ub + ua)
        u = mid[..., None] + half[..., None] * _GL_X
        v = self.profile(u * u)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(v > 0, 2.0 * u / v, 0.0)
        return half * (g @ _GL_W)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, 0.0, self.z[-1])
        i = np.clip(np.searchsorted(self.z, zc, side="right") - 1, 0, len(self.z) - 1)
        out = self.t[i] + self._segment(self.z[i], zc)
        return float(out) if out.ndim == 0 else out

    @property
    def total(self):
        return float(self.t[-1])


# ------------------------------------------------------------- temperature


class HorizontalTemperature:
    """Transverse kinetic temperature of the guided atoms.

    T_h(z) = (w(0)/w(z))^2 [T0 + (T_rec/6)(Gamma/2) s_bar(0) t(z)]: adiabatic
    cooling as the beam widens plus T_rec/6 per lower-state scattering event.
    """

    def __init__(self, beam, species, pumping, tof, T0, heating=True):
        if not T0 >= 0:
            raise ValueError("initial temperature must be >= 0")
        self.beam = beam
        self.tof = tof
        self.T0 = float(T0)
        _, t_rec = recoil_quantities(species)
        s_entry = float(lower_saturation(beam, species, pumping, 0.0))
        self.heating_rate = t_rec / 6.0 * species.gamma / 2.0 * s_entry if heating else 0.0

    def compression(self, z):
        return waist_sq_ratio(self.beam, z) / waist_sq_ratio(self.beam, 0.0)

    def __call__(self, z):
        return self.compression(z) * (self.T0 + self.heating_rate * self.tof(z))

    def integrate_ode(self, z_eval, rtol=1e-12):
        """Direct solution of dT/dz = -2T w'/w + heating (w(0)/w)^2 / v, as a cross-check.

        Integrated in u = sqrt(z) to keep the right-hand side finite for v0 = 0.
        """
        z_eval = np.asarray(z_eval, dtype=float)
        z0, zr = self.beam.focus_position, self.beam.rayleigh_length
        profile = self.tof.profile
        rate = self.heating_rate

        def rhs(u, y):
            z = u * u
            dz = z - z0
            dlnw2 = 2.0 * dz / (zr * zr + dz * dz)
            v = float(profile(z))
            src = rate * float(self.compression(z)) * (2.0 * u / v if v > 0 else 0.0)
            return [-y[0] * dlnw2 * 2.0 * u + src]

        u_eval = np.sqrt(z_eval)
        sol = solve_ivp(rhs, (0.0, u_eval[-1]), [self.T0], method="DOP853", t_eval=u_eval, rtol=rtol, atol=1e-30)
        if not sol.success:
            raise NumericalError(f"temperature ODE failed: {sol.message}")
        return sol.y[0]


# ---------------------------------------------------------------- guide exit


@dataclass(frozen=True)
class GuideExit:
    z_out: float | None
    never_guided: bool = False
    reentry: bool = False


def guide_exit(temperature, depth, z_grid, xtol=1e-9):
    """First height where 2 k_B T_h(z) reaches |U0(z)|.

    ``temperature`` and ``depth`` are callables of z; ``depth`` returns |U0|
    in joules. Returns z_out = None when the atoms stay guided down to the end
    of ``z_grid``.
    """
    h = 2.0 * KB * np.asarray(temperature(z_grid)) - np.asarray(depth(z_grid))
    if h[0] >= 0:
        return GuideExit(0.0, never_guided=True)
    above = np.nonzero(h >= 0)[0]
    if above.size == 0:
        return GuideExit(None)
    i = above[0]

    def fn(z):
        return 2.0 * KB * float(temperature(z)) - float(depth(z))

    z_out = brentq(fn, z_grid[i - 1], z_grid[i], xtol=xtol, rtol=4 * np.finfo(float).eps)
    return GuideExit(z_out, reentry=bool(np.any(h[i:] < 0)))


# -------------------------------------------------------------- cloud radius


class CloudRadius:
    """rms transverse radius: thermal size in the guide, then free expansion.

    While guided Delta_r = sqrt(k_B T_h / M) / omega_p, equal to w/sqrt(8) at
    the exit; afterwards the temperature is frozen and the cloud expands for
    the remaining time of flight.
    """

    def __init__(self, beam, species, pumping, temperature, tof, exit_info):
        self.beam = beam
        self.species = species
        self.pumping = pumping
        self.temperature = temperature
        self.tof = tof
        self.exit = exit_info
        z_out = exit_info.z_out
        if z_out is None:
            self.delta_r_out = None
            self.t_out = None
            self.T_out = None
        else:
            self.T_out = float(temperature(z_out))
            self.t_out = float(tof(z_out))
            # at a genuine crossing sqrt(kT/M)/omega_p equals w/sqrt(8) exactly;
            # an unguided start is assigned the same boundary size
            self.delta_r_out = float(waist_at(beam, z_out)) / SQRT8

    def guided(self, z):
        return np.sqrt(KB * self.temperature(z) / self.species.mass) / transverse_frequency(
            self.beam, self.species, self.pumping, z
        )

    def ballistic(self, z):
        dt = self.tof(z) - self.t_out
        return np.sqrt(self.delta_r_out ** 2 + KB * self.T_out / self.species.mass * dt ** 2)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        z_out = self.exit.z_out
        if z_out is None:
            out = self.guided(z)
        elif self.exit.never_guided:
            out = self.ballistic(z)
        else:
            inside = z <= z_out
            out = np.empty_like(z)
            if np.any(inside):
                out[inside] = self.guided(z[inside]) if z.ndim else self.guided(z)
            if np.any(~inside):
                out[~inside] = self.ballistic(z[~inside]) if z.ndim else self.ballistic(z)
        return float(out) if np.ndim(out) == 0 else out


def adiabaticity(beam, omega, v, z):
    """|d omega_p / dt| / omega_p^2 along the trajectory."""
    dz = np.asarray(z) - beam.focus_position
    dlnw2 = 2.0 * np.abs(dz) / (beam.rayleigh_length ** 2 + dz * dz)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(omega > 0, v * dlnw2 / omega, np.inf)


# -------------------------------------------------------------- efficiencies


@dataclass(frozen=True)
class TwoLevelResult:
    velocity: float
    temperature: float
    depth: float
    travel_time: float
    score: float
    saturation: float


def two_level_model(beam, species, geometry, T0=0.0, exponent=10.0):
    """Constant-waist two-level estimate ignoring gravity, divergence and pumping.

    Waist frozen at its MOT1 value, the cycling-transition detuning drives
    both push and guide, v(z) = sqrt(2 Gamma' v_rec z) and each scattered
    photon adds T_rec/6 to the transverse temperature on top of T0.
    """
    v_rec, t_rec = recoil_quantities(species)
    w1 = float(waist_at(beam, 0.0))
    intensity = 2.0 * beam.power / (math.pi * w1 ** 2)
    lorentz = 1.0 + 4.0 * beam.detuning ** 2 / species.gamma ** 2
    s = beam.polarization_factor * intensity / saturation_intensity(species) / lorentz
    depth = abs(0.5 * HBAR * beam.detuning * s)
    rate = float(scattering_rate(s, species))
    length = geometry.trap_separation
    v = math.sqrt(2.0 * rate * v_rec * length)
    temp = T0 + v / v_rec * t_rec / 6.0
    t = math.sqrt(2.0 * length / (rate * v_rec)) if rate > 0 else math.inf
    trap = 2.0 * KB * temp / depth if depth > 0 else math.inf
    score = condition_score(trap, exponent) * condition_score(v / capture_velocity(species, geometry), exponent)
    return TwoLevelResult(v, temp, depth, t, float(score), s)


def two_level_efficiency(beam, species, geometry, T0=0.0, exponent=10.0):
    return two_level_model(beam, species, geometry, T0, exponent).score


@dataclass(frozen=True)
class TransportState:
    z: float
    v: float
    T_h: float
    delta_r: float
    guided: bool


@dataclass(frozen=True)
class TransportProfile:
    z: np.ndarray
    v: np.ndarray
    T_h: np.ndarray
    depth: np.ndarray
    delta_r: np.ndarray
    guided: np.ndarray
    z_out: float | None
    travel_time: float

    @property
    def samples(self):
        return [
            TransportState(float(z), float(v), float(t), float(r), bool(g))
            for z, v, t, r, g in zip(self.z, self.v, self.T_h, self.delta_r, self.guided)
        ]

    @property
    def arrival(self):
        return TransportState(float(self.z[-1]), float(self.v[-1]), float(self.T_h[-1]),
                              float(self.delta_r[-1]), bool(self.guided[-1]))


@dataclass(frozen=True)
class EfficiencyReport:
    v0: float
    v_arrival: float
    travel_time: float
    z_out: float | None
    delta_r_out: float | None
    delta_r_arrival: float
    T_h_out: float | None
    fall_time: float | None
    eta: float
    effective_detuning: float
    v_capture: float
    adiabaticity_max: float
    two_level_score: float
    refined_score: float
    validity_flags: tuple = field(default_factory=tuple)

    def to_dict(self):
        def scaled(x, k):
            return None if x is None else x * k

        return {
            "v0": self.v0,
            "v_arrival": self.v_arrival,
            "travel_time_ms": self.travel_time * 1e3,
            "z_out_cm": scaled(self.z_out, 1e2),
            "delta_r_out_um": scaled(self.delta_r_out, 1e6),
            "delta_r_arrival_mm": self.delta_r_arrival * 1e3,
            "Th_out_uK": scaled(self.T_h_out, 1e6),
            "fall_time_ms": scaled(self.fall_time, 1e3),
            "eta_percent": self.eta * 100.0,
            "delta_bar_GHz": self.effective_detuning / (2 * math.pi) / 1e9,
            "v_capture": self.v_capture,
            "adiabaticity_max": self.adiabaticity_max,
            "two_level_score": self.two_level_score,
            "refined_score": self.refined_score,
            "validity_flags": list(self.validity_flags),
        }


@dataclass(frozen=True)
class Simulation:
    """Everything built for one parameter set."""

    beam: object
    species: object
    geometry: object
    pumping: object
    velocity: VelocityProfile
    tof: TimeOfFlight
    temperature: HorizontalTemperature
    exit: GuideExit
    radius: CloudRadius
    profile: TransportProfile
    report: EfficiencyReport


def simulate(beam, species, geometry, T0, options=ModelOptions()):
    """Run the refined model for one parameter set."""
    flags = []
    pumping = pumping_state(beam, species, warn=False)
    if abs(pumping.effective_detuning) < MEAN_DETUNING_LIMIT:
        flags.append("mean_detuning_invalid")
    if pumping.eta > ETA_VALIDITY_LIMIT:
        flags.append("eta_out_of_range")
    length = geometry.trap_separation
    z_peak = min(max(beam.focus_position, 0.0), length)
    s_peak = float(lower_saturation(beam, species, pumping, z_peak))
    if s_peak > S_VALIDITY_LIMIT:
        raise ModelValidityError(f"lower-state saturation {s_peak:.3g} exceeds {S_VALIDITY_LIMIT}")

    v0 = entrance_velocity(beam, species, geometry, pumping)
    velocity = VelocityProfile(beam, species, pumping, geometry, v0, options.exact_bracket)
    tof = TimeOfFlight(velocity, options.grid_points)
    dt = travel_time(velocity)
    temperature = HorizontalTemperature(beam, species, pumping, tof, T0, heating=options.heating)

    def depth(z):
        return np.abs(guide_depth(beam, species, pumping, z))

    exit_info = guide_exit(temperature, depth, tof.z)
    if exit_info.never_guided:
        flags.append("never_guided")
    elif exit_info.z_out is None:
        flags.append("no_exit_within_D")
    if exit_info.reentry:
        flags.append("guide_reentry")
    radius = CloudRadius(beam, species, pumping, temperature, tof, exit_info)

    z = tof.z
    v = velocity(z)
    T_h = temperature(z)
    if exit_info.z_out is not None:
        # frozen after the exit
        T_h = np.where(z > exit_info.z_out, radius.T_out, T_h)
        guided = z <= exit_info.z_out if not exit_info.never_guided else np.zeros_like(z, dtype=bool)
    else:
        guided = np.ones_like(z, dtype=bool)
    delta_r = radius(z)
    depth_z = depth(z)

    if beam.power > 0:
        omega = transverse_frequency(beam, species, pumping, z)
        diag = adiabaticity(beam, omega, v, z)
        mask = guided if np.any(guided) else np.zeros_like(guided)
        adiab = float(np.max(diag[mask])) if np.any(mask) else math.nan
    else:
        adiab = math.nan
    if adiab >= 1.0:
        flags.append("adiabaticity_violated")

    profile = TransportProfile(z, v, T_h, depth_z, delta_r, guided, exit_info.z_out, dt)
    v_cap = capture_velocity(species, geometry)
    f = options.f_exponent
    refined = condition_score(delta_r[-1] / geometry.mot2_radius, f) * condition_score(v[-1] / v_cap, f)
    two_level = two_level_efficiency(beam, species, geometry, T0, f)
    report = EfficiencyReport(
        v0=v0,
        v_arrival=float(v[-1]),
        travel_time=dt,
        z_out=exit_info.z_out,
        delta_r_out=radius.delta_r_out,
        delta_r_arrival=float(delta_r[-1]),
        T_h_out=radius.T_out,
        fall_time=None if radius.t_out is None else tof.total - radius.t_out,
        eta=pumping.eta,
        effective_detuning=pumping.effective_detuning,
        v_capture=v_cap,
        adiabaticity_max=adiab,
        two_level_score=two_level,
        refined_score=float(refined),
        validity_flags=tuple(flags),
    )
    return Simulation(beam, species, geometry, pumping, velocity, tof, temperature, exit_info, radius, profile, report)


def refined_efficiency(beam, species, geometry, T0, options=ModelOptions()):
    return simulate(beam, species, geometry, T0, options).report
