"""Event-level Monte Carlo of atoms in the diverging guide.

Each atom is propagated in 3D through the dipole potential U0(z) exp(-2 r^2/w(z)^2)
plus gravity with a kick-drift-kick integrator; photon scattering is sampled as
Poisson events per step. Two rate models are available:

``averaged`` (default)
    the rates the analytic model assumes: absorption kicks (+hbar k along z)
    at the transverse-averaged on-axis pushing rate, and spontaneous-emission
    recoils (hbar k, isotropic) at the lower-state scattering rate that drives
    the transverse heating. The ensemble then checks the mechanics of the
    averaged model (energy bookkeeping, adiabatic cooling in the real Gaussian
    well, guide exit and ballistic expansion) rather than its rate assumptions.
``local``
    every atom scatters at the local intensity of its own ground state (upper
    with probability eta, resampled each step); each event absorbs along +z and
    emits isotropically.

Atoms are processed in fixed blocks, each with its own counter-derived random
stream, and block sums are reduced in block order, so results do not depend
on the number of worker threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ModelValidityError, NumericalError
from .light_atom import guide_depth, lower_detuning, pumping_state
from .beam import saturation_parameter, waist_sq_ratio
from .species import recoil_quantities
from .transport import entrance_velocity
from .units import KB

MAX_EVENTS_PER_STEP = 0.5
TARGET_EVENTS_PER_STEP = 0.1
RATE_MODELS = ("averaged", "local")
GUIDES = ("gaussian", "harmonic", "off")

# per-record accumulator columns
_N, _VZ, _VZ2, _VT2, _R2, _BOUND, _VT2_B, _R2_B, _CAPT, _TIME, _ET = range(11)
_NCOL = 11


@dataclass(frozen=True)
class McConfig:
    n_atoms: int
    seed: int
    record_grid: tuple
    initial_temperature: float
    initial_radius: float | None = None  # None: matched guided size at z = 0
    time_step: float | None = None  # None: adaptive, <= 0.1 expected events per step
    rate_model: str = "averaged"
    block_size: int = 1000
    push: bool = True
    heating: bool = True
    guide: str = "gaussian"
    constant_rate: bool = False  # scattering rates frozen at their z = 0 values
    max_time: float | None = None

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ConfigError("mc.n_atoms must be >= 1")
        if self.time_step is not None and not self.time_step > 0:
            raise ConfigError("mc.time_step must be > 0")
        if self.block_size < 1:
            raise ConfigError("mc.block_size must be >= 1")
        if self.rate_model not in RATE_MODELS:
            raise ConfigError(f"mc.rate_model must be one of {RATE_MODELS}")
        if self.guide not in GUIDES:
            raise ConfigError(f"guide must be one of {GUIDES}")
        if not self.initial_temperature >= 0:
            raise ConfigError("initial temperature must be >= 0")
        grid = np.asarray(self.record_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ConfigError("record grid must be strictly increasing heights >= 0")


@dataclass(frozen=True)
class McAtom:
    position: tuple
    velocity: tuple
    ground_state: str = "lower"


@dataclass
class McStats:
    """Per-record-height ensemble statistics.

    ``T_h`` and ``delta_r`` use every atom crossing the height; the ``_guided``
    variants only those still bound in the guide (transverse energy < 0).
    """

    z: np.ndarray
    n: np.ndarray
    mean_time: np.ndarray
    mean_vz: np.ndarray
    stderr_vz: np.ndarray
    T_h: np.ndarray
    delta_r: np.ndarray
    T_h_guided: np.ndarray
    delta_r_guided: np.ndarray
    bound_fraction: np.ndarray
    transverse_energy: np.ndarray  # mean kinetic + dipole energy in the transverse plane, J
    n_captured: int
    n_atoms: int
    steps: int
    sums: np.ndarray = field(repr=False)

    @property
    def captured_fraction(self):
        return self.n_captured / self.n_atoms


def mc_config_from_config(cfg, record_points=None):
    length = cfg.geometry.trap_separation
    points = record_points or cfg.get("mc.record_points")
    t_init = cfg.get("mc.initial_temperature_uK")
    return McConfig(
        n_atoms=cfg.get("mc.n_atoms"),
        seed=cfg.get("mc.seed"),
        record_grid=tuple(float(z) for z in np.linspace(0.0, length, points)),
        initial_temperature=cfg.T0 if t_init is None else t_init,
        initial_radius=cfg.get("mc.initial_radius_um"),
        time_step=cfg.get("mc.time_step_us"),
        rate_model=cfg.get("mc.rate_model"),
        block_size=cfg.get("mc.block_size"),
    )


class _Physics:
    """Precomputed constants shared by all blocks."""

    def __init__(self, config, beam, species, pumping, geometry, v0):
        self.cfg = config
        self.mass = species.mass
        self.v_rec, _ = recoil_quantities(species)
        self.g = geometry.gravity
        self.length = geometry.trap_separation
        self.capture_radius = geometry.mot2_radius
        self.v0 = v0
        self.eta = pumping.eta
        self.z0 = beam.focus_position
        self.zr = beam.rayleigh_length
        self.w0sq = beam.waist_min ** 2
        self.ratio0 = float(waist_sq_ratio(beam, 0.0))
        self.half_gamma = species.gamma / 2.0
        d_low = lower_detuning(pumping, species)
        # values at the focus; intensity-driven quantities scale with w0^2 / w(z)^2
        self.s_low_focus = float(saturation_parameter(beam, species, d_low, self.z0))
        self.s_up_focus = float(saturation_parameter(beam, species, pumping.effective_detuning, self.z0))
        depth = float(guide_depth(beam, species, pumping, self.z0)) if beam.power > 0 else 0.0
        self.u_focus = depth / self.mass  # per unit mass, <= 0
        self.push_focus = (
            beam.transverse_average_factor * self.half_gamma * self.s_low_focus * pumping.bracket(True)
            if config.push else 0.0
        )
        self.heat_focus = self.half_gamma * self.s_low_focus if config.heating else 0.0
        # transverse frequency at z = 0 (also the frozen frequency of the harmonic guide)
        self.omega0 = math.sqrt(4.0 * abs(self.u_focus) * self.ratio0 ** 2 / self.w0sq)
        self.scatters = config.push or config.heating

    def intensity_ratio(self, z):
        if self.cfg.constant_rate:
            return np.full_like(z, self.ratio0)
        u = (z - self.z0) / self.zr
        return 1.0 / (1.0 + u * u)

    def max_rate(self, z_lo, z_hi):
        """Upper bound on the per-atom event rate for atoms in [z_lo, z_hi]."""
        if self.cfg.constant_rate:
            ratio = self.ratio0
        else:
            zc = min(max(self.z0, z_lo), z_hi)
            ratio = 1.0 / (1.0 + ((zc - self.z0) / self.zr) ** 2)
        if self.cfg.rate_model == "averaged":
            return (self.push_focus + self.heat_focus) * ratio
        if not self.scatters:
            return 0.0
        return self.half_gamma * max(self.s_up_focus, self.s_low_focus) * ratio

    def accel(self, x, y, z):
        """Acceleration, potential energy per unit mass and intensity ratio w0^2/w^2."""
        guide = self.cfg.guide
        if guide == "gaussian":
            u = (z - self.z0) / self.zr
            ratio = 1.0 / (1.0 + u * u)
            inv_wsq = ratio / self.w0sq
            r2 = x * x + y * y
            pot = (self.u_focus * ratio) * np.exp(-2.0 * r2 * inv_wsq)
            common = 4.0 * pot * inv_wsq
            # -dU/dz with U0 ~ 1/w^2 and the Gaussian profile both depending on w(z)
            az = self.g - 2.0 * pot * (u * ratio / self.zr) * (2.0 * r2 * inv_wsq - 1.0)
            if self.cfg.constant_rate:
                ratio = np.full_like(z, self.ratio0)
            return common * x, common * y, az, pot, ratio
        ratio = self.intensity_ratio(z) if self.scatters else None
        if guide == "harmonic":
            om2 = self.omega0 ** 2
            return -om2 * x, -om2 * y, np.full_like(x, self.g), 0.5 * om2 * (x * x + y * y), ratio
        zero = np.zeros_like(x)
        return zero, zero, np.full_like(x, self.g), zero, ratio

    def bound(self, vt2, pot):
        if self.cfg.guide != "gaussian":
            return np.ones(vt2.shape, dtype=bool)
        return 0.5 * vt2 + pot < 0.0


def run_ensemble(config, beam, species, geometry, pumping=None, threads=1, v0=None):
    """Propagate ``config.n_atoms`` atoms from z = 0 through every record height.

    ``threads`` only changes how blocks are scheduled; the result is the same.
    """
    if pumping is None:
        pumping = pumping_state(beam, species, warn=False)
    if v0 is None:
        v0 = entrance_velocity(beam, species, geometry, pumping)
    if config.record_grid[-1] > geometry.trap_separation * (1 + 1e-12):
        raise ConfigError("record grid extends beyond the trap separation")
    phys = _Physics(config, beam, species, pumping, geometry, v0)
    if config.time_step is not None:
        worst = config.time_step * phys.max_rate(0.0, geometry.trap_separation)
        if worst > MAX_EVENTS_PER_STEP:
            raise ModelValidityError(
                f"time step too coarse: {worst:.3g} expected scatterings per step (limit {MAX_EVENTS_PER_STEP})"
            )
    blocks = [
        (i, min(config.block_size, config.n_atoms - start))
        for i, start in enumerate(range(0, config.n_atoms, config.block_size))
    ]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _run_block(phys, *b), blocks))
    else:
        results = [_run_block(phys, *b) for b in blocks]
    # reduce in block order so the floating-point sums never depend on scheduling
    sums = np.zeros((len(config.record_grid), _NCOL))
    steps = 0
    for block_sums, block_steps in results:
        sums += block_sums
        steps = max(steps, block_steps)
    return _stats(config, sums, steps, species.mass)


def _stats(config, sums, steps, mass):
    n = sums[:, _N]
    nb = sums[:, _BOUND]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums[:, _VZ] / n
        var = np.maximum(sums[:, _VZ2] / n - mean ** 2, 0.0)
        stderr = np.sqrt(var / np.maximum(n - 1, 1))
        return McStats(
            z=np.asarray(config.record_grid, dtype=float),
            n=n.astype(int),
            mean_time=sums[:, _TIME] / n,
            mean_vz=mean,
            stderr_vz=stderr,
            T_h=mass * sums[:, _VT2] / (2.0 * KB * n),
            delta_r=np.sqrt(sums[:, _R2] / (2.0 * n)),
            T_h_guided=mass * sums[:, _VT2_B] / (2.0 * KB * nb),
            delta_r_guided=np.sqrt(sums[:, _R2_B] / (2.0 * nb)),
            bound_fraction=nb / n,
            transverse_energy=mass * sums[:, _ET] / n,
            n_captured=int(sums[-1, _CAPT]),
            n_atoms=config.n_atoms,
            steps=steps,
            sums=sums,
        )


def _stream(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def _poisson_small(rng, lam):
    """Poisson counts for small means by inverse CDF, truncated at 3."""
    u = rng.random(lam.shape)
    p0 = np.exp(-lam)
    c1 = p0 * (1.0 + lam)
    c2 = c1 + p0 * lam * lam / 2.0
    return (u >= p0).astype(np.int64) + (u >= c1) + (u >= c2)


def initial_state(phys, rng, n):
    """Gaussian positions and Maxwell-Boltzmann velocities around (0, 0, v0)."""
    cfg = phys.cfg
    sigma_v = math.sqrt(KB * cfg.initial_temperature / phys.mass)
    if cfg.initial_radius is not None:
        sigma_r = cfg.initial_radius
    elif cfg.guide == "off" or phys.omega0 == 0:
        sigma_r = 0.0
    else:
        sigma_r = sigma_v / phys.omega0
    g = rng.standard_normal((6, n))
    x, y = sigma_r * g[0], sigma_r * g[1]
    vx, vy, vz = sigma_v * g[3], sigma_v * g[4], phys.v0 + sigma_v * g[5]
    return x, y, np.zeros(n), vx, vy, vz


def _run_block(phys, block, n):
    cfg = phys.cfg
    rng = _stream(cfg.seed, block)
    x, y, z, vx, vy, vz = initial_state(phys, rng, n)
    rec = np.asarray(cfg.record_grid, dtype=float)
    n_rec = rec.size
    sums = np.zeros((n_rec, _NCOL))
    next_idx = np.zeros(n, dtype=np.int64)
    ax, ay, az, pot, ratio = phys.accel(x, y, z)
    if rec[0] == 0.0:
        _record(phys, sums, next_idx, x, y, vx, vy, vz, pot, 0.0)
        next_idx += 1
        if n_rec == 1:
            return sums, 0

    t = 0.0
    t_max = cfg.max_time or 20.0 * phys.length / max(phys.v0, math.sqrt(2 * phys.g * phys.length), 1e-3)
    steps = 0
    # keep the transverse oscillation well resolved
    dt_cap = min(1e-4, 0.02 / phys.omega0) if cfg.guide != "off" and phys.omega0 > 0 else 1e-4
    while z.size:
        if t > t_max:
            raise NumericalError("Monte Carlo atoms failed to reach the last record height")
        if cfg.time_step is not None:
            dt = cfg.time_step
        else:
            rate = phys.max_rate(float(z.min()), float(z.max()))
            dt = min(TARGET_EVENTS_PER_STEP / rate, dt_cap) if rate > 0 else dt_cap
        # kick-drift-kick
        h = 0.5 * dt
        vx += h * ax
        vy += h * ay
        vz += h * az
        z_old = z.copy()
        x += dt * vx
        y += dt * vy
        z += dt * vz
        ax, ay, az, pot, ratio = phys.accel(x, y, z)
        vx += h * ax
        vy += h * ay
        vz += h * az
        if phys.scatters:
            _scatter(phys, rng, dt, ratio, x, y, vx, vy, vz)
        t += dt
        steps += 1

        crossing = z >= rec[np.minimum(next_idx, n_rec - 1)]
        if crossing.any():
            sel = np.nonzero(crossing)[0]
            while sel.size:
                zr = rec[next_idx[sel]]
                # step back to the record plane
                back = dt * (z[sel] - zr) / (z[sel] - z_old[sel])
                xi = x[sel] - back * vx[sel]
                yi = y[sel] - back * vy[sel]
                _, _, _, poti, _ = phys.accel(xi, yi, zr)
                _record(phys, sums, next_idx[sel], xi, yi, vx[sel] - back * ax[sel], vy[sel] - back * ay[sel],
                        vz[sel] - back * az[sel], poti, t - back)
                next_idx[sel] += 1
                sel = sel[next_idx[sel] < n_rec]
                sel = sel[z[sel] >= rec[next_idx[sel]]]
            keep = next_idx < n_rec
            if not keep.all():
                x, y, z, vx, vy, vz = x[keep], y[keep], z[keep], vx[keep], vy[keep], vz[keep]
                ax, ay, az = ax[keep], ay[keep], az[keep]
                next_idx = next_idx[keep]
    return sums, steps


def _record(phys, sums, k, x, y, vx, vy, vz, pot, time):
    n_rec = sums.shape[0]
    r2 = x * x + y * y
    vt2 = vx * vx + vy * vy
    bound = phys.bound(vt2, pot)
    last = k == n_rec - 1
    cols = {
        _N: np.ones_like(vz),
        _VZ: vz,
        _VZ2: vz * vz,
        _VT2: vt2,
        _R2: r2,
        _BOUND: bound.astype(float),
        _VT2_B: np.where(bound, vt2, 0.0),
        _R2_B: np.where(bound, r2, 0.0),
        _CAPT: (last & (r2 < phys.capture_radius ** 2)).astype(float),
        _TIME: np.broadcast_to(time, vz.shape),
        _ET: 0.5 * vt2 + pot,
    }
    for c, values in cols.items():
        sums[:, c] += np.bincount(k, weights=values, minlength=n_rec)


def _scatter(phys, rng, dt, ratio, x, y, vx, vy, vz):
    cfg = phys.cfg
    v_rec = phys.v_rec
    if cfg.rate_model == "averaged":
        # one Poisson stream at the summed rate, thinned into push and heating events
        total = phys.push_focus + phys.heat_focus
        counts = _poisson_small(rng, (total * dt) * ratio)
        sel = np.nonzero(counts)[0]
        if sel.size == 0:
            return
        k = counts[sel]
        pushes = rng.binomial(k, phys.push_focus / total)
        vz[sel] += v_rec * pushes
        _emit(rng, sel, k - pushes, vx, vy, vz, v_rec)
        return
    # local: state-resolved rate at the atom's own transverse position
    profile = np.exp(-2.0 * (x * x + y * y) * ratio / phys.w0sq)
    upper = rng.random(vz.shape) < phys.eta
    s = np.where(upper, phys.s_up_focus, phys.s_low_focus) * ratio * profile
    counts = _poisson_small(rng, phys.half_gamma * s / (1.0 + s) * dt)
    sel = np.nonzero(counts)[0]
    if sel.size == 0:
        return
    if cfg.push:
        vz[sel] += v_rec * counts[sel]
    if cfg.heating:
        _emit(rng, sel, counts[sel], vx, vy, vz, v_rec)


def _emit(rng, sel, counts, vx, vy, vz, v_rec):
    """Add ``counts`` isotropic recoils of size v_rec to atoms ``sel``."""
    for j in (1, 2, 3):
        sel = sel[counts >= j]
        counts = counts[counts >= j]
        if sel.size == 0:
            break
        cos_t = 2.0 * rng.random(sel.size) - 1.0
        phi = (2.0 * math.pi) * rng.random(sel.size)
        sin_t = np.sqrt(1.0 - cos_t * cos_t)
        vx[sel] += v_rec * sin_t * np.cos(phi)
        vy[sel] += v_rec * sin_t * np.sin(phi)
        vz[sel] += v_rec * cos_t
