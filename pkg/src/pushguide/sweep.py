"""Grid parameter studies and derivative-free optimization of the transfer model."""

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import SCHEMA, BOUNDS_PREFIX, NUMBER, build_config
from .errors import ConfigError, ModelValidityError, PushGuideError
from .transport import simulate

OBJECTIVES = {
    # name -> (report field, +1 to maximize / -1 to minimize)
    "two_level_score": ("two_level_score", 1.0),
    "refined_score": ("refined_score", 1.0),
    "v_arrival": ("v_arrival", -1.0),
    "travel_time": ("travel_time_ms", -1.0),
    "delta_r_arrival": ("delta_r_arrival_mm", -1.0),
}
FREE_ALIASES = {
    "detuning": "beam.detuning_GHz",
    "power": "beam.power_mW",
    "waist_min": "beam.waist_um",
    "focus_position": "beam.focus_cm",
}
SEEDS_PER_DIM = 8


def _sweepable(key):
    if key not in SCHEMA:
        return False
    kind, unit, _ = SCHEMA[key]
    return (unit is not None or kind == NUMBER) and key.split(".")[0] in ("beam", "geometry", "model")


@dataclass(frozen=True)
class Axis:
    key: str
    values: tuple

    @classmethod
    def linear(cls, key, lo, hi, steps):
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise ConfigError(f"axis {key}: need finite bounds with min < max")
        if steps < 2:
            raise ConfigError(f"axis {key}: need at least 2 steps")
        return cls(key, tuple(float(x) for x in np.linspace(lo, hi, int(steps))))


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    objective: str = "refined_score"

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise ConfigError("a sweep needs 1 to 3 axes")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}; choose from {', '.join(OBJECTIVES)}")
        for axis in self.axes:
            if not _sweepable(axis.key):
                raise ConfigError(f"{axis.key} cannot be swept")

    def cells(self):
        return list(itertools.product(*(a.values for a in self.axes)))


@dataclass(frozen=True)
class OptimizeSpec:
    free: tuple  # config keys
    bounds: tuple  # (lo, hi) per key, in the key's unit
    objective: str = "refined_score"
    max_evals: int = 500
    tolerance: float = 1e-4

    def __post_init__(self):
        if not self.free:
            raise ConfigError("optimize.free lists no parameters")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        for key, (lo, hi) in zip(self.free, self.bounds):
            if key not in FREE_ALIASES.values():
                raise ConfigError(f"{key} is not an optimizable parameter")
            if not lo <= hi:
                raise ConfigError(f"bounds for {key}: min > max")
            if key == "beam.power_mW" and lo < 0:
                raise ConfigError("power bounds must be >= 0")
            if key == "beam.detuning_GHz" and hi >= 0:
                raise ConfigError("detuning bounds must stay red (< 0)")


def parse_axis(text):
    """``key min max steps`` or ``key values v1,v2,...``."""
    tokens = text.replace(",", " ").split()
    if len(tokens) >= 3 and tokens[1] == "values":
        return Axis(tokens[0], tuple(float(t) for t in tokens[2:]))
    if len(tokens) != 4:
        raise ConfigError(f"axis {text!r}: expected 'key min max steps' or 'key values v1,v2,...'")
    lo, hi, steps = float(tokens[1]), float(tokens[2]), float(tokens[3])
    if steps != int(steps):
        raise ConfigError(f"axis {tokens[0]}: steps must be an integer")
    return Axis.linear(tokens[0], lo, hi, int(steps))


def sweep_spec_from_config(cfg):
    axes = []
    for n in (1, 2, 3):
        entry = cfg.document.get(f"sweep.axis{n}")
        if entry is not None:
            text = entry.value + (f" {entry.unit}" if entry.unit else "")
            try:
                axes.append(parse_axis(text))
            except (ConfigError, ValueError) as exc:
                raise ConfigError(str(exc), entry.line) from None
    if not axes:
        raise ConfigError("sweep needs at least sweep.axis1")
    return SweepSpec(tuple(axes), cfg.get("sweep.objective"))


def optimize_spec_from_config(cfg):
    text = cfg.get("optimize.free")
    if not text:
        raise ConfigError("optimize needs optimize.free")
    free, bounds = [], []
    for name in text.replace(",", " ").split():
        key = FREE_ALIASES.get(name, name)
        entry = cfg.document.get(BOUNDS_PREFIX + key)
        if entry is None:
            raise ConfigError(f"missing {BOUNDS_PREFIX}{key}")
        parts = (entry.value + (f" {entry.unit}" if entry.unit else "")).replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"{entry.key}: expected 'min max'", entry.line)
        free.append(key)
        bounds.append((float(parts[0]), float(parts[1])))
    return OptimizeSpec(
        tuple(free), tuple(bounds), cfg.get("optimize.objective"),
        cfg.get("optimize.max_evals"), cfg.get("optimize.tolerance"),
    )


# ---------------------------------------------------------------- evaluation


def evaluate_point(doc, values):
    """Simulate one parameter point; model errors are returned, not raised."""
    from .document import ConfigDocument, Entry

    point = ConfigDocument(doc)
    for key, value in values.items():
        point.set(Entry(key, repr(float(value)), None, None))
    try:
        cfg = build_config(point, "simulate")
        return simulate(cfg.beam, cfg.species, cfg.geometry, cfg.T0, cfg.options).report.to_dict(), None
    except PushGuideError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _evaluate_batch(doc, points, threads):
    if threads <= 1 or len(points) < 2:
        return [evaluate_point(doc, p) for p in points]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(evaluate_point, [doc] * len(points), points, chunksize=max(1, len(points) // (4 * threads))))


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list  # dicts: axis keys, objective, report fields, error

    def column(self, name):
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows], dtype=float)

    def argmax(self):
        """Index of the best row; ties go to the smaller |detuning|."""
        field_, sign = OBJECTIVES[self.spec.objective]
        best, best_key = None, None
        for i, row in enumerate(self.rows):
            if row["objective"] is None:
                continue
            key = (sign * row["objective"], -abs(row.get("beam.detuning_GHz", 0.0)))
            if best_key is None or key > best_key:
                best, best_key = i, key
        return best


def run_sweep(spec, base, threads=1):
    """Evaluate the objective on every grid cell of ``spec`` around config ``base``."""
    keys = [a.key for a in spec.axes]
    points = [dict(zip(keys, cell)) for cell in spec.cells()]
    results = _evaluate_batch(base.document, points, threads)
    field_, _ = OBJECTIVES[spec.objective]
    rows = []
    for point, (report, error) in zip(points, results):
        row = dict(point)
        row["objective"] = None if report is None else report[field_]
        if report is not None:
            row.update({k: v for k, v in report.items()})
        row["error"] = error
        rows.append(row)
    return SweepResult(spec, rows)


# ------------------------------------------------------------------ optimize


def nelder_mead(fn, x0, step, tolerance, max_evals, lower=0.0, upper=1.0):
    """Minimize ``fn`` in a box with a clipped Nelder-Mead simplex.

    Trial points are clipped into [lower, upper]. Stops when the spread of the
    simplex values falls to ``tolerance`` or after ``max_evals`` calls.
    Returns (x_best, f_best, n_evals).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return fn(np.clip(x, lower, upper))

    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] = v[i] + step if v[i] + step <= upper else v[i] - step
        simplex.append(np.clip(v, lower, upper))
    values = [f(v) for v in simplex]

    while evals < max_evals:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if all(math.isfinite(v) for v in values) and values[-1] - values[0] <= tolerance:
            break
        if not math.isfinite(values[0]):
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + (centroid - worst), lower, upper)
        fr = f(xr)
        if fr < values[0]:
            xe = np.clip(centroid + 2.0 * (centroid - worst), lower, upper)
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            xc = np.clip(centroid + 0.5 * ((xr if fr < values[-1] else worst) - centroid), lower, upper)
            fc = f(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, n + 1):
                    simplex[i] = best + 0.5 * (simplex[i] - best)
                    values[i] = f(simplex[i])
    i = int(np.argmin(values))
    return np.clip(simplex[i], lower, upper), values[i], evals


@dataclass
class OptimizeResult:
    best: dict  # key -> value in key unit
    objective: float
    report: dict
    trace: list  # dicts with parameter values, objective, error
    seed_best: float


def optimize(spec, base, threads=1):
    """Grid seeding (8 points per free parameter) followed by a clipped simplex search.

    Deterministic for a given config; the best objective never falls below the
    best seed.
    """
    field_, sign = OBJECTIVES[spec.objective]
    keys = list(spec.free)
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    width = hi - lo
    active = width > 0
    trace = []
    cache = {}

    def record(point, report, error):
        value = None if report is None else report[field_]
        trace.append({**point, "objective": value, "error": error})
        return value

    grids = [np.linspace(l, h, SEEDS_PER_DIM) if w > 0 else np.array([l]) for l, h, w in zip(lo, hi, width)]
    seeds = [dict(zip(keys, map(float, cell))) for cell in itertools.product(*grids)]
    results = _evaluate_batch(base.document, seeds, threads)
    best_key, best_point, best_report = None, None, None
    for point, (report, error) in zip(seeds, results):
        value = record(point, report, error)
        cache[tuple(point[k] for k in keys)] = (report, error)
        if value is None:
            continue
        key = (sign * value, -abs(point.get("beam.detuning_GHz", 0.0)))
        if best_key is None or key > best_key:
            best_key, best_point, best_report = key, point, report
    if best_point is None:
        raise ModelValidityError("optimization failed: every seed point is invalid")
    seed_best = best_report[field_]

    if np.any(active) and spec.max_evals > len(seeds):

        def to_point(x):
            full = lo.copy()
            full[active] = lo[active] + x * width[active]
            return {k: float(v) for k, v in zip(keys, full)}

        def fn(x):
            nonlocal best_key, best_point, best_report
            point = to_point(x)
            ckey = tuple(point[k] for k in keys)
            if ckey in cache:
                report, error = cache[ckey]
            else:
                report, error = evaluate_point(base.document, point)
                cache[ckey] = (report, error)
                record(point, report, error)
            if report is None:
                return math.inf
            value = report[field_]
            key = (sign * value, -abs(point.get("beam.detuning_GHz", 0.0)))
            if key > best_key:
                best_key, best_point, best_report = key, point, report
            return -sign * value

        x0 = (np.array([best_point[k] for k in keys])[active] - lo[active]) / width[active]
        nelder_mead(fn, x0, 1.0 / (SEEDS_PER_DIM - 1), spec.tolerance, spec.max_evals - len(seeds))

    return OptimizeResult(best_point, best_report[field_], best_report, trace, seed_best)
