"""Flat-file writers: CSV tables and JSON reports, each headed by the effective config."""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

PROFILE_COLUMNS = ("z_m", "v_mps", "Th_uK", "depth_uK", "delta_r_mm", "guided")
MC_COLUMNS = PROFILE_COLUMNS + ("stderr_v", "n_captured")


def fmt(value):
    """Locale-independent text for one CSV cell (17 significant digits)."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else format(float(value), ".17g")
    if isinstance(value, (list, tuple)):
        return ";".join(fmt(v) for v in value)
    return str(value)


def header_items(cfg, command, extra=()):
    items = [("tool", "pushguide"), ("command", command)]
    items += cfg.effective() if cfg is not None else [("tool.version", __version__)]
    items += list(extra)
    return items


def csv_text(columns, rows, header):
    buf = io.StringIO()
    for key, value in header:
        buf.write(f"# {key} = {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows, header):
    Path(path).write_text(csv_text(columns, rows, header))


def jsonable(value):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def json_text(payload, header):
    doc = {"header": dict(header)}
    doc.update(payload)
    return json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n"


def write_json(path, payload, header):
    Path(path).write_text(json_text(payload, header))


def profile_rows(profile):
    """Rows of the transport profile CSV from a TransportProfile."""
    from .units import KB

    return [
        {
            "z_m": z,
            "v_mps": v,
            "Th_uK": t * 1e6,
            "depth_uK": d / KB * 1e6,
            "delta_r_mm": r * 1e3,
            "guided": g,
        }
        for z, v, t, d, r, g in zip(
            profile.z, profile.v, profile.T_h, profile.depth, profile.delta_r, profile.guided
        )
    ]


def mc_rows(stats, depth):
    """Rows of the Monte Carlo profile CSV; ``guided`` is the bound fraction.

    ``depth`` gives the on-axis |U0| in joules at each record height.
    """
    from .units import KB

    last = len(stats.z) - 1
    return [
        {
            "z_m": z,
            "v_mps": stats.mean_vz[i],
            "Th_uK": stats.T_h[i] * 1e6,
            "depth_uK": depth[i] / KB * 1e6,
            "delta_r_mm": stats.delta_r[i] * 1e3,
            "guided": stats.bound_fraction[i],
            "stderr_v": stats.stderr_vz[i],
            "n_captured": stats.n_captured if i == last else None,
        }
        for i, z in enumerate(stats.z)
    ]
