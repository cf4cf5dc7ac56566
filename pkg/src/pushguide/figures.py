"""Datasets behind the efficiency and travel-time figures, computed from the bundled configs."""

import numpy as np

from .config import load_config
from .errors import PushGuideError
from .output import header_items, write_csv
from .transport import simulate, two_level_model

FIG3_POWERS_MW = (10.0, 46.0)
FIG3_DETUNINGS_GHZ = np.linspace(-6.0, -0.1, 296)
FIG5_POWERS_MW = (10.0, 15.0, 21.0)
FIG5_DETUNINGS_GHZ = np.linspace(-2.5, -0.1, 241)
FIG8_POWERS_MW = np.linspace(5.0, 21.0, 17)


def _at(cfg, **values):
    return cfg.with_values(values)


def fig3_rows(cfg):
    """Two-level efficiency vs detuning (Cs, waist at MOT1) for each power."""
    rows = []
    for p in FIG3_POWERS_MW:
        for d in FIG3_DETUNINGS_GHZ:
            point = _at(cfg, **{"beam.power_mW": p, "beam.detuning_GHz": d})
            res = two_level_model(point.beam, point.species, point.geometry, point.T0, point.options.f_exponent)
            rows.append({"power_mW": p, "detuning_GHz": d, "two_level_score": res.score,
                         "v_arrival": res.velocity, "Th_uK": res.temperature * 1e6})
    return rows


def _refined(point):
    try:
        rep = simulate(point.beam, point.species, point.geometry, point.T0, point.options).report
        return rep, None
    except PushGuideError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def fig5_rows(cfg):
    """Refined efficiency vs detuning (Rb) for each power; invalid points keep an error."""
    rows = []
    for p in FIG5_POWERS_MW:
        for d in FIG5_DETUNINGS_GHZ:
            rep, err = _refined(_at(cfg, **{"beam.power_mW": p, "beam.detuning_GHz": d}))
            rows.append({
                "power_mW": p,
                "detuning_GHz": d,
                "refined_score": None if rep is None else rep.refined_score,
                "v_arrival": None if rep is None else rep.v_arrival,
                "delta_r_arrival_mm": None if rep is None else rep.delta_r_arrival * 1e3,
                "error": err,
            })
    return rows


def fig8_rows(cfg):
    """Travel time vs power (Rb) from the refined and the two-level model."""
    rows = []
    for p in FIG8_POWERS_MW:
        point = _at(cfg, **{"beam.power_mW": p})
        rep, err = _refined(point)
        two = two_level_model(point.beam, point.species, point.geometry, point.T0, point.options.f_exponent)
        rows.append({
            "power_mW": p,
            "travel_time_refined_ms": None if rep is None else rep.travel_time * 1e3,
            "travel_time_two_level_ms": two.travel_time * 1e3,
            "error": err,
        })
    return rows


FIGURES = {
    "fig3_cs.csv": ("cs_paper.cfg", fig3_rows,
                    ("power_mW", "detuning_GHz", "two_level_score", "v_arrival", "Th_uK")),
    "fig5_rb.csv": ("rb_paper.cfg", fig5_rows,
                    ("power_mW", "detuning_GHz", "refined_score", "v_arrival", "delta_r_arrival_mm", "error")),
    "fig8_rb.csv": ("rb_paper.cfg", fig8_rows,
                    ("power_mW", "travel_time_refined_ms", "travel_time_two_level_ms", "error")),
}


def write_figures(out_dir):
    """Write every figure dataset into ``out_dir``; returns the written paths."""
    written = []
    for name, (cfg_name, build, columns) in FIGURES.items():
        cfg = load_config(cfg_name)
        path = out_dir / name
        write_csv(path, columns, build(cfg), header_items(cfg, "figures", [("figure", name)]))
        written.append(path)
    return written
