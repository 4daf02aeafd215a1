"""Deterministic CSV time-series and JSON snapshot emission.

Numbers are printed with 17 significant digits so a read-back reproduces the
in-memory doubles exactly; identical configs on one platform produce
byte-identical files.  Snapshots carry a schema_version gate and enough
geometry to recompute diagnostics standalone.
"""

import json
import os

import numpy as np

from .errors import ConfigError

SNAPSHOT_SCHEMA_VERSION = 1

TIMESERIES_COLUMNS = (
    "t", "x_minus", "x_plus",
    "e_minus", "e_plus", "e_gamma", "d_minus", "d_plus", "d_gamma",
    "e_beta_minus", "e_beta_plus", "e_beta_plus_mixed",
    "ek_minus", "ek_plus", "dk_minus", "dk_plus",
    "w_min_minus", "w_max_minus", "w_min_plus", "w_max_plus",
    "ht_norm_25",
)
FLAG_COLUMNS = (
    "flag_energy_minus", "flag_energy_plus", "flag_ebeta_minus",
    "flag_ebeta_plus", "flag_x_minus", "flag_x_plus", "flag_ht_decay",
)


def _fmt(x):
    return "%.17g" % float(x)


def emit_timeseries(series, path, order_cap=2):
    """Write the report series as CSV with the documented column order."""
    lines = [f"# stefan2p timeseries schema=1 order_cap={order_cap}"]
    lines.append(",".join(TIMESERIES_COLUMNS + FLAG_COLUMNS))
    for rep in series:
        vals = [_fmt(getattr(rep, c)) for c in TIMESERIES_COLUMNS]
        vals += [str(int(rep.flags.get(c, 1))) for c in FLAG_COLUMNS]
        lines.append(",".join(vals))
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


def read_timeseries(path):
    """Read back an emitted CSV into a dict of column arrays."""
    with open(path, "r") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    meta = lines[0]
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:] if ln]
    cols = {h: np.array([float(r[i]) for r in rows])
            for i, h in enumerate(header)}
    return cols, meta


def snapshot_document(state, config_hash="", run_label=""):
    """Schema-stable JSON-ready snapshot of a simulation state."""
    geom = state.geom
    h = state.h
    doc = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "t": float(state.t),
        "step_index": int(state.step_index),
        "config_hash": config_hash,
        "run_label": run_label,
        "kappa": float(state.kappa),
        "geometry": {
            "r_gamma": geom.r_gamma,
            "r_outer": geom.r_outer,
            "n_theta": geom.n_theta,
            "perturb": geom.perturb,
        },
        "h": [[int(k), float(c.real), float(c.imag)]
              for k, c in enumerate(h.coeffs)],
        "map_summary": {
            tag: {"j_min": float(np.min(state.maps[tag].J)),
                  "j_max": float(np.max(state.maps[tag].J))}
            for tag in ("minus", "plus") if tag in state.maps
        },
    }
    for tag in ("minus", "plus"):
        q = state.fields[tag].q
        doc[f"q_{tag}"] = {
            "shape": list(q.shape),
            "data": [float(x) for x in q.ravel(order="C")],
        }
    return doc


def _json_dump(doc):
    # repr-based float formatting keeps 17-digit round trips via json floats
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def emit_snapshot(state, path, config_hash="", run_label=""):
    doc = snapshot_document(state, config_hash, run_label)
    _write_atomic(path, _json_dump(doc) + "\n")
    return path


def load_snapshot(path):
    """Parse a snapshot file; rejects unknown schema versions."""
    with open(path, "r") as fh:
        doc = json.load(fh)
    ver = doc.get("schema_version")
    if ver != SNAPSHOT_SCHEMA_VERSION:
        raise ConfigError([f"snapshot schema_version {ver} not supported "
                           f"(reader handles {SNAPSHOT_SCHEMA_VERSION})"])
    return doc


def resave_snapshot(doc, path):
    """Round-trip helper: re-emit a loaded snapshot document verbatim."""
    _write_atomic(path, _json_dump(doc) + "\n")
    return path


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
