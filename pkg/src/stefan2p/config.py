"""Configuration schema and parsing.

Configs are flat-section key = value documents (INI syntax); values are
Python/JSON literals, e.g.

    [geometry]
    r_gamma = 1.0
    perturb = [[3, 0.05, 0.0]]

Validation collects every violation before raising, and unknown keys name
the nearest valid key.  The eta < lambda1 bound can only be checked after
the eigensolve and is enforced by the run initializer.
"""

import ast
import configparser
import difflib
import hashlib
from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class SimConfig:
    geometry_r_gamma: float = 1.0
    geometry_r_outer: float = 2.0
    geometry_n_theta: int = 256
    geometry_perturb: list = field(default_factory=list)
    grid_n_r_minus: int = 64
    grid_n_r_plus: int = 64
    ale_kappa: float = 0.0
    ale_tol: float = 1e-10
    time_dt: float = 1e-3
    time_t_end: float = 0.1
    time_cfl_advective: float = 0.5
    time_on_cfl: str = "warn"
    time_diag_every: int = 10
    time_coupled_iterations: int = 1
    time_freeze_interface: bool = False
    init_h0: list = field(default_factory=list)
    init_q0_preset: str = "zero"
    init_q0_scale: float = 1.0
    init_q0_file: str = ""
    analysis_eta: float = 0.2
    analysis_rt_delta: float = 1e-6
    analysis_enforce_admissibility: bool = False
    diag_nu: float = 0.25
    diag_order_cap: int = 2
    diag_emit_weights: bool = True
    diag_eps: float = 0.1
    diag_ctilde: float = 2.0
    diag_clower: float = 0.05
    diag_include_third_derivatives: bool = False
    output_dir: str = ""
    output_format: str = "csv+json"
    output_snap_every: int = 0
    run_label: str = ""
    run_max_seconds: float = 0.0
    config_hash: str = ""


_KEY_ALIASES = {
    # the smoothing radius may be given without its section qualifier
    ("init", "kappa"): "ale_kappa",
    ("time", "kappa"): "ale_kappa",
}

_BOOL_KEYS = {"time_freeze_interface", "analysis_enforce_admissibility",
              "diag_emit_weights", "diag_include_third_derivatives"}


def _known_keys():
    return [f.name for f in fields(SimConfig) if f.name != "config_hash"]


def _coerce(name, raw, violations):
    default = getattr(SimConfig(), name)
    try:
        val = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        val = raw.strip().strip('"').strip("'")
    if name in _BOOL_KEYS:
        if isinstance(val, bool):
            return val
        if str(val).lower() in ("true", "1", "yes"):
            return True
        if str(val).lower() in ("false", "0", "no"):
            return False
        violations.append(f"{name}: expected a boolean, got {raw!r}")
        return default
    if isinstance(default, float) and isinstance(val, (int, float)):
        return float(val)
    if isinstance(default, int) and isinstance(val, int):
        return val
    if isinstance(default, str):
        return str(val)
    if isinstance(default, list):
        if isinstance(val, (list, tuple)):
            return [list(x) if isinstance(x, (list, tuple)) else x for x in val]
        violations.append(f"{name}: expected a list literal, got {raw!r}")
        return default
    violations.append(f"{name}: cannot interpret value {raw!r}")
    return default


def _validate(cfg, violations):
    if not cfg.geometry_r_outer > cfg.geometry_r_gamma > 0:
        violations.append(
            f"geometry: need r_outer > r_gamma > 0, got r_gamma = "
            f"{cfg.geometry_r_gamma}, r_outer = {cfg.geometry_r_outer}")
    if cfg.geometry_n_theta < 32 or cfg.geometry_n_theta & (cfg.geometry_n_theta - 1):
        violations.append("geometry.n_theta must be a power of two >= 32")
    for nr_name in ("grid_n_r_minus", "grid_n_r_plus"):
        if getattr(cfg, nr_name) < 8:
            violations.append(f"{nr_name.replace('_', '.', 1)} must be >= 8")
    if cfg.time_dt <= 0:
        violations.append(f"time.dt must be > 0, got {cfg.time_dt}")
    if cfg.time_t_end <= 0:
        violations.append(f"time.t_end must be > 0, got {cfg.time_t_end}")
    if cfg.time_on_cfl not in ("warn", "abort"):
        violations.append('time.on_cfl must be "warn" or "abort"')
    if cfg.time_diag_every < 1:
        violations.append("time.diag_every must be >= 1")
    if cfg.ale_kappa < 0:
        violations.append("ale.kappa must be >= 0")
    if cfg.analysis_eta <= 0:
        violations.append("analysis.eta must be > 0 (checked against lambda1 "
                          "after the eigensolve)")
    if cfg.init_q0_preset not in ("zero", "eigen", "radial_affine", "file"):
        violations.append(f"init.q0_preset {cfg.init_q0_preset!r} not one of "
                          "zero|eigen|radial_affine|file")
    if cfg.init_q0_preset == "file" and not cfg.init_q0_file:
        violations.append("init.q0_preset = file requires init.q0_file")
    if cfg.init_q0_file:
        import os
        if not os.path.exists(cfg.init_q0_file):
            violations.append(f"init.q0_file {cfg.init_q0_file!r} does not exist")
    if cfg.diag_order_cap < 0 or cfg.diag_order_cap > 4:
        violations.append("diag.order_cap must be in 0..4")
    if cfg.diag_nu <= 0:
        violations.append("diag.nu must be > 0")
    for mode in cfg.init_h0:
        if not (isinstance(mode, list) and len(mode) == 3):
            violations.append(f"init.h0 entries must be [k, amp_cos, amp_sin], "
                              f"got {mode!r}")
    for p in cfg.geometry_perturb:
        if not (isinstance(p, list) and len(p) == 3):
            violations.append(f"geometry.perturb entries must be "
                              f"[k, amp_cos, amp_sin], got {p!r}")


def parse_config(path):
    """Parse and validate a config file; raises ConfigError listing every
    violation rather than failing on the first."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"])
    parser.read_string(text)

    cfg = SimConfig()
    violations = []
    known = _known_keys()
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = _KEY_ALIASES.get((section, key), f"{section}_{key}")
            if name not in known:
                close = difflib.get_close_matches(
                    name, known, n=1, cutoff=0.4)
                hint = (f"; nearest valid key is "
                        f"{close[0].replace('_', '.', 1)!r}" if close else "")
                violations.append(f"unknown key {section}.{key}{hint}")
                continue
            setattr(cfg, name, _coerce(name, raw, violations))
    _validate(cfg, violations)
    if violations:
        raise ConfigError(violations)
    cfg.config_hash = hashlib.sha256(text.encode()).hexdigest()[:16]
    return cfg


def config_from_dict(values):
    """Programmatic configs (tests); same validation as parse_config."""
    cfg = SimConfig()
    violations = []
    known = _known_keys()
    for name, val in values.items():
        if name not in known:
            raise ConfigError([f"unknown key {name}"])
        setattr(cfg, name, val)
    _validate(cfg, violations)
    if violations:
        raise ConfigError(violations)
    cfg.config_hash = hashlib.sha256(repr(sorted(values.items()))
                                     .encode()).hexdigest()[:16]
    return cfg
