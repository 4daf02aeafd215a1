"""Coupled time loop: map solve, heat step, interface update, diagnostics.

Per step the maps are solved for the current height (smoothed height when
kappa > 0), the map velocity is the harmonic extension of the latest
interface velocity, both heat equations advance one IMEX step, fresh boundary
traces give the jump velocity h_t = [v . n~]+-, and the height coefficients
advance by forward Euler.  An optional fixed-point iteration repeats the
sweep within the step.

Initial-time derivatives (q_t, q_tt, h_t, h_tt at t = 0) are seeded from the
time-differentiated equations so that reports at t = 0 carry the same
component set as later times.
"""

import time as _time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import ale, heat
from .diagnostics import attach_flags, build_report, monitor_bootstrap
from .errors import (CflError, ConfigError, DegenerateDataError,
                     DegenerateInterfaceError, DivergenceError)
from .geometry import (HeightState, build_reference_geometry, moving_normal,
                       mollify, regularized_height, samples_to_coeffs,
                       tangential_derivative, validate_height)
from .grid import PhaseGrid
from .heat import (PhaseField, apply_boundary_conditions, boundary_trace_v,
                   compute_gradient_v, pulled_back_gradient)
from .spectral import (check_admissibility, compute_eigenstructure,
                       derived_constants)

PHASES = ("minus", "plus")


@dataclass
class SimulationState:
    geom: object
    grids: dict
    h: HeightState
    fields: dict                 # phase -> PhaseField
    maps: dict = field(default_factory=dict)
    t: float = 0.0
    step_index: int = 0
    kappa: float = 0.0
    h_t_samples: np.ndarray | None = None
    constants: object = None
    seeds: dict | None = None
    history: dict = field(default_factory=dict)
    _map_key: object = None

    def __post_init__(self):
        for tag in PHASES:
            self.history.setdefault(f"q_{tag}", deque(maxlen=3))
            self.history.setdefault(f"v_{tag}", deque(maxlen=3))

    # -- time-derivative access (backward differences, seeded at t = 0) -----

    def _hist_derivative(self, kind, tag, order):
        hist = self.history[f"{kind}_{tag}"]
        seeds = self.seeds or {}
        seed1 = seeds.get(f"{kind}_t", {}).get(tag)
        seed2 = seeds.get(f"{kind}_tt", {}).get(tag)
        if order == 1:
            if len(hist) >= 2:
                (t0, f0), (t1, f1) = hist[-2], hist[-1]
                return (f1 - f0) / (t1 - t0)
            return seed1 if self.step_index == 0 else None
        if order == 2:
            if len(hist) >= 3:
                (t0, f0), (t1, f1), (t2, f2) = hist[-3], hist[-2], hist[-1]
                dt = t2 - t1
                return (f2 - 2.0 * f1 + f0) / dt**2
            if len(hist) == 2 and seed1 is not None:
                (t0, f0), (t1, f1) = hist[-2], hist[-1]
                dt = t1 - t0
                return ((f1 - f0) / dt - seed1) / dt
            return seed2 if self.step_index == 0 else None
        return None

    def q_derivative(self, tag, order):
        return self._hist_derivative("q", tag, order)

    def v_derivative(self, tag, order):
        return self._hist_derivative("v", tag, order)

    def w_t_field(self, tag):
        """Psi_tt as the harmonic extension of h_tt N (exact in the modal
        solve), available once d2 is known."""
        if self.h.d2 is None:
            return None
        from .geometry import coeff_samples
        h_tt = coeff_samples(self.h.d2, self.geom.n_theta)
        return ale.velocity_extension(self.geom, self.grids[tag], h_tt, self.kappa)

    def push_history(self):
        for tag in PHASES:
            self.history[f"q_{tag}"].append((self.t, self.fields[tag].q.copy()))
            self.history[f"v_{tag}"].append((self.t, self.fields[tag].v.copy()))


# ---------------------------------------------------------------------------
# interface operations


def interface_velocity(v_plus_trace, v_minus_trace, geom, h):
    """Jump velocity h_t = (v+ - v-) . n~ on Gamma from boundary traces."""
    _, n_tilde, _ = moving_normal(geom, h)
    jump = v_plus_trace - v_minus_trace
    return np.einsum("tj,tj->t", jump, n_tilde)


def interface_velocity_samples(state):
    """h_t from the current fields, using the kappa-smoothed normal."""
    for tag in PHASES:
        if state.fields[tag].v is None:
            state.fields[tag].v = compute_gradient_v(
                state.fields[tag], state.maps[tag], state.grids[tag])
    vp = boundary_trace_v(state.grids["plus"], state.fields["plus"].v)
    vm = boundary_trace_v(state.grids["minus"], state.fields["minus"].v)
    h_eff = (regularized_height(state.h, state.kappa)
             if state.kappa > 0.0 else state.h)
    return interface_velocity(vp, vm, state.geom, h_eff)


def step_interface(h, h_t_samples, dt, kappa, geom):
    """Forward-Euler update of the height coefficients; histories of h_t and
    h_tt advance by backward differences."""
    k_max = h.k_max
    ht_coeffs = samples_to_coeffs(h_t_samples, k_max)
    out = HeightState(coeffs=h.coeffs + dt * ht_coeffs, t=h.t + dt)
    out.d1 = ht_coeffs
    if h.d1 is not None:
        out.d2 = (ht_coeffs - h.d1) / dt
        if h.d2 is not None:
            out.d3 = (out.d2 - h.d2) / dt
    validate_height(geom, out)
    return out


# ---------------------------------------------------------------------------
# initial-time seeding


def time_derivative_seeds(state, g1_samples, freeze=False):
    """Equation-based q_t, q_tt, v_t, h_tt at the current (initial) time."""
    geom = state.geom
    kappa = state.kappa
    seeds = {"g1": g1_samples, "q_t": {}, "q_tt": {}, "v_t": {}, "w_t": {}}

    g1_geom = mollify(g1_samples, kappa, power=2) if kappa > 0.0 else g1_samples
    h_eff = regularized_height(state.h, kappa) if kappa > 0.0 else state.h
    hs = h_eff.samples(geom.n_theta)
    one = 1.0 + geom.H * hs
    hb = tangential_derivative(geom, hs)
    g1b = tangential_derivative(geom, g1_geom)
    _, n_tilde, _ = moving_normal(geom, hs)
    # d/dt of n~ = tau (dbar(h_t)/(1+Hh) - dbar(h) H h_t / (1+Hh)^2)
    nt_t = geom.tau * (g1b / one - hb * geom.H * g1_geom / one**2)[:, None]

    per = {}
    for tag in PHASES:
        g = state.grids[tag]
        m = state.maps[tag]
        q = state.fields[tag].q
        F, grad = pulled_back_gradient(g, q, m)
        lap = heat.ale_laplacian(g, q, m)
        q_t = lap + np.einsum("...j,...j->...", F, m.w)
        gradw = _grad_matrix(g, m.w)
        A_t = -np.einsum("...ia,...ab,...bj->...ij", m.A, gradw, m.A)
        gx, gy = g.grad_xy(q_t)
        grad_qt = np.stack([gx, gy], axis=-1)
        F_t = (np.einsum("...kj,...k->...j", A_t, grad)
               + np.einsum("...kj,...k->...j", m.A, grad_qt))
        v_t = -F_t
        per[tag] = dict(F=F, grad=grad, lap=lap, q_t=q_t, A_t=A_t, F_t=F_t,
                        v_t=v_t, grad_qt=grad_qt)
        seeds["q_t"][tag] = q_t
        seeds["v_t"][tag] = v_t

    # g2 = [v_t . n~] + [v . n~_t]
    rows = {tag: state.grids[tag].gamma_index for tag in PHASES}
    vt_jump = (per["plus"]["v_t"][:, rows["plus"], :]
               - per["minus"]["v_t"][:, rows["minus"], :])
    v_jump = (-per["plus"]["F"][:, rows["plus"], :]
              + per["minus"]["F"][:, rows["minus"], :])
    g2 = (np.einsum("tj,tj->t", vt_jump, n_tilde)
          + np.einsum("tj,tj->t", v_jump, nt_t))
    if freeze:
        g2 = np.zeros_like(g2)
    seeds["g2"] = g2

    for tag in PHASES:
        g = state.grids[tag]
        m = state.maps[tag]
        p = per[tag]
        w_t = ale.velocity_extension(geom, g, g2, kappa)
        seeds["w_t"][tag] = w_t
        dF = _grad_matrix(g, p["F"])
        dFt = _grad_matrix(g, p["F_t"])
        dt_lap = (np.einsum("...ij,...ij->...", p["A_t"], dF)
                  + np.einsum("...ij,...ij->...", m.A, dFt))
        q_tt = (dt_lap
                + np.einsum("...j,...j->...", p["F_t"], m.w)
                + np.einsum("...j,...j->...", p["F"], w_t))
        seeds["q_tt"][tag] = q_tt
    return seeds


def _grad_matrix(grid, w):
    out = np.empty(w.shape[:2] + (2, 2))
    for i in range(2):
        gx, gy = grid.grad_xy(w[..., i])
        out[..., i, 0] = gx
        out[..., i, 1] = gy
    return out


# ---------------------------------------------------------------------------
# initialization


def radial_affine_profiles(r_gamma, r_outer, scale):
    """Smooth radial initial profiles with interface slopes scale/2 (solid)
    and scale (liquid), so the initial jump velocity is -scale/2 and the
    front moves monotonically.  Shared with the 1D oracle tests."""
    L = r_outer - r_gamma

    def q0_minus(r):
        return -0.5 * scale * (r_gamma**2 - np.asarray(r, float)**2) / (2.0 * r_gamma)

    def q0_plus(r):
        return scale * (2.0 * L / np.pi) * np.sin(
            0.5 * np.pi * (np.asarray(r, float) - r_gamma) / L)

    return q0_minus, q0_plus


def _radial_preset_fields(geom, grids, scale):
    q0m, q0p = radial_affine_profiles(geom.r_gamma, geom.r_outer, scale)
    qm = np.tile(q0m(grids["minus"].r), (geom.n_theta, 1))
    qp = np.tile(q0p(grids["plus"].r), (geom.n_theta, 1))
    return qm, qp


def build_initial_fields(cfg, geom, grids, constants):
    preset = cfg.init_q0_preset
    scale = cfg.init_q0_scale
    if preset == "zero":
        qm = np.zeros((geom.n_theta, grids["minus"].n_r))
        qp = np.zeros((geom.n_theta, grids["plus"].n_r))
    elif preset == "eigen":
        qm = -scale * constants.phi1_minus
        qp = scale * constants.phi1_plus_mixed
    elif preset == "radial_affine":
        qm, qp = _radial_preset_fields(geom, grids, scale)
    elif preset == "file":
        from .io import load_snapshot
        snap = load_snapshot(cfg.init_q0_file)
        qm = np.array(snap["q_minus"]["data"]).reshape(snap["q_minus"]["shape"])
        qp = np.array(snap["q_plus"]["data"]).reshape(snap["q_plus"]["shape"])
        if qm.shape != (geom.n_theta, grids["minus"].n_r):
            raise ConfigError(f"init.q0_file grid {qm.shape} does not match "
                              f"({geom.n_theta}, {grids['minus'].n_r})")
    else:
        raise ConfigError(f"unknown init.q0_preset {preset!r}")
    fm = PhaseField(phase="minus", q=qm, t=0.0)
    fp = PhaseField(phase="plus", q=qp, t=0.0)
    return {"minus": fm, "plus": fp}


def _solve_maps(state):
    """Solve both phase maps for (h, h_t); cached on identical inputs."""
    ht = state.h_t_samples
    key = (state.kappa, state.h.coeffs.tobytes(),
           None if ht is None else ht.tobytes())
    if key == state._map_key and state.maps:
        return
    for tag in PHASES:
        state.maps[tag] = ale.assemble_map(
            state.geom, state.grids[tag], state.h,
            h_t_samples=ht, kappa=state.kappa)
    state._map_key = key


def initialize(cfg):
    """Build geometry, grids, constants, fields and the seeded state."""
    geom = build_reference_geometry(cfg.geometry_r_gamma, cfg.geometry_r_outer,
                                    cfg.geometry_n_theta, cfg.geometry_perturb)
    grids = {"minus": PhaseGrid("minus", geom, cfg.grid_n_r_minus),
             "plus": PhaseGrid("plus", geom, cfg.grid_n_r_plus)}
    constants = compute_eigenstructure(grids, cfg.analysis_eta)
    if not (0.0 < cfg.analysis_eta < constants.lambda1):
        raise ConfigError(
            [f"analysis.eta = {cfg.analysis_eta} must lie in (0, lambda1 = "
             f"{constants.lambda1:.6g}): eta is a small constant relative to "
             "the slowest eigenvalue"])

    h0 = HeightState.from_modes(cfg.init_h0, k_max=geom.k_max)
    validate_height(geom, h0)
    fields = build_initial_fields(cfg, geom, grids, constants)
    state = SimulationState(geom=geom, grids=grids, h=h0, fields=fields,
                            kappa=cfg.ale_kappa, constants=constants)
    state.h_t_samples = np.zeros(geom.n_theta)
    _solve_maps(state)
    for tag in PHASES:
        apply_boundary_conditions(state.fields[tag], grids[tag], state.maps[tag])
        state.fields[tag].v = compute_gradient_v(
            state.fields[tag], state.maps[tag], grids[tag])

    try:
        constants = derived_constants(fields["minus"].q, fields["plus"].q,
                                      constants, grids)
    except DegenerateDataError:
        if cfg.init_q0_preset != "zero":
            raise
    state.constants = constants

    g1 = interface_velocity_samples(state)
    if cfg.time_freeze_interface:
        g1 = np.zeros_like(g1)
    state.h_t_samples = g1
    state.h.d1 = samples_to_coeffs(g1, state.h.k_max)
    # re-solve maps so w matches the seeded h_t before seeding derivatives
    _solve_maps(state)
    seeds = time_derivative_seeds(state, g1, freeze=cfg.time_freeze_interface)
    state.seeds = seeds
    state.h.d2 = samples_to_coeffs(seeds["g2"], state.h.k_max)
    state.push_history()
    return state


# ---------------------------------------------------------------------------
# the loop


@dataclass
class RunResult:
    series: list
    monitor: dict
    state: SimulationState
    admissibility: object
    truncated: bool = False
    csv_path: str | None = None
    snapshot_paths: list = field(default_factory=list)


def _cfl_check(state, dt, c_adv, policy):
    wmax = max(float(np.max(np.abs(state.maps[tag].w))) for tag in PHASES)
    if wmax == 0.0:
        return
    dx = min(state.grids[tag].dr for tag in PHASES)
    limit = c_adv * dx / wmax
    if dt > limit:
        msg = (f"advective CFL violated: dt = {dt:.3e} > {limit:.3e} "
               f"(max |w| = {wmax:.3e})")
        if policy == "abort":
            raise CflError(msg)
        import warnings
        warnings.warn(msg, RuntimeWarning, stacklevel=2)


def _one_sweep(state, dt, freeze):
    """Map solve, heat step, traces; returns (new_fields, h_t_new)."""
    _solve_maps(state)
    new_fields = {}
    for tag in PHASES:
        fld = state.fields[tag]
        apply_boundary_conditions(fld, state.grids[tag], state.maps[tag])
        new_fields[tag] = heat.step_heat(fld, state.maps[tag], dt,
                                         state.grids[tag])
        new_fields[tag].v = compute_gradient_v(
            new_fields[tag], state.maps[tag], state.grids[tag])
    probe = SimulationState(
        geom=state.geom, grids=state.grids, h=state.h, fields=new_fields,
        maps=state.maps, t=state.t + dt, kappa=state.kappa,
        constants=state.constants)
    h_t_new = interface_velocity_samples(probe)
    if freeze:
        h_t_new = np.zeros_like(h_t_new)
    return new_fields, h_t_new


def run_simulation(cfg, out_dir=None):
    """Run the configured simulation; returns a RunResult.

    Emits the time-series CSV and snapshot JSON files into out_dir (or
    cfg.output_dir) when set.  Deterministic for a fixed config.
    """
    from .io import emit_snapshot, emit_timeseries

    state = initialize(cfg)
    constants = state.constants
    adm = check_admissibility(state, constants, cfg.analysis_rt_delta)
    if cfg.analysis_enforce_admissibility and not adm.passed:
        raise DegenerateDataError(
            f"initial data inadmissible: X- = {adm.x0_minus:.3e}, "
            f"X+ = {adm.x0_plus:.3e} vs delta = {adm.rt_delta:.3e}")

    dt = cfg.time_dt
    n_steps = int(round(cfg.time_t_end / dt))
    out_dir = out_dir or (cfg.output_dir or None)
    budget = cfg.run_max_seconds
    t_start = _time.monotonic()
    truncated = False

    def make_report():
        return build_report(state, constants, nu=cfg.diag_nu,
                            kappa=state.kappa, order_cap=cfg.diag_order_cap,
                            include_d3=cfg.diag_include_third_derivatives,
                            emit_weights=cfg.diag_emit_weights)

    series = [make_report()]
    snaps = []
    result = RunResult(series=series, monitor={}, state=state,
                       admissibility=adm)

    def snapshot(label):
        if out_dir:
            from pathlib import Path
            p = Path(out_dir) / f"snapshot_{label}.json"
            emit_snapshot(state, str(p), config_hash=cfg.config_hash,
                          run_label=cfg.run_label)
            snaps.append(str(p))

    snapshot("000000")
    try:
        for step in range(1, n_steps + 1):
            sweeps = max(1, cfg.time_coupled_iterations)
            base_fields = state.fields
            for sweep in range(sweeps):
                try:
                    new_fields, h_t_new = _one_sweep(state, dt,
                                                     cfg.time_freeze_interface)
                except DivergenceError as exc:
                    raise DivergenceError(f"step {step}: {exc}") from exc
                if sweep < sweeps - 1:
                    state.h_t_samples = h_t_new
                    state.fields = base_fields
            if not cfg.time_freeze_interface:
                state.h = step_interface(state.h, h_t_new, dt, state.kappa,
                                         state.geom)
            else:
                state.h.t += dt
            state.fields = new_fields
            state.h_t_samples = h_t_new
            state.t += dt
            state.step_index = step
            state.push_history()
            _cfl_check(state, dt, cfg.time_cfl_advective, cfg.time_on_cfl)

            if step % cfg.time_diag_every == 0 or step == n_steps:
                series.append(make_report())
                if cfg.output_snap_every and step % cfg.output_snap_every == 0:
                    snapshot(f"{step:06d}")
            if budget and _time.monotonic() - t_start > budget:
                truncated = True
                break
    except (DegenerateInterfaceError, DivergenceError):
        snapshot("abort")
        raise

    monitor = monitor_bootstrap(series, constants, eps=cfg.diag_eps,
                                ctilde=cfg.diag_ctilde, clower=cfg.diag_clower)
    attach_flags(series, monitor)
    result.monitor = monitor
    result.truncated = truncated
    snapshot("final")
    if out_dir:
        from pathlib import Path
        csv_path = str(Path(out_dir) / "timeseries.csv")
        emit_timeseries(series, csv_path, order_cap=cfg.diag_order_cap)
        result.csv_path = csv_path
    result.snapshot_paths = snaps
    return result
