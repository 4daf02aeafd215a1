"""Harmonic-extension coordinate maps and their derived tensor fields.

Each phase map Psi is the identity plus the harmonic extension of the
interface displacement h N (smoothed to h^kappa N when kappa > 0); on the
circle geometry the extension is exact modal interpolation, so the solve is
a pair of FFTs against precomputed radial profiles.  The gradient is
assembled by spectral differentiation in theta and 4th-order finite
differences in r, A is the per-node 2x2 inverse, and the map velocity w is by
default the harmonic extension of h_t N (finite differencing of consecutive
maps is kept as a cross-check path).
"""

from dataclasses import dataclass

import numpy as np

from .errors import MapDegeneracyError, GeometryError
from .geometry import HeightState, regularized_height


@dataclass
class AleMapData:
    phase: str
    Psi: np.ndarray        # (n_theta, n_r, 2) map values
    gradPsi: np.ndarray    # (n_theta, n_r, 2, 2), [i, j] = d Psi^i / d x^j
    A: np.ndarray          # (n_theta, n_r, 2, 2) inverse of gradPsi
    J: np.ndarray          # (n_theta, n_r) determinant
    w: np.ndarray          # (n_theta, n_r, 2) map velocity
    kappa: float = 0.0


def identity_map(grid):
    x = grid.cos * grid.r[None, :]
    y = grid.sin * grid.r[None, :]
    return np.stack([x, y], axis=-1)


def boundary_displacement(geom, h, kappa=0.0):
    """Samples of h^kappa N on Gamma, shape (n_theta, 2)."""
    if isinstance(h, HeightState):
        hk = regularized_height(h, kappa) if kappa > 0.0 else h
        hs = hk.samples(geom.n_theta)
    else:
        hs = np.asarray(h, dtype=float)
    return hs[:, None] * geom.N


def solve_harmonic_extension(geom, grid, h, kappa=0.0):
    """Map values Psi on the phase grid for interface height h.

    Each component of Psi - e is discrete-harmonic with trace h^kappa N on
    Gamma and (plus phase) zero on the outer circle.
    """
    disp = boundary_displacement(geom, h, kappa)
    u = np.stack(
        [grid.harmonic_extension(disp[:, 0]), grid.harmonic_extension(disp[:, 1])],
        axis=-1,
    )
    return identity_map(grid) + u


def velocity_extension(geom, grid, h_t_samples, kappa=0.0):
    """Map velocity w as the harmonic extension of (Lambda^2 h_t) N."""
    if kappa > 0.0:
        from .geometry import mollify
        h_t_samples = mollify(h_t_samples, kappa, power=2)
    disp = h_t_samples[:, None] * geom.N
    return np.stack(
        [grid.harmonic_extension(disp[:, 0]), grid.harmonic_extension(disp[:, 1])],
        axis=-1,
    )


def _grad_of_vector(grid, u):
    """dU[..., i, j] = d u^i / d x^j for a (n_theta, n_r, 2) field."""
    out = np.empty(u.shape[:2] + (2, 2))
    for i in range(2):
        gx, gy = grid.grad_xy(u[..., i])
        out[..., i, 0] = gx
        out[..., i, 1] = gy
    return out


def compute_map_data(geom, grid, psi_now, *, w=None, psi_prev=None, dt=None, kappa=0.0):
    """Assemble gradPsi, A, J and the velocity w into an AleMapData.

    Supply either an analytic velocity field `w` (preferred) or a previous
    map and time step for the finite-difference fallback.
    """
    u = psi_now - identity_map(grid)
    grad = _grad_of_vector(grid, u)
    grad[..., 0, 0] += 1.0
    grad[..., 1, 1] += 1.0

    J = grad[..., 0, 0] * grad[..., 1, 1] - grad[..., 0, 1] * grad[..., 1, 0]
    if np.min(J) <= 0.0:
        it, ir = np.unravel_index(np.argmin(J), J.shape)
        raise MapDegeneracyError(
            f"J = {J[it, ir]:.3e} <= 0 at node (theta_index={it}, r_index={ir}), "
            f"phase {grid.phase}")
    A = np.empty_like(grad)
    A[..., 0, 0] = grad[..., 1, 1] / J
    A[..., 1, 1] = grad[..., 0, 0] / J
    A[..., 0, 1] = -grad[..., 0, 1] / J
    A[..., 1, 0] = -grad[..., 1, 0] / J

    if w is None:
        if psi_prev is None or dt is None:
            raise ValueError("need either w or (psi_prev, dt)")
        w = (psi_now - psi_prev) / dt

    return AleMapData(phase=grid.phase, Psi=psi_now, gradPsi=grad, A=A, J=J,
                      w=w, kappa=kappa)


def assemble_map(geom, grid, h, h_t_samples=None, kappa=0.0):
    """Solve the phase map for height h and build all derived fields."""
    psi = solve_harmonic_extension(geom, grid, h, kappa)
    n = geom.n_theta
    if h_t_samples is None:
        h_t_samples = np.zeros(n)
    w = velocity_extension(geom, grid, h_t_samples, kappa)
    return compute_map_data(geom, grid, psi, w=w, kappa=kappa)


@dataclass
class MapValidation:
    phase: str
    max_a_dev: float            # max-norm of A - Id
    max_inverse_residual: float  # max-norm of A gradPsi - Id
    j_min: float
    j_max: float
    j_argmin: tuple
    harmonic_residual: float
    boundary_mismatch: float
    j_bounds_ok: bool
    passed: bool


def validate_map(m, h, geom, grid, tol=1e-10):
    """Inspection report for an assembled map; raises nothing."""
    dev = m.A.copy()
    dev[..., 0, 0] -= 1.0
    dev[..., 1, 1] -= 1.0
    max_a_dev = float(np.max(np.abs(dev)))

    prod = np.einsum("...ij,...jk->...ik", m.A, m.gradPsi)
    prod[..., 0, 0] -= 1.0
    prod[..., 1, 1] -= 1.0
    inv_res = float(np.max(np.abs(prod)))

    j_min = float(np.min(m.J))
    j_max = float(np.max(m.J))
    it, ir = np.unravel_index(np.argmin(m.J), m.J.shape)

    # discrete Laplacian of Psi - e, scaled by the displacement magnitude
    u = m.Psi - identity_map(grid)
    res = 0.0
    for i in range(2):
        gx, gy = grid.grad_xy(u[..., i])
        lap = grid.grad_xy(gx)[0] + grid.grad_xy(gy)[1]
        res = max(res, float(np.max(np.abs(lap))))
    scale = max(float(np.max(np.abs(u))), 1e-30)

    disp = boundary_displacement(geom, h, m.kappa)
    row = grid.gamma_index
    mismatch = float(np.max(np.abs(u[:, row, :] - disp)))

    j_ok = (0.5 <= j_min) and (j_max <= 1.5)
    passed = (inv_res < tol) and (mismatch < 1e-9) and j_ok
    return MapValidation(
        phase=m.phase, max_a_dev=max_a_dev, max_inverse_residual=inv_res,
        j_min=j_min, j_max=j_max, j_argmin=(int(it), int(ir)),
        harmonic_residual=res / scale, boundary_mismatch=mismatch,
        j_bounds_ok=j_ok, passed=passed,
    )
