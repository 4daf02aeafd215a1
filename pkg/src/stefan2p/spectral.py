"""First eigenpairs of the reference domains and the derived run constants.

The first Dirichlet eigenfunctions of the disc and of the annulus are radial,
so the inverse power iteration acts on the k = 0 radial operator
u'' + u'/r assembled at 4th order (the disc rows fold across the origin with
even parity, edge closures are widened biased stencils).  The annulus is also
solved with a Neumann outer row, because the temperature in the outer phase
physically decays at that mixed rate; both values are kept and callers choose
which one a formula wants.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DegenerateDataError, SolverError
from .grid import fornberg_weights
from .heat import gamma_normal_derivative, pulled_back_gradient


def _radial_rows(r, rows, nodes, parity=None):
    """Operator rows of u'' + u'/r on the given nodes for the listed rows.

    parity=+1 folds negative-radius stencil nodes across the origin (disc);
    None means plain biased stencils (annulus).  4th order throughout.
    """
    n = len(nodes)
    L = np.zeros((len(rows), n))
    half = 2
    for out_i, j in enumerate(rows):
        if parity is not None and j - half < 0:
            idx = np.arange(j - half, j + half + 1)
            xs = np.array([nodes[i] if i >= 0 else -nodes[-1 - i] for i in idx])
            w = fornberg_weights(nodes[j], xs, 2) + fornberg_weights(nodes[j], xs, 1) / nodes[j]
            for i, wi in zip(idx, w):
                L[out_i, i if i >= 0 else -1 - i] += wi if i >= 0 else parity * wi
            continue
        lo, hi = j - half, j + half
        if lo < 0:
            lo, hi = 0, min(5, n - 1)
        elif hi > n - 1:
            lo, hi = max(n - 6, 0), n - 1
        idx = np.arange(lo, hi + 1)
        w = fornberg_weights(nodes[j], nodes[idx], 2) + fornberg_weights(nodes[j], nodes[idx], 1) / nodes[j]
        L[out_i, idx] += w
    return L


def _inverse_power(A, weight, tol=1e-12, max_iter=500):
    """Smallest eigenpair of A by inverse iteration, Rayleigh quotient in the
    weight-scaled inner product; eigenvector sign-fixed positive."""
    n = A.shape[0]
    lu = lu_factor(A)
    x = np.ones(n)
    lam = 0.0
    for _ in range(max_iter):
        y = lu_solve(lu, x)
        y /= np.sqrt(np.sum(weight * y * y))
        lam_new = np.sum(weight * y * (A @ y))
        if abs(lam_new - lam) <= tol * abs(lam_new):
            x = y
            lam = lam_new
            break
        lam, x = lam_new, y
    else:
        raise SolverError("inverse power iteration did not converge")
    if np.sum(x * weight) < 0:
        x = -x
    return lam, x


def first_dirichlet_eigenpair(grid):
    """(lambda_1, phi_1) of -Laplace with zero Dirichlet data on the phase
    domain; phi_1 is returned on the full (n_theta, n_r) grid, positive and
    L2-normalized by grid quadrature."""
    r = grid.r
    n = grid.n_r
    if grid.phase == "minus":
        rows = list(range(n - 1))              # last node is the Dirichlet row
        L = _radial_rows(r, rows, r, parity=+1)[:, : n - 1]
        lam, u = _inverse_power(-L, weight=grid.wq[: n - 1])
        phi = np.concatenate([u, [0.0]])
    else:
        rows = list(range(1, n - 1))           # both end nodes Dirichlet
        L = _radial_rows(r, rows, r)[:, 1 : n - 1]
        lam, u = _inverse_power(-L, weight=grid.wq[1 : n - 1])
        phi = np.concatenate([[0.0], u, [0.0]])
    return _normalized_pair(grid, lam, phi)


def first_mixed_eigenpair(grid):
    """(lambda, phi) on the annulus with Dirichlet data on Gamma and a
    homogeneous Neumann condition on the outer circle."""
    if grid.phase != "plus":
        raise SolverError("mixed eigenpair is defined on the annulus phase")
    r = grid.r
    n = grid.n_r
    # unknowns j = 1..n-1; Neumann row eliminated: u'(r_outer) = 0
    wN = fornberg_weights(r[-1], r[n - 6 :], 1)
    L = _radial_rows(r, list(range(1, n - 1)), r)
    L_int = L[:, 1 : n - 1]
    L_b = L[:, n - 1]
    # u_b = -(w_I . u_I) / w_b with w over the last 6 nodes
    coeff = np.zeros(n - 2)
    coeff[-5:] = wN[:-1]
    coeff = -coeff / wN[-1]
    A = L_int + np.outer(L_b, coeff)
    lam, u = _inverse_power(-A, weight=grid.wq[1 : n - 1])
    ub = float(coeff @ u)
    phi = np.concatenate([[0.0], u, [ub]])
    return _normalized_pair(grid, lam, phi)


def _normalized_pair(grid, lam, phi_radial):
    phi2d = np.tile(phi_radial, (grid.n_theta, 1))
    nrm = np.sqrt(grid.integrate(phi2d**2))
    phi2d /= nrm
    return float(lam), phi2d


@dataclass
class SpectralConstants:
    """Eigenvalues of the reference domains and every derived rate/ratio."""

    lambda1_minus: float
    lambda1_plus: float
    lambda1_plus_mixed: float
    phi1_minus: np.ndarray
    phi1_plus: np.ndarray
    phi1_plus_mixed: np.ndarray
    eta: float
    lambda1: float = 0.0
    c1_minus: float = 0.0
    c1_plus: float = 0.0
    K_minus: float = 0.0
    K_plus: float = 0.0
    k_minus: float = 0.0
    k_plus: float = 0.0
    beta_minus: float = 0.0
    beta_plus: float = 0.0
    beta_plus_mixed: float = 0.0
    sigma_minus: float = 0.0
    sigma_plus: float = 0.0
    gamma_minus: float = 0.0
    gamma_plus: float = 0.0

    def finish(self):
        self.lambda1 = min(self.lambda1_minus, self.lambda1_plus)
        self.beta_minus = 2.0 * self.lambda1_minus - self.eta
        self.beta_plus = 2.0 * self.lambda1_plus - self.eta
        self.beta_plus_mixed = 2.0 * self.lambda1_plus_mixed - self.eta
        self.sigma_minus = self.lambda1_minus - self.lambda1 + 0.5 * self.eta
        self.sigma_plus = self.lambda1_plus - self.lambda1 + 0.5 * self.eta
        self.gamma_minus = 2.0 * self.lambda1_minus - self.lambda1
        self.gamma_plus = 2.0 * self.lambda1_plus - self.lambda1
        return self


def compute_eigenstructure(grids, eta):
    lam_m, phi_m = first_dirichlet_eigenpair(grids["minus"])
    lam_p, phi_p = first_dirichlet_eigenpair(grids["plus"])
    lam_pm, phi_pm = first_mixed_eigenpair(grids["plus"])
    return SpectralConstants(
        lambda1_minus=lam_m, lambda1_plus=lam_p, lambda1_plus_mixed=lam_pm,
        phi1_minus=phi_m, phi1_plus=phi_p, phi1_plus_mixed=phi_pm, eta=float(eta),
    ).finish()


def derived_constants(q0_minus, q0_plus, constants, grids):
    """Fill the data-dependent constants c1, K, k from the initial fields.

    k uses |c1| in the denominator so that sign-admissible data yields a
    positive ratio for both phases.
    """
    from .diagnostics import interior_sobolev_norm

    gm, gp = grids["minus"], grids["plus"]
    c1m = gm.integrate(q0_minus * constants.phi1_minus)
    c1p = gp.integrate(q0_plus * constants.phi1_plus)
    if c1m == 0.0 or c1p == 0.0:
        raise DegenerateDataError("initial temperature orthogonal to the first "
                                  "eigenfunction: c1 = 0")
    constants.c1_minus, constants.c1_plus = float(c1m), float(c1p)

    for tag, q0, g in (("minus", q0_minus, gm), ("plus", q0_plus, gp)):
        l2 = interior_sobolev_norm(q0, g, 0)
        h4 = interior_sobolev_norm(q0, g, 4, surrogate=True)
        if l2 == 0.0:
            raise DegenerateDataError(f"zero initial temperature in phase {tag}")
        x0 = float(np.min(gamma_normal_derivative(g, q0)))
        c1 = constants.c1_minus if tag == "minus" else constants.c1_plus
        K = h4 / l2
        kq = x0 / abs(c1)
        if tag == "minus":
            constants.K_minus, constants.k_minus = float(K), float(kq)
        else:
            constants.K_plus, constants.k_plus = float(K), float(kq)
    return constants


@dataclass
class AdmissibilityReport:
    x0_minus: float
    x0_plus: float
    rt_delta: float
    rt_ok_minus: bool
    rt_ok_plus: bool
    sign_ok_minus: bool
    sign_ok_plus: bool
    compat1_residual_minus: float
    compat1_residual_plus: float
    compat_outer_flux_residual: float
    compat_outer_second_residual: float
    compat2_residual_minus: float
    compat2_residual_plus: float

    @property
    def rt_ok(self):
        return self.rt_ok_minus and self.rt_ok_plus

    @property
    def passed(self):
        return self.rt_ok and self.sign_ok_minus and self.sign_ok_plus


def check_admissibility(state, constants, delta):
    """Report-only admissibility check of the current (usually initial) data.

    Covers the interface lower bound on dq/dN against delta, the interior
    sign conditions, and the residuals of the zeroth/first/second order
    compatibility identities; the second-order ones are magnitudes only.
    """
    from .dynamics import interface_velocity_samples, time_derivative_seeds

    geom = state.geom
    gm, gp = state.grids["minus"], state.grids["plus"]
    qm, qp = state.fields["minus"].q, state.fields["plus"].q
    mm, mp = state.maps["minus"], state.maps["plus"]

    x0m = float(np.min(gamma_normal_derivative(gm, qm)))
    x0p = float(np.min(gamma_normal_derivative(gp, qp)))

    interior_m = qm[:, : gm.gamma_index]
    interior_p = qp[:, 1:]
    sign_m = bool(np.all(interior_m < 0.0))
    sign_p = bool(np.all(interior_p[:, :-1] > 0.0))

    g1 = interface_velocity_samples(state)
    seeds = time_derivative_seeds(state, g1)

    res1 = {}
    res2 = {}
    for tag, g, q, m in (("minus", gm, qm, mm), ("plus", gp, qp, mp)):
        from .heat import ale_laplacian
        lap = ale_laplacian(g, q, m)
        F, _ = pulled_back_gradient(g, q, m)
        FN = np.einsum("tj,tj->t", F[:, g.gamma_index, :], geom.N)
        r = lap[:, g.gamma_index] - FN * g1
        res1[tag] = float(np.max(np.abs(r)))
        res2[tag] = _compat2_residual(state, tag, seeds, g1)

    # outer boundary conditions for the plus phase
    Fp, _ = pulled_back_gradient(gp, qp, mp)
    nvec = np.stack([gp.cos[:, 0], gp.sin[:, 0]], axis=-1)
    flux = np.einsum("tj,tj->t", Fp[:, gp.outer_index, :], nvec)
    outer1 = float(np.max(np.abs(flux)))
    outer2 = _outer_second_residual(state, seeds)

    return AdmissibilityReport(
        x0_minus=x0m, x0_plus=x0p, rt_delta=float(delta),
        rt_ok_minus=x0m >= delta, rt_ok_plus=x0p >= delta,
        sign_ok_minus=sign_m, sign_ok_plus=sign_p,
        compat1_residual_minus=res1["minus"], compat1_residual_plus=res1["plus"],
        compat_outer_flux_residual=outer1,
        compat_outer_second_residual=outer2,
        compat2_residual_minus=res2["minus"], compat2_residual_plus=res2["plus"],
    )


def _grad_matrix(grid, w):
    """gradw[..., i, j] = d w^i / d x^j for a vector field."""
    out = np.empty(w.shape[:2] + (2, 2))
    for i in range(2):
        gx, gy = grid.grad_xy(w[..., i])
        out[..., i, 0] = gx
        out[..., i, 1] = gy
    return out


def _compat2_residual(state, tag, seeds, g1):
    """Magnitude of the second-order interior compatibility identity on Gamma."""
    from .heat import ale_laplacian

    g = state.grids[tag]
    geom = state.geom
    q = state.fields[tag].q
    m = state.maps[tag]
    A, w = m.A, m.w
    F, grad = pulled_back_gradient(g, q, m)
    dF = _grad_matrix(g, F)
    gradw = _grad_matrix(g, w)
    lap = ale_laplacian(g, q, m)
    lap2 = ale_laplacian_of(g, lap, m)

    # T1 = A^i_l w^l,_s A^s_j (A^k_j q,_k),_i
    T1 = np.einsum("...il,...ls,...sj,...ij->...", A, gradw, A, dF)
    # T2 = A^i_j (A^k_l w^l,_s A^s_j q,_k),_i
    P = np.einsum("...kl,...ls,...sj,...k->...j", A, gradw, A, grad)
    dP = _grad_matrix(g, P)
    T2 = np.einsum("...ij,...ij->...", A, dP)
    # T3 = A^i_k w^k,_l A^l_j q,_i N^j g1, on Gamma only
    T3_field = np.einsum("...ik,...kl,...lj,...i->...j", A, gradw, A, grad)
    row = g.gamma_index
    T3 = np.einsum("tj,tj->t", T3_field[:, row, :], geom.N) * g1
    # T4 = grad_Psi(Delta_Psi q + F.w) . N g1
    S = lap + np.einsum("...j,...j->...", F, w)
    FS, _ = pulled_back_gradient(g, S, m)
    T4 = np.einsum("tj,tj->t", FS[:, row, :], geom.N) * g1
    # T5 = F.N g2
    g2 = seeds["g2"]
    T5 = np.einsum("tj,tj->t", F[:, row, :], geom.N) * g2
    # T6 = Delta_Psi(F.w)
    T6 = ale_laplacian_of(g, np.einsum("...j,...j->...", F, w), m)[:, row]

    resid = (-lap2[:, row] + T1[:, row] + T2[:, row] + T3 - T4 - T5 - T6)
    return float(np.max(np.abs(resid)))


def ale_laplacian_of(grid, f, m):
    """Delta_Psi applied to an arbitrary scalar grid field."""
    F, _ = pulled_back_gradient(grid, f, m)
    dF = _grad_matrix(grid, F)
    return np.einsum("...ij,...ij->...", m.A, dF)


def _outer_second_residual(state, seeds):
    """Magnitude of the second outer-boundary compatibility condition."""
    from .heat import ale_laplacian

    g = state.grids["plus"]
    q = state.fields["plus"].q
    m = state.maps["plus"]
    A, w = m.A, m.w
    F, grad = pulled_back_gradient(g, q, m)
    gradw = _grad_matrix(g, w)
    lap = ale_laplacian(g, q, m)
    Flap, _ = pulled_back_gradient(g, lap, m)
    Fw, _ = pulled_back_gradient(g, np.einsum("...j,...j->...", F, w), m)
    T3_field = np.einsum("...il,...ls,...sj,...i->...j", A, gradw, A, grad)
    row = g.outer_index
    nvec = np.stack([g.cos[:, 0], g.sin[:, 0]], axis=-1)
    resid = (np.einsum("tj,tj->t", Flap[:, row, :], nvec)
             + np.einsum("tj,tj->t", Fw[:, row, :], nvec)
             - np.einsum("tj,tj->t", T3_field[:, row, :], nvec))
    return float(np.max(np.abs(resid)))
