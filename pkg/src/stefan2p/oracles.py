"""Brute-force reference computations, kept disjoint from the main solver.

These use their own differentiation and integration paths (series-evaluated
Bessel functions with bisection, RK4 shooting, a front-fixed 1D two-phase
solver with 3-point stencils and explicit substepping) so that agreement with
the spectral/IMEX stack is evidence rather than tautology.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OracleDomainError, SolverError


# ---------------------------------------------------------------------------
# Bessel oracle


def bessel_j0(x):
    """J0 by its ascending series; adequate for the root window used here."""
    x = float(x)
    term = 1.0
    total = 1.0
    q = -0.25 * x * x
    for m in range(1, 200):
        term *= q / (m * m)
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def bessel_j0_first_zero():
    """First positive zero of J0, bisected in (2, 3) to ~1e-13."""
    lo, hi = 2.0, 3.0
    flo = bessel_j0(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = bessel_j0(mid)
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def eigen_oracle_disc(R):
    """First Dirichlet eigenvalue of the disc of radius R: (j01 / R)^2."""
    if R <= 0:
        raise OracleDomainError(f"radius must be positive, got {R}")
    j01 = bessel_j0_first_zero()
    return (j01 / R) ** 2


# ---------------------------------------------------------------------------
# radial shooting oracle (annulus eigenvalues)


def _shoot(lam, r_in, r_out, n=4096):
    """Integrate u'' + u'/r + lam u = 0 from (u, u') = (0, 1) at r_in by RK4;
    returns (u, u') at r_out."""
    h = (r_out - r_in) / n
    u, p = 0.0, 1.0
    r = r_in

    def f(r, u, p):
        return p, -p / r - lam * u

    for _ in range(n):
        k1u, k1p = f(r, u, p)
        k2u, k2p = f(r + 0.5 * h, u + 0.5 * h * k1u, p + 0.5 * h * k1p)
        k3u, k3p = f(r + 0.5 * h, u + 0.5 * h * k2u, p + 0.5 * h * k2p)
        k4u, k4p = f(r + h, u + h * k3u, p + h * k3p)
        u += h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
        p += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        r += h
    return u, p


def annulus_eigen_oracle(r_in, r_out, outer="dirichlet", n=4096):
    """First radial eigenvalue of the annulus with Dirichlet data at r_in and
    the given outer condition, by shooting plus bisection."""
    if not (r_out > r_in > 0):
        raise OracleDomainError("need r_out > r_in > 0")
    pick = 0 if outer == "dirichlet" else 1

    def objective(lam):
        return _shoot(lam, r_in, r_out, n)[pick]

    guess = (np.pi / (r_out - r_in)) ** 2
    lo = 1e-3 * guess
    flo = objective(lo)
    lam_hi = None
    for lam in np.linspace(0.02 * guess, 4.0 * guess, 400):
        f = objective(lam)
        if flo * f < 0.0:
            lam_hi = lam
            break
        lo, flo = lam, f
    if lam_hi is None:
        raise SolverError("no sign change found for the shooting objective")
    hi = lam_hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        fm = objective(mid)
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# annulus harmonic oracle


def annulus_harmonic_oracle(k, inner_data, r_in, r_out, outer_data=0.0):
    """Closed-form modal coefficients (a, b) of the harmonic field
    a r^k + b r^-k (a + b ln r for k = 0) matching the two boundary values;
    returns (a, b, evaluator)."""
    if not (r_out > r_in > 0):
        raise OracleDomainError("need r_out > r_in > 0")
    k = int(k)
    if k == 0:
        M = np.array([[1.0, np.log(r_in)], [1.0, np.log(r_out)]])
        a, b = np.linalg.solve(M, [inner_data, outer_data])

        def ev(r):
            return a + b * np.log(r)
    else:
        M = np.array([[r_in**k, r_in**(-k)], [r_out**k, r_out**(-k)]])
        a, b = np.linalg.solve(M, [inner_data, outer_data])

        def ev(r):
            return a * np.asarray(r, float)**k + b * np.asarray(r, float)**(-k)

    return float(a), float(b), ev


# ---------------------------------------------------------------------------
# 1D radial two-phase front-fixing oracle


@dataclass
class RadialOracleResult:
    times: np.ndarray
    R_of_t: np.ndarray
    xi_inner: np.ndarray        # fixed inner coordinates in (0, 1]
    zeta_outer: np.ndarray      # fixed outer coordinates in [0, 1]
    q_minus: np.ndarray         # profiles at the saved times, (n_save, n)
    q_plus: np.ndarray


def radial_two_phase_oracle(R0, q0_minus, q0_plus, r_outer, t_end,
                            n_cells=256, n_save=21, safety=0.35):
    """Front-fixed (Landau) method-of-lines solve of the radial two-phase
    problem with the jump law V = d/dr p(minus) - d/dr p(plus) at the front.

    q0_minus(r), q0_plus(r) are callables on [0, R0] and [R0, r_outer].
    Explicit substepping; 3-point stencils; one-sided 4-point front
    derivatives.  The front must stay strictly inside (0, r_outer).
    """
    n = int(n_cells)
    # inner: half-offset nodes, last node exactly at xi = 1 (the front)
    dxi = 1.0 / (n - 0.5)
    xi = (np.arange(n) + 0.5) * dxi
    # outer: uniform nodes including both ends
    dze = 1.0 / (n - 1)
    ze = np.arange(n) * dze

    R = float(R0)
    u = np.array([q0_minus(x * R) for x in xi], dtype=float)
    w = np.array([q0_plus(R + z * (r_outer - R)) for z in ze], dtype=float)
    u[-1] = 0.0
    w[0] = 0.0

    # one-sided 4-point first derivatives at the front, 3rd order
    wfr = np.array([11.0, -18.0, 9.0, -2.0]) / (6.0 * dxi)   # backward, at xi=1
    wfl = np.array([-11.0, 18.0, -9.0, 2.0]) / (6.0 * dze)   # forward, at zeta=0

    times = [0.0]
    Rs = [R]
    saves_u = [u.copy()]
    saves_w = [w.copy()]
    save_at = np.linspace(0.0, t_end, n_save)
    next_save = 1

    t = 0.0
    guard = 4.0 * dxi * R0
    while t < t_end - 1e-15:
        L = r_outer - R
        if R < guard or L < guard:
            raise OracleDomainError(
                f"front at R = {R:.4f} collided with a wall at t = {t:.5f}")
        dt = safety * min(dxi**2 * R**2, dze**2 * L**2) / 4.0
        dt = min(dt, t_end - t)

        dudxi_front = float(wfr @ u[[-1, -2, -3, -4]])
        dwdze_front = float(wfl @ w[[0, 1, 2, 3]])
        V = dudxi_front / R - dwdze_front / L

        # inner phase: u_t = u_xx / R^2 + u_x (1/(xi R^2) + xi Rdot / R)
        un = np.empty_like(u)
        uxx = np.empty_like(u)
        ux = np.empty_like(u)
        uxx[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dxi**2
        ux[1:-1] = (u[2:] - u[:-2]) / (2 * dxi)
        # mirror across the origin (even symmetry)
        uxx[0] = (u[1] - 2 * u[0] + u[0]) / dxi**2
        ux[0] = (u[1] - u[0]) / (2 * dxi)
        adv_u = ux * (1.0 / (xi * R**2) + xi * V / R)
        un[:-1] = u[:-1] + dt * (uxx[:-1] / R**2 + adv_u[:-1])
        un[-1] = 0.0

        # outer phase: w_t = w_zz / L^2 + w_z (1/(L r) + (1 - z) Rdot / L)
        wn = np.empty_like(w)
        rz = R + ze * L
        wzz = np.empty_like(w)
        wz = np.empty_like(w)
        wzz[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2]) / dze**2
        wz[1:-1] = (w[2:] - w[:-2]) / (2 * dze)
        # Neumann mirror at the outer wall
        wzz[-1] = (w[-2] - 2 * w[-1] + w[-2]) / dze**2
        wz[-1] = 0.0
        adv_w = wz * (1.0 / (L * rz) + (1.0 - ze) * V / L)
        wn[1:] = w[1:] + dt * (wzz[1:] / L**2 + adv_w[1:])
        wn[0] = 0.0

        u, w = un, wn
        R += dt * V
        t += dt
        while next_save < n_save and t >= save_at[next_save] - 1e-12:
            times.append(t)
            Rs.append(R)
            saves_u.append(u.copy())
            saves_w.append(w.copy())
            next_save += 1

    return RadialOracleResult(
        times=np.array(times), R_of_t=np.array(Rs),
        xi_inner=xi, zeta_outer=ze,
        q_minus=np.array(saves_u), q_plus=np.array(saves_w),
    )
