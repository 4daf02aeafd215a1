"""Fixed polar reference grids and their differentiation/quadrature operators.

Phase minus lives on the disc 0 < r <= r_gamma with a half-cell offset at the
origin (nodes r_j = (j+1/2) dr, no node at r = 0); phase plus on the annulus
r_gamma <= r <= r_outer with uniform nodes including both boundaries.

Angular differentiation is spectral (rfft).  Radial differentiation uses
4th-order centered stencils in the interior; on the disc the rows nearest the
origin fold across r = 0 with the parity (-1)^k of each angular mode, and at
physical boundaries the last row is a one-sided 3rd-order stencil (the
boundary-trace order) with a 4th-order biased row just inside.
"""

import numpy as np

from .errors import ConditioningError, GeometryError


def fornberg_weights(x0, xs, m):
    """Finite-difference weights of derivative order m at x0 on nodes xs."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def radial_derivative_matrix(r, m, left="onesided", parity=+1):
    """Dense (n, n) matrix for d^m/dr^m on nodes r.

    left="mirror": nodes extend across r=0 as r_{-1-i} = -r_i and the folded
    value carries the factor `parity` (angular-mode parity (-1)^k).
    left="onesided": biased stencils at the left edge (annulus).
    The extreme rows use (m+3)-node one-sided stencils (order 3); all other
    rows keep 4th order (5-node centered, or biased stencils widened to hold
    the order next to an edge).
    """
    r = np.asarray(r, dtype=float)
    n = len(r)
    D = np.zeros((n, n))
    half = 2
    widen = 1 if m == 1 else 2
    for j in range(n):
        if left == "mirror" and j - half < 0:
            idx = np.arange(j - half, j + half + 1)
            xs = np.array([r[i] if i >= 0 else -r[-1 - i] for i in idx])
            w = fornberg_weights(r[j], xs, m)
            for i, wi in zip(idx, w):
                if i >= 0:
                    D[j, i] += wi
                else:
                    D[j, -1 - i] += parity * wi
            continue
        if (j == 0 and left == "onesided") or (j == n - 1):
            width = m + 3
            lo = 0 if j == 0 else n - width
            hi = lo + width - 1
        else:
            lo, hi = j - half, j + half
            if lo < 0:
                lo, hi = 0, min(2 * half + widen, n - 1)
            elif hi > n - 1:
                lo, hi = max(n - 1 - 2 * half - widen, 0), n - 1
        idx = np.arange(lo, hi + 1)
        w = fornberg_weights(r[j], r[idx], m)
        D[j, idx] += w
    return D


class PhaseGrid:
    """One phase's polar grid plus cached operators.

    Attributes r (n_r,), theta (n_theta,), k (n_k,) angular wavenumbers of the
    half spectrum, quadrature weights wq with sum(wq)*dtheta = domain area.
    """

    def __init__(self, phase, geom, n_r):
        if phase not in ("minus", "plus"):
            raise GeometryError(f"unknown phase tag {phase!r}")
        if not geom.is_circle:
            raise GeometryError(
                "PDE grids require the unperturbed circular reference interface; "
                "perturbed curves are supported by the interface calculus only")
        self.phase = phase
        self.geom = geom
        self.n_r = int(n_r)
        self.n_theta = geom.n_theta
        self.theta = geom.theta
        self.dtheta = 2.0 * np.pi / self.n_theta
        self.n_k = self.n_theta // 2 + 1
        self.k = np.arange(self.n_k)

        if phase == "minus":
            self.dr = geom.r_gamma / (self.n_r - 0.5)
            self.r = (np.arange(self.n_r) + 0.5) * self.dr
            self.gamma_index = self.n_r - 1
            self.outer_index = None
        else:
            self.dr = (geom.r_outer - geom.r_gamma) / (self.n_r - 1)
            self.r = geom.r_gamma + np.arange(self.n_r) * self.dr
            self.gamma_index = 0
            self.outer_index = self.n_r - 1

        self._build_derivatives()
        self._build_quadrature()
        self._build_harmonic_profiles()
        self.cos = np.cos(self.theta)[:, None]
        self.sin = np.sin(self.theta)[:, None]
        self._heat_steppers = {}

    # -- operators ----------------------------------------------------------

    def _build_derivatives(self):
        if self.phase == "minus":
            self.D1 = {
                +1: radial_derivative_matrix(self.r, 1, left="mirror", parity=+1),
                -1: radial_derivative_matrix(self.r, 1, left="mirror", parity=-1),
            }
            self.D2 = {
                +1: radial_derivative_matrix(self.r, 2, left="mirror", parity=+1),
                -1: radial_derivative_matrix(self.r, 2, left="mirror", parity=-1),
            }
        else:
            D1 = radial_derivative_matrix(self.r, 1, left="onesided")
            D2 = radial_derivative_matrix(self.r, 2, left="onesided")
            self.D1 = {+1: D1, -1: D1}
            self.D2 = {+1: D2, -1: D2}
        self._even = (self.k % 2 == 0)

    def _build_quadrature(self):
        # per-node weights w_j approximating integral f r dr over the cell
        w = np.zeros(self.n_r)
        if self.phase == "minus":
            w[:] = self.r * self.dr                      # midpoint, exact for r
            w[-1] = 0.5 * self.dr * (self.r[-1] - 0.25 * self.dr)  # boundary half-cell
        else:
            w[:] = self.r * self.dr
            w[0] *= 0.5
            w[-1] *= 0.5
        self.wq = w

    def _build_harmonic_profiles(self):
        """Radial factors of the modal harmonic extension on this phase."""
        g = self.geom
        k = self.k.astype(float)
        if self.phase == "minus":
            # (r / r_gamma)^k, bounded at the origin (r > 0 on the offset grid)
            logr = np.log(self.r / g.r_gamma)
            self.profile_gamma = np.exp(k[:, None] * logr[None, :])
        else:
            # basis phi1 = (r/r_out)^k, phi2 = (r_gamma/r)^k; k=0 pair (1, ln r/r_gamma)
            phi1 = np.exp(k[:, None] * np.log(self.r / g.r_outer)[None, :])
            phi2 = np.exp(k[:, None] * np.log(g.r_gamma / self.r)[None, :])
            phi1[0] = 1.0
            phi2[0] = np.log(self.r / g.r_gamma)
            self.basis = (phi1, phi2)
            # boundary-value matrix per mode: [[phi1(Rg), phi2(Rg)], [phi1(Ro), phi2(Ro)]]
            a11 = phi1[:, 0]
            a12 = phi2[:, 0]
            a21 = phi1[:, -1]
            a22 = phi2[:, -1]
            det = a11 * a22 - a12 * a21
            if np.any(np.abs(det) < 1e-13):
                raise ConditioningError(
                    "annulus modal system ill-conditioned: radii ratio "
                    f"{g.r_outer / g.r_gamma:.3e} too close to 1")
            self.bv_inv = (a11, a12, a21, a22, det)

    # -- spectral/radial differentiation -------------------------------------

    def rfft(self, f):
        return np.fft.rfft(f, axis=0)

    def irfft(self, fh):
        return np.fft.irfft(fh, self.n_theta, axis=0)

    def diff_r_hat(self, fh, order=1):
        """Radial derivative acting on the half-spectrum (n_k, n_r)."""
        D = self.D1 if order == 1 else self.D2
        out = np.empty_like(fh)
        ev = self._even
        out[ev] = fh[ev] @ D[+1].T
        out[~ev] = fh[~ev] @ D[-1].T
        return out

    def diff_theta_hat(self, fh, order=1):
        return fh * (1j * self.k[:, None]) ** order

    def diff_r(self, f, order=1):
        return self.irfft(self.diff_r_hat(self.rfft(f), order))

    def diff_theta(self, f, order=1):
        return self.irfft(self.diff_theta_hat(self.rfft(f), order))

    def grad_xy(self, f):
        """Cartesian gradient (f_x, f_y) of a scalar sampled on the grid."""
        fh = self.rfft(f)
        fr = self.irfft(self.diff_r_hat(fh))
        ft = self.irfft(self.diff_theta_hat(fh)) / self.r[None, :]
        fx = self.cos * fr - self.sin * ft
        fy = self.sin * fr + self.cos * ft
        return fx, fy

    def tangential(self, f, order=1):
        """dbar^order f = ((1/r) d/dtheta)^order f on the circular geometry."""
        out = f
        for _ in range(order):
            out = self.diff_theta(out) / self.r[None, :]
        return out

    # -- integrals ------------------------------------------------------------

    def integrate(self, f):
        """Integral of f over the phase domain (area measure)."""
        return float(self.dtheta * np.sum(f @ self.wq))

    def gamma_arc_integral(self, f):
        """Integral over Gamma of samples f(theta) (arclength measure)."""
        return float(np.sum(f * self.geom.norm_zp) * self.dtheta)

    # -- modal harmonic extension ----------------------------------------------

    def harmonic_extension_hat(self, data_gamma_hat, data_outer_hat=None):
        """Half-spectrum harmonic field with the given boundary mode data.

        Disc: single Dirichlet trace on Gamma.  Annulus: traces on Gamma and
        on the outer circle (zero if not supplied).
        """
        if self.phase == "minus":
            return data_gamma_hat[:, None] * self.profile_gamma
        if data_outer_hat is None:
            data_outer_hat = np.zeros_like(data_gamma_hat)
        a11, a12, a21, a22, det = self.bv_inv
        ca = (a22 * data_gamma_hat - a12 * data_outer_hat) / det
        cb = (-a21 * data_gamma_hat + a11 * data_outer_hat) / det
        phi1, phi2 = self.basis
        return ca[:, None] * phi1 + cb[:, None] * phi2

    def harmonic_extension(self, data_gamma, data_outer=None):
        """Real-space harmonic extension of boundary samples."""
        dg = np.fft.rfft(np.asarray(data_gamma, float))
        do = None if data_outer is None else np.fft.rfft(np.asarray(data_outer, float))
        return self.irfft(self.harmonic_extension_hat(dg, do))
