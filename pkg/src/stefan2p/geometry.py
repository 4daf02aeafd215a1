"""Reference interface geometry, periodic mollification, and moving-normal calculus.

The reference interface is a closed curve z(theta) sampled on a uniform
angular grid, by default the counterclockwise circle of radius r_gamma,
optionally perturbed by a truncated Fourier series of the radius.  All
derived fields (tangent, normal, signed curvature) come from exact termwise
differentiation of that truncated series.

Sign convention: the curvature is H = (z2' z1'' - z1' z2'') / |z'|^3, which
gives H = -1/R on the counterclockwise circle.  The `clockwise` flag reverses
the parameterization (H = +1/R) for callers who want the opposite sign; all
downstream formulas use 1 + H*h consistently either way.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import DegenerateInterfaceError, GeometryError


@dataclass
class ReferenceGeometry:
    """Fixed reference interface Gamma plus the outer circle of radius r_outer."""

    r_gamma: float
    r_outer: float
    n_theta: int
    theta: np.ndarray          # (n_theta,) uniform angles in [0, 2pi)
    z: np.ndarray              # (n_theta, 2) curve samples
    zp: np.ndarray             # (n_theta, 2) dz/dtheta
    zpp: np.ndarray            # (n_theta, 2) d2z/dtheta2
    norm_zp: np.ndarray        # (n_theta,) |z'|
    tau: np.ndarray            # (n_theta, 2) unit tangent
    N: np.ndarray              # (n_theta, 2) unit normal pointing into Omega+
    H: np.ndarray              # (n_theta,) signed curvature
    perturb: list = field(default_factory=list)
    clockwise: bool = False

    @property
    def is_circle(self):
        return not self.perturb

    @property
    def k_max(self):
        """Default truncation for height-function modes (alias control)."""
        return self.n_theta // 4


def _radius_series(theta, r_gamma, perturb):
    """R(theta) and its first two theta-derivatives from [[k, a, b], ...]."""
    R = np.full_like(theta, float(r_gamma))
    Rp = np.zeros_like(theta)
    Rpp = np.zeros_like(theta)
    for k, a, b in perturb:
        k = int(k)
        c, s = np.cos(k * theta), np.sin(k * theta)
        R += a * c + b * s
        Rp += k * (-a * s + b * c)
        Rpp += k * k * (-a * c - b * s)
    return R, Rp, Rpp


def build_reference_geometry(r_gamma, r_outer, n_theta, perturb=None, clockwise=False):
    """Construct the sampled reference interface and its derived fields.

    perturb is a list of [k, amp_cos, amp_sin] radius perturbations.  The
    curve must remain star-shaped (R(theta) > 0) and strictly inside the
    outer circle; violations raise GeometryError.
    """
    if not (r_outer > r_gamma > 0):
        raise GeometryError(f"need r_outer > r_gamma > 0, got {r_gamma}, {r_outer}")
    if n_theta < 32 or (n_theta & (n_theta - 1)) != 0:
        raise GeometryError(f"n_theta must be a power of two >= 32, got {n_theta}")
    perturb = [list(p) for p in (perturb or [])]

    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    sgn = -1.0 if clockwise else 1.0
    th = sgn * theta
    R, Rp, Rpp = _radius_series(th, r_gamma, perturb)
    if np.min(R) <= 0.0:
        raise GeometryError("perturbed radius is not positive: curve not simple")
    if np.max(R) >= r_outer:
        raise GeometryError("perturbed interface touches or crosses the outer circle")

    c, s = np.cos(th), np.sin(th)
    e_r = np.stack([c, s], axis=1)
    e_t = np.stack([-s, c], axis=1)
    z = R[:, None] * e_r
    # d/dtheta of z(sgn*theta) picks up one sgn per derivative
    zp = sgn * (Rp[:, None] * e_r + R[:, None] * e_t)
    zpp = (Rpp - R)[:, None] * e_r + 2.0 * Rp[:, None] * e_t

    norm_zp = np.hypot(zp[:, 0], zp[:, 1])
    tau = zp / norm_zp[:, None]
    if clockwise:
        N = np.stack([-zp[:, 1], zp[:, 0]], axis=1) / norm_zp[:, None]
    else:
        N = np.stack([zp[:, 1], -zp[:, 0]], axis=1) / norm_zp[:, None]
    # outward means pointing away from the enclosed region (into Omega+)
    if np.mean(np.sum(N * e_r, axis=1)) < 0:
        raise GeometryError("normal orientation check failed")
    H = (zp[:, 1] * zpp[:, 0] - zp[:, 0] * zpp[:, 1]) / norm_zp**3

    return ReferenceGeometry(
        r_gamma=float(r_gamma), r_outer=float(r_outer), n_theta=int(n_theta),
        theta=theta, z=z, zp=zp, zpp=zpp, norm_zp=norm_zp, tau=tau, N=N, H=H,
        perturb=perturb, clockwise=bool(clockwise),
    )


# ---------------------------------------------------------------------------
# periodic mollifier


def _bump(x):
    out = np.zeros_like(np.asarray(x, dtype=float))
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - np.asarray(x)[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def bump_normalization():
    """C with C * integral of exp(-1/(1-x^2)) over (-1,1) equal to 1."""
    mass, _ = quad(lambda x: float(np.exp(-1.0 / (1.0 - x * x))), -1.0, 1.0,
                   epsabs=1e-14, epsrel=1e-14)
    return 1.0 / mass


@lru_cache(maxsize=None)
def mollifier_symbol(sigma, k_max):
    """Fourier multiplier m_sigma(k), k = 0..k_max, of the bump convolution.

    m_sigma(k) = C * int_{-1}^{1} exp(-1/(1-x^2)) cos(k sigma x) dx.
    Real, even in k, m(0) = 1, |m(k)| <= 1.
    """
    if sigma <= 0.0:
        raise GeometryError(f"mollifier radius must be positive, got {sigma}")
    if sigma >= np.pi:
        raise GeometryError(f"mollifier support 2*{sigma} exceeds the period")
    C = bump_normalization()
    m = np.empty(k_max + 1)
    for k in range(k_max + 1):
        val, _ = quad(lambda x: np.exp(-1.0 / (1.0 - x * x)) * np.cos(k * sigma * x),
                      -1.0, 1.0, epsabs=1e-14, epsrel=1e-14, limit=200)
        m[k] = C * val
    m[0] = 1.0
    return m


def mollify(f, sigma, power=1):
    """Apply Lambda_sigma^power to samples on the uniform angular grid."""
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    m = mollifier_symbol(float(sigma), n // 2)
    return np.fft.irfft(np.fft.rfft(f) * m**power, n)


# ---------------------------------------------------------------------------
# height function


@dataclass
class HeightState:
    """Interface height as a truncated Fourier series, modes 0..k_max.

    coeffs[k] is the complex coefficient of e^{i k theta}; the negative modes
    are implied by conjugate symmetry, so the represented function is
    h(theta) = coeffs[0].real + 2 Re sum_{k>=1} coeffs[k] e^{i k theta}.
    d1..d3 hold the same-layout coefficients of h_t, h_tt, h_ttt when known.
    """

    coeffs: np.ndarray
    t: float = 0.0
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None

    @property
    def k_max(self):
        return len(self.coeffs) - 1

    @classmethod
    def zero(cls, k_max, t=0.0):
        return cls(coeffs=np.zeros(k_max + 1, dtype=complex), t=t)

    @classmethod
    def from_modes(cls, modes, k_max, t=0.0):
        """Build from [[k, amp_cos, amp_sin], ...]."""
        c = np.zeros(k_max + 1, dtype=complex)
        for k, a, b in modes:
            k = int(k)
            if k > k_max:
                raise DegenerateInterfaceError(
                    f"height mode {k} above truncation k_max={k_max}")
            if k == 0:
                c[0] += a
            else:
                c[k] += 0.5 * (a - 1j * b)
        return cls(coeffs=c, t=t)

    @classmethod
    def from_samples(cls, samples, k_max, t=0.0):
        samples = np.asarray(samples, dtype=float)
        n = len(samples)
        c = np.fft.rfft(samples)[: k_max + 1] / n
        return cls(coeffs=c, t=t)

    def samples(self, n_theta):
        return coeff_samples(self.coeffs, n_theta)

    def copy(self):
        return HeightState(
            coeffs=self.coeffs.copy(), t=self.t,
            d1=None if self.d1 is None else self.d1.copy(),
            d2=None if self.d2 is None else self.d2.copy(),
            d3=None if self.d3 is None else self.d3.copy(),
        )


def coeff_samples(coeffs, n_theta):
    """Evaluate half-spectrum coefficients on the n_theta uniform grid."""
    spec = np.zeros(n_theta // 2 + 1, dtype=complex)
    spec[: len(coeffs)] = coeffs
    return np.fft.irfft(spec * n_theta, n_theta)


def samples_to_coeffs(samples, k_max):
    samples = np.asarray(samples, dtype=float)
    return np.fft.rfft(samples)[: k_max + 1] / len(samples)


def smooth_height_coeffs(coeffs, kappa, power=2):
    """Lambda_kappa^power acting mode-wise on height coefficients."""
    if kappa == 0.0:
        return coeffs.copy()
    m = mollifier_symbol(float(kappa), len(coeffs) - 1)
    return coeffs * m**power


def regularized_height(h, kappa):
    """h^kappa = Lambda_kappa Lambda_kappa h (identity when kappa == 0)."""
    out = h.copy()
    out.coeffs = smooth_height_coeffs(h.coeffs, kappa, power=2)
    if h.d1 is not None:
        out.d1 = smooth_height_coeffs(h.d1, kappa, power=2)
    if h.d2 is not None:
        out.d2 = smooth_height_coeffs(h.d2, kappa, power=2)
    if h.d3 is not None:
        out.d3 = smooth_height_coeffs(h.d3, kappa, power=2)
    return out


# ---------------------------------------------------------------------------
# tangential calculus on Gamma


def tangential_derivative(geom, f):
    """d/darclength on Gamma: (1/|z'|) df/dtheta by spectral differentiation."""
    f = np.asarray(f, dtype=float)
    n = geom.n_theta
    k = np.arange(n // 2 + 1)
    df = np.fft.irfft(np.fft.rfft(f) * (1j * k), n)
    return df / geom.norm_zp


def moving_normal(geom, h):
    """Normal geometry of the interface graph z + h N over Gamma.

    Returns (n, n_tilde, g) with
      n       = (-dbar(h) tau + (1 + H h) N) / sqrt(g),
      n_tilde = n / (n . N) = N - (dbar(h) / (1 + H h)) tau,
      g       = dbar(h)^2 + (1 + H h)^2.
    """
    hs = h.samples(geom.n_theta) if isinstance(h, HeightState) else np.asarray(h, float)
    hb = tangential_derivative(geom, hs)
    one = 1.0 + geom.H * hs
    if np.min(one) <= 0.0:
        raise DegenerateInterfaceError(
            f"1 + H h reached {np.min(one):.3e}: interface left the normal bundle")
    g = hb**2 + one**2
    n = (-hb[:, None] * geom.tau + one[:, None] * geom.N) / np.sqrt(g)[:, None]
    n_tilde = geom.N - (hb / one)[:, None] * geom.tau
    return n, n_tilde, g


def validate_height(geom, h):
    """Raise DegenerateInterfaceError unless all HeightState invariants hold."""
    hs = h.samples(geom.n_theta)
    amp = np.max(np.abs(hs))
    if amp >= geom.r_outer - geom.r_gamma or amp >= geom.r_gamma:
        raise DegenerateInterfaceError(
            f"|h|_inf = {amp:.3e} leaves the annular safety band")
    one = 1.0 + geom.H * hs
    if np.min(one) <= 0.0:
        raise DegenerateInterfaceError(
            f"1 + H h reached {np.min(one):.3e}")
    hb = tangential_derivative(geom, hs)
    if np.min(hb**2 + one**2) <= 0.0:
        raise DegenerateInterfaceError("metric factor g vanished")
