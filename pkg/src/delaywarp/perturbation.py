"""Perturbative time-transformations for constant-plus-periodic delays.

Builds the first- and second-order expansions of the transformation h that
maps the new time lambda to the original time t, turning the time-varying
delay into the constant delay tau_star.  The expansion coefficients are

    b_k = a_k / (1 - exp(-j k omega tau0)),        b_0 = -sum_{k!=0} b_k,
    m_k = sum_l  j l omega a_l b_{k-l},
    c_k = m_k / (1 - exp(-j k omega tau0)),        c_0 = -sum_{k!=0} c_k,

with the second-order term carrying the linear drift (m_0/tau_star)*lambda.
A hard-coded closed form for the pure sinusoidal delay is provided as an
independent oracle against the generic series path.

All series are evaluated by direct summation (truncation orders are small);
transforms are immutable and safe for concurrent evaluation.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ResonanceError, TransformDomainError
from .periodic_delay import PeriodicDelay

# |1 - exp(-j k omega tau0)| thresholds: hard error below the first, warning
# below the second (b_k grows like the reciprocal, degrading validity early).
DENOMINATOR_FAIL = 1e-9
DENOMINATOR_WARN = 1e-3

_DOMAIN_SLACK = 1e-12


class TimeTransform:
    """Common surface of all time-transformations.

    Subclasses provide `_h(lam)` and `_h_dot(lam)` on float arrays; this
    base handles scalar/array conversion and the domain check
    lam >= -tau_star.  `oscillation_period` returns the fundamental period
    of h_dot in lambda when one exists (None otherwise).
    """

    tau_star = None
    eps = 0.0

    @property
    def domain_start(self):
        return -self.tau_star

    @property
    def oscillation_period(self):
        return None

    def h(self, lam):
        lam_arr = self._check_domain(lam)
        out = self._h(lam_arr)
        return float(out[0]) if np.isscalar(lam) else out

    def h_dot(self, lam):
        lam_arr = self._check_domain(lam)
        out = self._h_dot(lam_arr)
        return float(out[0]) if np.isscalar(lam) else out

    def _check_domain(self, lam):
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        if np.any(lam_arr < self.domain_start - _DOMAIN_SLACK):
            raise TransformDomainError(
                f"lambda {np.min(lam_arr)} below domain start {self.domain_start}"
            )
        return lam_arr


def _resonance_guard(k, omega, tau0):
    """Denominator 1 - exp(-j k omega tau0), guarded against resonance."""
    denom = 1.0 - np.exp(-1j * k * omega * tau0)
    mag = abs(denom)
    if mag < DENOMINATOR_FAIL:
        raise ResonanceError(
            f"harmonic k={k}: |1 - exp(-j k omega tau0)| = {mag:.3e} "
            f"(omega*tau0 = {omega * tau0:.6g} resonant)"
        )
    if mag < DENOMINATOR_WARN:
        warnings.warn(
            f"near-resonant harmonic k={k}: denominator magnitude {mag:.3e}",
            RuntimeWarning,
            stacklevel=3,
        )
    return denom


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Fourier data of a first- or second-order expansion.

    b maps harmonic index to the first-order coefficient (b_0 included);
    for order 2, m0 is the real drift coefficient and c holds the
    second-order harmonics.  K_out is the populated output band (2K for
    order 2: products of K-band series have band 2K).
    """

    order: int
    tau_star: float
    tau0: float
    omega: float
    b: dict
    m0: float = 0.0
    c: dict = field(default_factory=dict)
    K_out: int = 0

    def __post_init__(self):
        for name, coeffs in (("b", self.b), ("c", self.c)):
            for k, v in coeffs.items():
                mirror = coeffs.get(-k, 0.0 + 0.0j)
                if abs(mirror - v.conjugate()) > 1e-10 * max(1.0, abs(v)):
                    raise ValueError(f"{name}_-k != conj({name}_k) at k={k}")


def _require_hypotheses(delay):
    # Non-resonance is a hard requirement (the denominators vanish there);
    # the remaining hypotheses degrade accuracy gracefully, so they warn.
    report = delay.validate_hypotheses()
    if not report.resonance_ok:
        raise ResonanceError(
            f"omega*tau0 = {delay.omega * delay.tau0:.6g} within "
            f"{report.resonance_distance:.3g} rad of a multiple of pi"
        )
    if not report.passed:
        warnings.warn(
            "expansion hypotheses questionable: " + "; ".join(report.failures()),
            RuntimeWarning,
            stacklevel=3,
        )
    return report


def first_order_coeffs(delay: PeriodicDelay, tau_star: float) -> ExpansionCoefficients:
    """First-order expansion coefficients b_k for the given delay.

    Requires the expansion hypotheses (strict non-resonance in particular).
    """
    _require_hypotheses(delay)
    omega, tau0 = delay.omega, delay.tau0
    b = {}
    for k, ak in delay.shape.coeffs.items():
        if k == 0 or ak == 0.0:
            continue
        b[k] = ak / _resonance_guard(k, omega, tau0)
    b[0] = -sum(b.values()) if b else 0.0 + 0.0j
    return ExpansionCoefficients(
        order=1, tau_star=tau_star, tau0=tau0, omega=omega, b=b, K_out=delay.shape.K
    )


def second_order_coeffs(delay: PeriodicDelay, tau_star: float) -> ExpansionCoefficients:
    """Second-order expansion coefficients (b_k, m0, c_k).

    m_k is the exact discrete convolution of {j l omega a_l} with {b_k}
    over the populated band; no further truncation is applied.
    """
    first = first_order_coeffs(delay, tau_star)
    omega, tau0 = delay.omega, delay.tau0
    m = {}
    for l, al in delay.shape.coeffs.items():
        if l == 0 or al == 0.0:
            continue
        for kb, bk in first.b.items():
            k = l + kb
            m[k] = m.get(k, 0.0 + 0.0j) + 1j * l * omega * al * bk
    m0 = m.pop(0, 0.0 + 0.0j)
    if abs(m0.imag) > 1e-10 * max(1.0, abs(m0)):
        raise ValueError(f"drift coefficient m0 = {m0} has imaginary residue")
    c = {}
    for k, mk in m.items():
        if mk == 0.0:
            continue
        c[k] = mk / _resonance_guard(k, omega, tau0)
    c[0] = -sum(c.values()) if c else 0.0 + 0.0j
    return ExpansionCoefficients(
        order=2,
        tau_star=tau_star,
        tau0=tau0,
        omega=omega,
        b=first.b,
        m0=m0.real,
        c=c,
        K_out=2 * delay.shape.K,
    )


def _series_sum(coeffs, freq, lam, derivative):
    total = np.zeros(lam.shape, dtype=complex)
    for k, ck in coeffs.items():
        factor = 1j * k * freq * ck if derivative else ck
        total += factor * np.exp(1j * k * freq * lam)
    if np.any(np.abs(total.imag) > 1e-10 * np.maximum(1.0, np.abs(total))):
        raise ValueError("series evaluation has non-negligible imaginary part")
    return total.real


@dataclass(frozen=True)
class SeriesTransform(TimeTransform):
    """Perturbative transform evaluated from its Fourier coefficients."""

    coeffs: ExpansionCoefficients
    eps: float

    @property
    def order(self):
        return self.coeffs.order

    @property
    def tau_star(self):
        return self.coeffs.tau_star

    @property
    def oscillation_period(self):
        # h_dot repeats with the delay period mapped through h0.
        cf = self.coeffs
        return (2.0 * math.pi / cf.omega) * (cf.tau_star / cf.tau0)

    def _h(self, lam):
        cf = self.coeffs
        freq = cf.omega * cf.tau0 / cf.tau_star
        out = (cf.tau0 / cf.tau_star) * lam
        out = out + self.eps * _series_sum(cf.b, freq, lam, derivative=False)
        if cf.order >= 2:
            out = out + self.eps**2 * (
                (cf.m0 / cf.tau_star) * lam
                + _series_sum(cf.c, freq, lam, derivative=False)
            )
        return out

    def _h_dot(self, lam):
        cf = self.coeffs
        freq = cf.omega * cf.tau0 / cf.tau_star
        out = np.full(lam.shape, cf.tau0 / cf.tau_star)
        out = out + self.eps * _series_sum(cf.b, freq, lam, derivative=True)
        if cf.order >= 2:
            out = out + self.eps**2 * (
                cf.m0 / cf.tau_star + _series_sum(cf.c, freq, lam, derivative=True)
            )
        return out


def perturbative_transform(delay, tau_star, order):
    """Convenience constructor: order-1 or order-2 SeriesTransform."""
    if order == 1:
        coeffs = first_order_coeffs(delay, tau_star)
    elif order == 2:
        coeffs = second_order_coeffs(delay, tau_star)
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return SeriesTransform(coeffs=coeffs, eps=delay.eps)


@dataclass(frozen=True)
class SinusoidClosedForm(TimeTransform):
    """Hard-coded transform for tau(t) = tau0 + eps*sin(omega*t), tau_star = tau0.

    Used solely as an independent oracle against the generic series path.
    """

    order: int
    tau0: float
    omega: float
    eps: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        half = abs(math.sin(self.omega * self.tau0 / 2.0))
        if 2.0 * half < DENOMINATOR_FAIL:
            raise ResonanceError(
                f"omega*tau0 = {self.omega * self.tau0:.6g} resonant: "
                f"|sin(omega*tau0/2)| = {half:.3e}"
            )
        if self.order == 2:
            full = abs(math.sin(self.omega * self.tau0))
            if 2.0 * full < DENOMINATOR_FAIL:
                raise ResonanceError(
                    f"second order needs sin(omega*tau0) != 0, got {full:.3e}"
                )

    @property
    def tau_star(self):
        return self.tau0

    @property
    def oscillation_period(self):
        return 2.0 * math.pi / self.omega

    @property
    def drift_coefficient(self):
        """Second-order linear drift rate: -omega*cot(omega*tau0/2)/(4*tau0) * eps^2."""
        if self.order < 2:
            return 0.0
        th = self.omega * self.tau0
        return -self.omega / math.tan(th / 2.0) / (4.0 * self.tau0) * self.eps**2

    def _h(self, lam):
        w, t0, eps = self.omega, self.tau0, self.eps
        th = w * t0
        out = lam + eps * (np.cos(th / 2) - np.cos(w * lam + th / 2)) / (
            2 * np.sin(th / 2)
        )
        if self.order == 2:
            out = out + eps**2 * (
                -w / math.tan(th / 2) / (4 * t0) * lam
                + w
                * (np.sin(1.5 * th) - np.sin(2 * w * lam + 1.5 * th))
                / (8 * np.sin(th / 2) * np.sin(th))
                + w
                / math.tan(th / 2)
                * (np.sin(w * lam + th / 2) - np.sin(th / 2))
                / (4 * np.sin(th / 2))
            )
        return out

    def _h_dot(self, lam):
        w, t0, eps = self.omega, self.tau0, self.eps
        th = w * t0
        out = 1.0 + eps * w * np.sin(w * lam + th / 2) / (2 * np.sin(th / 2))
        if self.order == 2:
            out = out + eps**2 * (
                -w / math.tan(th / 2) / (4 * t0)
                - w**2 * np.cos(2 * w * lam + 1.5 * th) / (4 * np.sin(th / 2) * np.sin(th))
                + w**2 / math.tan(th / 2) * np.cos(w * lam + th / 2) / (4 * np.sin(th / 2))
            )
        return out


def closed_form_sinusoid(order, tau0, omega, eps):
    """Closed-form sinusoidal-delay transform (independent oracle path)."""
    return SinusoidClosedForm(order=order, tau0=tau0, omega=omega, eps=eps)


@dataclass(frozen=True)
class ResidualReport:
    """Pointwise defect of the constant-delay functional equation."""

    grid: np.ndarray
    residuals: np.ndarray
    sup: float
    rms: float


def abel_residual(tt, delay, tau_star=None, grid=None) -> ResidualReport:
    """r(lam) = h(lam) - tau(h(lam)) - h(lam - tau_star) on a grid in [0, inf).

    Zero residual is the defining property of an exact transformation;
    perturbative transforms leave O(eps^{order+1}) residuals.
    """
    if tau_star is None:
        tau_star = tt.tau_star
    if grid is None:
        grid = np.linspace(0.0, 5.0 * delay.period, 512)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0.0):
        raise ValueError("residual grid must lie in [0, inf)")
    h_here = np.asarray(tt.h(grid))
    h_back = np.asarray(tt.h(grid - tau_star))
    res = h_here - delay.tau(h_here) - h_back
    res = np.atleast_1d(res)
    return ResidualReport(
        grid=grid,
        residuals=res,
        sup=float(np.max(np.abs(res))),
        rms=float(np.sqrt(np.mean(res**2))),
    )


def seed_compatibility_error(tt, delay, tau_star=None):
    """e = |h_dot(0)*(1 - tau_dot(0)) - h_dot(-tau_star)|.

    Measures how far an approximate transform is from satisfying the
    derivative matching condition of an exact seed-propagated one; decays
    like eps^2 (order 1) and eps^3 (order 2).
    """
    if tau_star is None:
        tau_star = tt.tau_star
    return abs(tt.h_dot(0.0) * (1.0 - delay.tau_dot(0.0)) - tt.h_dot(-tau_star))


def min_h_dot(tt, window=None, n_periods=5, samples_per_period=10_000):
    """Minimum of h_dot over a dense validation grid (monotonicity check)."""
    period = tt.oscillation_period or tt.tau_star
    if window is None:
        window = (-tt.tau_star, -tt.tau_star + n_periods * period)
    n = max(2, int(round((window[1] - window[0]) / period * samples_per_period)))
    grid = np.linspace(window[0], window[1], n)
    return float(np.min(tt.h_dot(grid)))
