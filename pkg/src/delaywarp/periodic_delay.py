"""Periodic delay profiles tau(t) = tau0 + eps * shape(t).

The shape is a truncated Fourier series with Hermitian-symmetric complex
coefficients, so tau is real-valued.  Coefficients are the source of truth;
nothing is ever inferred from time samples.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDelayError

# Resonance thresholds on the distance of omega*tau0 to the nearest m*pi.
RESONANCE_FAIL_RAD = 1e-6
RESONANCE_WARN_RAD = 0.05

_DENSE_SAMPLES = 10_000


@dataclass(frozen=True)
class FourierSeries:
    """Real-valued trigonometric polynomial  sum_k a_k exp(j k omega t).

    Parameters
    ----------
    omega : float
        Fundamental angular frequency (rad per unit time), > 0.
    coeffs : dict[int, complex]
        Harmonic index k -> coefficient a_k.  Must satisfy the Hermitian
        symmetry a_{-k} = conj(a_k) so the series is real.
    K : int, optional
        Truncation order.  Defaults to the largest populated |k| (at least 1).
    """

    omega: float
    coeffs: dict = field(default_factory=dict)
    K: int = 0

    def __post_init__(self):
        if not self.omega > 0.0:
            raise InvalidDelayError(f"omega must be > 0, got {self.omega}")
        clean = {int(k): complex(v) for k, v in self.coeffs.items()}
        for k, ak in clean.items():
            mirror = clean.get(-k, 0.0 + 0.0j)
            scale = max(1.0, abs(ak))
            if abs(mirror - ak.conjugate()) > 1e-12 * scale:
                raise InvalidDelayError(
                    f"Hermitian symmetry violated at k={k}: "
                    f"a_-k={mirror} vs conj(a_k)={ak.conjugate()}"
                )
        object.__setattr__(self, "coeffs", clean)
        kmax = max((abs(k) for k in clean), default=1)
        object.__setattr__(self, "K", max(int(self.K) or kmax, kmax, 1))

    @classmethod
    def sine(cls, omega):
        """Series for sin(omega*t):  a_1 = 1/(2j), a_-1 = -1/(2j)."""
        return cls(omega=omega, coeffs={1: 1.0 / 2j, -1: -1.0 / 2j})

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def __call__(self, t):
        """Evaluate the series at time(s) t; returns real values."""
        return _real_series_sum(self.coeffs, self.omega, t, derivative=False)

    def derivative(self, t):
        """Evaluate d/dt of the series at time(s) t."""
        return _real_series_sum(self.coeffs, self.omega, t, derivative=True)

    def abs_sum(self):
        """sum_k |a_k|  (upper bound for sup_t |series|)."""
        return float(sum(abs(v) for v in self.coeffs.values()))

    def weighted_abs_sum(self):
        """omega * sum_k |k a_k|  (upper bound for sup_t |d series/dt|)."""
        return self.omega * float(sum(abs(k) * abs(v) for k, v in self.coeffs.items()))


def _real_series_sum(coeffs, omega, t, derivative):
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros(t_arr.shape, dtype=complex)
    for k, ak in coeffs.items():
        factor = 1j * k * omega * ak if derivative else ak
        total += factor * np.exp(1j * k * omega * t_arr)
    scale = np.maximum(1.0, np.abs(total))
    if np.any(np.abs(total.imag) > 1e-9 * scale):
        raise InvalidDelayError("series evaluation has non-negligible imaginary part")
    real = total.real
    return float(real) if np.isscalar(t) or t_arr.ndim == 0 else real


def _sup_estimate(series, derivative):
    """(value, method): coefficient-sum bound, or dense sampling when it is not decisive."""
    bound = series.weighted_abs_sum() if derivative else series.abs_sum()
    if bound <= 1.0 + 1e-12:
        return bound, "coefficient-sum"
    ts = np.linspace(0.0, series.period, _DENSE_SAMPLES, endpoint=False)
    vals = series.derivative(ts) if derivative else series(ts)
    return float(np.max(np.abs(vals))), "sampled"


@dataclass(frozen=True)
class HypothesisReport:
    """Pass/fail record for the expansion hypotheses of a delay.

    `resonance_margin` is the raw value (omega*tau0 mod pi); the pass/fail
    decision uses `resonance_distance`, the distance of omega*tau0 to the
    nearest multiple of pi.  The [-1, 1] range check on the shape is
    informational and does not affect `passed`.
    """

    tau_dot_sup: float
    tau_dot_method: str
    tau_dot_ok: bool
    eps_ratio: float
    eps_ratio_threshold: float
    eps_ratio_ok: bool
    mean_coeff: complex
    mean_coeff_ok: bool
    resonance_margin: float
    resonance_distance: float
    resonance_ok: bool
    resonance_warn: bool
    shape_sup: float
    shape_sup_method: str
    shape_within_unit: bool

    @property
    def passed(self):
        return (
            self.tau_dot_ok
            and self.eps_ratio_ok
            and self.mean_coeff_ok
            and self.resonance_ok
        )

    def failures(self):
        out = []
        if not self.tau_dot_ok:
            out.append(f"tau_dot < 1 fails (sup estimate {self.tau_dot_sup:.6g})")
        if not self.eps_ratio_ok:
            out.append(
                f"eps/tau0 = {self.eps_ratio:.6g} >= {self.eps_ratio_threshold:.6g}"
            )
        if not self.mean_coeff_ok:
            out.append(f"a_0 = {self.mean_coeff} != 0")
        if not self.resonance_ok:
            out.append(
                f"omega*tau0 within {self.resonance_distance:.3g} rad of m*pi"
            )
        return out

    def as_dict(self):
        return {
            "passed": self.passed,
            "tau_dot_sup": self.tau_dot_sup,
            "tau_dot_method": self.tau_dot_method,
            "tau_dot_ok": self.tau_dot_ok,
            "eps_ratio": self.eps_ratio,
            "eps_ratio_threshold": self.eps_ratio_threshold,
            "eps_ratio_ok": self.eps_ratio_ok,
            "mean_coeff": [self.mean_coeff.real, self.mean_coeff.imag],
            "mean_coeff_ok": self.mean_coeff_ok,
            "resonance_margin": self.resonance_margin,
            "resonance_distance": self.resonance_distance,
            "resonance_ok": self.resonance_ok,
            "resonance_warn": self.resonance_warn,
            "shape_sup": self.shape_sup,
            "shape_sup_method": self.shape_sup_method,
            "shape_within_unit": self.shape_within_unit,
        }


@dataclass(frozen=True)
class PeriodicDelay:
    """Delay tau(t) = tau0 + eps * shape(t) with a Fourier-series shape.

    Construction enforces tau0 > 0, eps >= 0 and positivity of tau; the
    expansion hypotheses (tau_dot < 1, small eps, a_0 = 0, non-resonance)
    are checked by :meth:`validate_hypotheses` and reported, not raised,
    so that out-of-hypothesis delays can still be constructed and probed.

    Immutable after construction; safe for concurrent reads.
    """

    tau0: float
    eps: float
    shape: FourierSeries

    def __post_init__(self):
        if not self.tau0 > 0.0:
            raise InvalidDelayError(f"tau0 must be > 0, got {self.tau0}")
        if self.eps < 0.0:
            raise InvalidDelayError(f"eps must be >= 0, got {self.eps}")
        sup, _ = _sup_estimate(self.shape, derivative=False)
        if self.tau0 - self.eps * sup <= 0.0:
            raise InvalidDelayError(
                f"tau(t) can reach {self.tau0 - self.eps * sup:.6g} <= 0 "
                f"(tau0={self.tau0}, eps={self.eps}, sup|shape|~{sup:.6g})"
            )

    @property
    def omega(self):
        return self.shape.omega

    @property
    def period(self):
        return self.shape.period

    def tau(self, t):
        """Evaluate tau(t).  Raises if the value is not positive."""
        val = self.tau0 + self.eps * self.shape(t)
        if np.any(np.asarray(val) <= 0.0):
            raise InvalidDelayError(f"tau({t}) = {val} <= 0; delay object invalid")
        return val

    def tau_dot(self, t):
        """Evaluate d tau/dt at t."""
        return self.eps * self.shape.derivative(t)

    def tau_bounds(self):
        """Guaranteed (tau_min, tau_max) from the coefficient-sum bound."""
        amp = self.eps * self.shape.abs_sum()
        return self.tau0 - amp, self.tau0 + amp

    def validate_hypotheses(self, eps_ratio_threshold=0.2):
        """Check the periodic-small-perturbation expansion hypotheses.

        Sufficient coefficient-sum bounds are tried first; when a bound is
        not decisive the check falls back to dense sampling over one period
        (method "sampled").
        """
        td_bound = self.eps * self.shape.weighted_abs_sum()
        if td_bound < 1.0:
            td_sup, td_method = td_bound, "coefficient-sum"
        else:
            ts = np.linspace(0.0, self.period, _DENSE_SAMPLES, endpoint=False)
            td_sup = float(np.max(np.abs(self.tau_dot(ts))))
            td_method = "sampled"

        ratio = self.eps / self.tau0
        a0 = self.shape.coeffs.get(0, 0.0 + 0.0j)

        margin = math.fmod(self.omega * self.tau0, math.pi)
        distance = min(margin, math.pi - margin)
        shape_sup, shape_method = _sup_estimate(self.shape, derivative=False)

        return HypothesisReport(
            tau_dot_sup=td_sup,
            tau_dot_method=td_method,
            tau_dot_ok=td_sup < 1.0,
            eps_ratio=ratio,
            eps_ratio_threshold=eps_ratio_threshold,
            eps_ratio_ok=ratio < eps_ratio_threshold,
            mean_coeff=a0,
            mean_coeff_ok=abs(a0) < 1e-12,
            resonance_margin=margin,
            resonance_distance=distance,
            resonance_ok=distance >= RESONANCE_FAIL_RAD,
            resonance_warn=distance < RESONANCE_WARN_RAD,
            shape_sup=shape_sup,
            shape_sup_method=shape_method,
            shape_within_unit=shape_sup <= 1.0 + 1e-9,
        )


def sinusoid_delay(tau0, eps, omega):
    """tau(t) = tau0 + eps*sin(omega*t), the worked sinusoidal profile."""
    return PeriodicDelay(tau0=tau0, eps=eps, shape=FourierSeries.sine(omega))


def delay_from_config(cfg):
    """Build a PeriodicDelay from a config mapping.

    Required keys: tau0, eps, omega.  The shape is either `kind = "sin"`
    or an explicit `coeffs` list of (k, re, im) triples.
    """
    try:
        tau0 = float(cfg["tau0"])
        eps = float(cfg["eps"])
        omega = float(cfg["omega"])
    except KeyError as exc:
        raise InvalidDelayError(f"delay config missing field {exc}") from exc
    if cfg.get("kind") == "sin":
        shape = FourierSeries.sine(omega)
    elif "coeffs" in cfg:
        coeffs = {}
        for entry in cfg["coeffs"]:
            k, re, im = entry
            coeffs[int(k)] = complex(float(re), float(im))
        shape = FourierSeries(omega=omega, coeffs=coeffs)
    else:
        raise InvalidDelayError(
            "delay config needs kind = 'sin' or an explicit coeffs list"
        )
    return PeriodicDelay(tau0=tau0, eps=eps, shape=shape)


def load_delay(path):
    """Read a delay profile from a JSON or TOML file."""
    text = open(path, "rb").read()
    name = str(path)
    if name.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        cfg = tomllib.loads(text.decode())
    else:
        cfg = json.loads(text.decode())
    return delay_from_config(cfg)
