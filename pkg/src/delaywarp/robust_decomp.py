"""Feedback decomposition of the transformed system and PIE assembly.

The transformed dynamics split into a nominal constant-delay part, scaled
by the midpoint h_bar of the h_dot bounds, in feedback with the bounded
time-varying gain delta(lambda) = h_dot(lambda) - h_bar, |delta| <= gamma.
The nominal part is exported both as plain matrices and as the five
partial-integral operators of its coupled ODE-transport representation.
The operator LMI itself is solved by external tooling; this module only
assembles and serialises the exact operator data.
"""

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .perturbation import SeriesTransform

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SAMPLES_PER_PERIOD = 2000
VALIDATION_SAMPLES = 10_000


def _golden_max(f, a, b, tol=1e-12, max_iter=200):
    """Derivative-free golden-section maximisation on [a, b]."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
    xm = 0.5 * (a + b)
    return xm, f(xm)


@dataclass(frozen=True)
class HdotBounds:
    """Bounds h_l <= h_dot <= h_u with midpoint h_bar and radius gamma.

    `series_bound_gamma` is the analytic coefficient-sum bound on
    |h_dot - tau0/tau_star| reported alongside sampled bounds for
    perturbative transforms (None otherwise).
    """

    h_l: float
    h_u: float
    h_bar: float
    gamma: float
    method: str  # "analytic-series" | "sampled"
    window: tuple
    series_bound_gamma: float = None

    def as_dict(self):
        out = {
            "h_l": self.h_l,
            "h_u": self.h_u,
            "h_bar": self.h_bar,
            "gamma": self.gamma,
            "method": self.method,
            "window": list(self.window),
        }
        if self.series_bound_gamma is not None:
            out["series_bound_gamma"] = self.series_bound_gamma
        return out


def _series_gamma_bound(tt):
    """eps * sum|k w' b_k| + eps^2 (|m0/tau*| + sum|k w' c_k|), w' = omega tau0/tau*."""
    cf = tt.coeffs
    freq = cf.omega * cf.tau0 / cf.tau_star
    bound = tt.eps * sum(abs(k * freq * v) for k, v in cf.b.items())
    if cf.order >= 2:
        bound += tt.eps**2 * (
            abs(cf.m0 / cf.tau_star) + sum(abs(k * freq * v) for k, v in cf.c.items())
        )
    return float(bound)


def compute_hdot_bounds(tt, window=None, samples_per_period=SAMPLES_PER_PERIOD):
    """Extrema of h_dot by dense sampling plus golden-section refinement.

    For perturbative transforms the window must cover at least one
    oscillation period; sampling is done over exactly one period and the
    bounds are then global.  For table-backed transforms the window must
    lie inside the horizon.  A flat transform (eps = 0) short-circuits to
    the analytic value.
    """
    period = tt.oscillation_period
    if period is not None:
        if window is None:
            window = (0.0, period)
        if window[1] - window[0] < period * (1.0 - 1e-12):
            raise ValueError(
                f"window {window} shorter than one period {period:.6g}"
            )
        sample_window = (window[0], window[0] + period)
        if isinstance(tt, SeriesTransform):
            nominal = tt.coeffs.tau0 / tt.coeffs.tau_star
            series_bound = _series_gamma_bound(tt)
        else:
            nominal = 1.0
            series_bound = None
        if tt.eps == 0.0:
            return HdotBounds(
                h_l=nominal,
                h_u=nominal,
                h_bar=nominal,
                gamma=0.0,
                method="analytic-series",
                window=tuple(window),
                series_bound_gamma=0.0 if series_bound is not None else None,
            )
    else:
        horizon = getattr(tt, "horizon", None)
        if window is None:
            raise ValueError("window is required for table-backed transforms")
        if horizon is None or horizon <= window[0]:
            raise ValueError("transform horizon empty or below window")
        if window[1] > horizon + 1e-9:
            raise ValueError(f"window {window} exceeds horizon {horizon}")
        sample_window = tuple(window)
        series_bound = None

    grid = np.linspace(sample_window[0], sample_window[1], samples_per_period)
    vals = np.asarray(tt.h_dot(grid))
    spacing = grid[1] - grid[0]
    if period is not None:
        # h_dot is periodic: brackets may extend past the sample window.
        lo_limit = max(sample_window[0] - spacing, tt.domain_start)
        hi_limit = sample_window[1] + spacing
    else:
        lo_limit, hi_limit = sample_window

    def refine(best_idx, sign):
        a = max(grid[best_idx] - spacing, lo_limit)
        b = min(grid[best_idx] + spacing, hi_limit)
        _, val = _golden_max(lambda x: sign * float(tt.h_dot(x)), a, b)
        return sign * val

    h_u = max(float(np.max(vals)), refine(int(np.argmax(vals)), +1.0))
    h_l = min(float(np.min(vals)), refine(int(np.argmin(vals)), -1.0))
    if not 0.0 < h_l <= h_u:
        raise ValueError(f"invalid h_dot bounds [{h_l}, {h_u}]; transform not increasing?")

    check = np.asarray(tt.h_dot(np.linspace(sample_window[0], sample_window[1], VALIDATION_SAMPLES)))
    if np.any(check < h_l - 1e-9) or np.any(check > h_u + 1e-9):
        raise ValueError("validation samples escape computed h_dot bounds")

    return HdotBounds(
        h_l=h_l,
        h_u=h_u,
        h_bar=0.5 * (h_u + h_l),
        gamma=0.5 * (h_u - h_l),
        method="sampled",
        window=tuple(window),
        series_bound_gamma=series_bound,
    )


def delta_signal(tt, h_bar, lam):
    """delta(lambda) = h_dot(lambda) - h_bar, the bounded feedback gain."""
    return tt.h_dot(lam) - h_bar


@dataclass(frozen=True)
class FeedbackForm:
    """Nominal/uncertainty description of the interconnection.

    Nominal dynamics use the scaled matrices h_bar*A0, h_bar*A1 with
    constant delay tau_star; the uncertainty input is v = delta * w with
    output map w = A0 xbar + A1 xbar(lambda - tau_star) and |delta| <= gamma.
    """

    a0_scaled: np.ndarray
    a1_scaled: np.ndarray
    output_a0: np.ndarray
    output_a1: np.ndarray
    tau_star: float
    h_bar: float
    gamma: float

    def as_dict(self):
        return {
            "a0_scaled": self.a0_scaled.tolist(),
            "a1_scaled": self.a1_scaled.tolist(),
            "output_a0": self.output_a0.tolist(),
            "output_a1": self.output_a1.tolist(),
            "tau_star": self.tau_star,
            "h_bar": self.h_bar,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            a0_scaled=np.asarray(data["a0_scaled"], dtype=float),
            a1_scaled=np.asarray(data["a1_scaled"], dtype=float),
            output_a0=np.asarray(data["output_a0"], dtype=float),
            output_a1=np.asarray(data["output_a1"], dtype=float),
            tau_star=float(data["tau_star"]),
            h_bar=float(data["h_bar"]),
            gamma=float(data["gamma"]),
        )


def assemble_feedback_form(sys, bounds, tau_star):
    """Nominal constant-delay system plus uncertainty radius gamma."""
    return FeedbackForm(
        a0_scaled=bounds.h_bar * sys.A0,
        a1_scaled=bounds.h_bar * sys.A1,
        output_a0=sys.A0.copy(),
        output_a1=sys.A1.copy(),
        tau_star=float(tau_star),
        h_bar=bounds.h_bar,
        gamma=bounds.gamma,
    )


@dataclass(frozen=True)
class PolyKernel:
    """Polynomial kernel in s (and theta): coeffs[i][j] multiplies s^i theta^j.

    All kernels assembled here are constant, i.e. a single (0, 0) matrix
    coefficient, but the table form keeps the export schema general.
    """

    coeffs: np.ndarray  # shape (deg_s + 1, deg_theta + 1, rows, cols)

    @classmethod
    def constant(cls, matrix):
        mat = np.asarray(matrix, dtype=float)
        return cls(coeffs=mat.reshape((1, 1) + mat.shape))

    def as_dict(self):
        return {"s_theta_coeffs": self.coeffs.tolist()}


@dataclass(frozen=True)
class PiOperator:
    """One partial-integral operator: matrix block P, kernels Q1, Q2, R0, R1, R2.

    Absent blocks (inputs or outputs with no distributed component) are None.
    """

    P: np.ndarray = None
    Q1: PolyKernel = None
    Q2: PolyKernel = None
    R0: PolyKernel = None
    R1: PolyKernel = None
    R2: PolyKernel = None

    def as_dict(self):
        def block(v):
            if v is None:
                return None
            if isinstance(v, PolyKernel):
                return v.as_dict()
            return np.asarray(v).tolist()

        return {
            "P": block(self.P),
            "Q1": block(self.Q1),
            "Q2": block(self.Q2),
            "R0": block(self.R0),
            "R1": block(self.R1),
            "R2": block(self.R2),
        }


@dataclass(frozen=True)
class PieOperatorData:
    """The five PI operators of the transformed system plus scalars.

    Kernel domain convention: s, theta in [-1, 0].  The IQC metadata
    records the hard multiplier form (Psi = identity) used with the
    uncertainty radius gamma by downstream LMI tooling.
    """

    n: int
    m: int
    tau_star: float
    h_bar: float
    gamma: float
    T: PiOperator
    A: PiOperator
    B: PiOperator
    C: PiOperator
    D: PiOperator

    def as_dict(self):
        return {
            "n": self.n,
            "m": self.m,
            "tau_star": self.tau_star,
            "h_bar": self.h_bar,
            "gamma": self.gamma,
            "s_domain": [-1.0, 0.0],
            "iqc": {"type": "hard", "psi": "identity"},
            "operators": {
                "T": self.T.as_dict(),
                "A": self.A.as_dict(),
                "B": self.B.as_dict(),
                "C": self.C.as_dict(),
                "D": self.D.as_dict(),
            },
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def assemble_pie(sys, bounds, tau_star):
    """Fill the five operators of the ODE-transport representation.

    The delayed channel becomes a transport equation in s over [-1, 0]
    with speed 1/tau_star; the distributed state is the s-derivative of
    the transported profile, so the map back to the fundamental state has
    kernel -I on the upper-triangular integral block, and the generator's
    distributed multiplier is identity over tau_star.
    """
    n = sys.n
    eye = np.eye(n)
    zero = np.zeros((n, n))
    h_bar = bounds.h_bar
    op_t = PiOperator(
        P=eye,
        Q1=PolyKernel.constant(zero),
        Q2=PolyKernel.constant(eye),
        R0=PolyKernel.constant(zero),
        R1=PolyKernel.constant(zero),
        R2=PolyKernel.constant(-eye),
    )
    op_a = PiOperator(
        P=h_bar * (sys.A0 + sys.A1),
        Q1=PolyKernel.constant(-h_bar * sys.A1),
        Q2=PolyKernel.constant(zero),
        R0=PolyKernel.constant(eye / tau_star),
        R1=PolyKernel.constant(zero),
        R2=PolyKernel.constant(zero),
    )
    op_b = PiOperator(P=eye, Q2=PolyKernel.constant(zero))
    op_c = PiOperator(P=sys.A0 + sys.A1, Q1=PolyKernel.constant(-sys.A1))
    op_d = PiOperator(P=zero)
    return PieOperatorData(
        n=n,
        m=n,
        tau_star=float(tau_star),
        h_bar=h_bar,
        gamma=bounds.gamma,
        T=op_t,
        A=op_a,
        B=op_b,
        C=op_c,
        D=op_d,
    )


def pie_schema():
    """Bundled JSON schema for the PIE export format."""
    text = resources.files("delaywarp").joinpath("schemas/pie_schema.json").read_text()
    return json.loads(text)


def export_pie_json(data, path=None):
    """Serialise PieOperatorData; validates against the bundled schema."""
    import jsonschema

    payload = data.as_dict()
    jsonschema.validate(payload, pie_schema())
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
