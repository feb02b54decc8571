"""Exact transition density and its small-time behaviour on the diagonal.

The diffusion dx = (A x + alpha) dt + B dw has the Gaussian transition
density

    p(t, x, y) = exp(-(1/2) (y - m)^T cov(t)^{-1} (y - m))
                 / ((2 pi)^{n/2} sqrt(det cov(t))),
    m = exp(tA) (x + wint(t)),   wint(t) = integral_0^t exp(-sA) ds alpha.

On the diagonal, p(t, x0, x0) multiplied by (2 pi)^{n/2} sqrt(c0)
t^{decay_exponent/2} tends to 1, and how it gets there depends on where the
drift v = A x0 + alpha sits in the controllability flag:

* v = 0 (equilibrium): a full power series 1 + a1 t + a2 t^2 + ...; the
  coefficients come from the curvature traces, cross-checked against the
  determinant expansion.
* v in the first subspace: 1 - (tr A / 2 + |y|^2 / 2) t + O(t^2) with
  B y = v.
* v deeper at level i >= 2: exponential collapse exp(-(rate + O(t)) /
  t^{2i-3}); the rate is extracted by pole-order-aware Richardson
  extrapolation of the exact log-density.

All small-t evaluations are routed through the rescaled Gramian family;
nothing here inverts a raw Gramian below SMALL_TIME.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .curvature import laurent_expansion
from .errors import DimensionMismatch, ExtrapolationUnstable, NonPositiveTime
from .gramian import (
    DEFAULT_ORDER,
    SMALL_TIME,
    GramianSeries,
    covariance,
    covariance_logdet,
    flow_integral,
    gram_quadratic_form,
    matrix_exponential,
    rescaled_series,
)
from .series import poly_eval, poly_exp, poly_pow
from .system import Filtration, LinearSystem, build_filtration, classify_point
from .util import as_vector

LOG_2PI = math.log(2.0 * math.pi)


def drift_integral(sys: LinearSystem, t: float) -> np.ndarray:
    """wint(t) = integral_0^t exp(-sA) ds alpha, via augmented exponential."""
    return flow_integral(sys.A, t) @ sys.alpha


def drift_integral_quadrature(sys: LinearSystem, t: float, tol: float = 1e-12) -> np.ndarray:
    """Adaptive-quadrature route for the same vector, for cross-checks."""
    from scipy.integrate import quad_vec

    val, _ = quad_vec(
        lambda s: scipy.linalg.expm(-s * sys.A) @ sys.alpha, 0.0, t, epsabs=tol, epsrel=tol
    )
    return val


def _check_point(sys: LinearSystem, x, name: str) -> np.ndarray:
    v = as_vector(x, name)
    if v.shape != (sys.dim,):
        raise DimensionMismatch(f"{name} must have length {sys.dim}, got {v.shape}")
    return v


def log_exact_kernel(
    sys: LinearSystem,
    t: float,
    x,
    y,
    series: GramianSeries | None = None,
) -> float:
    """log p(t, x, y).  Stable at small t through the rescaled family."""
    if not t > 0:
        raise NonPositiveTime(f"time must be positive, got {t}")
    x = _check_point(sys, x, "x")
    y = _check_point(sys, y, "y")
    n = sys.dim
    E = matrix_exponential(t * sys.A)
    resid = y - E @ (x + drift_integral(sys, t))
    if t < SMALL_TIME:
        if series is None:
            series = rescaled_series(sys)
        pulled = np.linalg.solve(E, resid)  # exp(-tA) (y - m); E ~ I here
        quad = gram_quadratic_form(series, t, pulled)
        logdet = covariance_logdet(series, t)
    else:
        cho = scipy.linalg.cho_factor(covariance(sys, t), lower=True)
        quad = float(resid @ scipy.linalg.cho_solve(cho, resid))
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * LOG_2PI


def exact_kernel(
    sys: LinearSystem,
    t: float,
    x,
    y,
    series: GramianSeries | None = None,
) -> float:
    """Transition density p(t, x, y) > 0."""
    return float(np.exp(log_exact_kernel(sys, t, x, y, series=series)))


def stay_cost(
    sys: LinearSystem, t: float, x0, series: GramianSeries | None = None
) -> float:
    """Minimum control energy to hold the state at x0 over [0, t]; this is
    also minus the Gaussian exponent of p(t, x0, x0)."""
    if not t > 0:
        raise NonPositiveTime(f"time must be positive, got {t}")
    x0 = _check_point(sys, x0, "x0")
    v = sys.A @ x0 + sys.alpha
    r = flow_integral(sys.A, t) @ v
    if t < SMALL_TIME:
        if series is None:
            series = rescaled_series(sys)
        return 0.5 * gram_quadratic_form(series, t, r)
    from .gramian import gramian

    cho = scipy.linalg.cho_factor(gramian(sys, t), lower=True)
    return 0.5 * float(r @ scipy.linalg.cho_solve(cho, r))


def log_normalized_diagonal(
    sys: LinearSystem, t: float, x0, series: GramianSeries | None = None
) -> float:
    """log of p(t, x0, x0) (2 pi)^{n/2} sqrt(c0) t^{decay_exponent/2}.

    The normalized diagonal tends to 1 at an equilibrium point and carries
    the regime-dependent corrections elsewhere.
    """
    if series is None:
        series = rescaled_series(sys)
    return (
        log_exact_kernel(sys, t, x0, x0, series=series)
        + 0.5 * sys.dim * LOG_2PI
        + 0.5 * math.log(series.c0)
        + 0.5 * series.decay_exponent * math.log(t)
    )


# ---------------------------------------------------------------------------
# small-time asymptotics


@dataclass(frozen=True)
class KernelAsymptotics:
    """Small-time description of p(t, x0, x0) for one base point.

    coefficients[i] multiplies t^i in the normalized diagonal expansion
    (trace route); coefficients_from_det is the same array computed from
    the determinant expansion, kept separate so the agreement of the two
    routes stays observable.  first_order is set in the level-1 regime,
    rate (and its next-order diagnostic rate_correction) in levels >= 2.
    """

    point: np.ndarray = field(repr=False)
    level: int
    decay_exponent: int
    c0: float
    order: int
    coefficients: np.ndarray = field(repr=False)
    coefficients_from_det: np.ndarray = field(repr=False)
    first_order: float | None = None
    rate: float | None = None
    rate_correction: float | None = None

    @property
    def is_equilibrium(self) -> bool:
        return self.level == 0

    def regime_label(self) -> str:
        return "equilibrium" if self.level == 0 else f"level-{self.level}"

    def log_asymptotic_normalized(self, t: float) -> float:
        """log of the regime's model for the normalized diagonal."""
        if self.level == 0:
            val = poly_eval(self.coefficients, t)
            return math.log(val) if val > 0 else -math.inf
        if self.level == 1:
            val = 1.0 - self.first_order * t
            return math.log(val) if val > 0 else -math.inf
        return -self.rate / t ** (2 * self.level - 3)

    def log_asymptotic_kernel(self, t: float) -> float:
        """log of the modeled density itself (normalization unwound)."""
        return (
            self.log_asymptotic_normalized(t)
            - 0.5 * self.decay_exponent * math.log(t)
            - 0.5 * math.log(self.c0)
            - 0.5 * len(self.point) * LOG_2PI
        )


def _coefficients_from_traces(trace_A: float, q_traces: np.ndarray, order: int) -> np.ndarray:
    """Exponentiate the closed-form log-expansion of the normalized diagonal:
    the linear term is -tr A / 2 and the t^{i+2} term is
    (-1)^i tr coeffs[i] / (2 (i+1) (i+2))."""
    g = np.zeros(order + 1)
    if order >= 1:
        g[1] = -0.5 * trace_A
    for i in range(min(len(q_traces), order - 1)):
        g[i + 2] = 0.5 * (-1.0) ** i * q_traces[i] / ((i + 1) * (i + 2))
    return poly_exp(g, order)


def _coefficients_from_determinant(det_expansion: np.ndarray) -> np.ndarray:
    """Inverse square root of the normalized determinant expansion."""
    return poly_pow(det_expansion, -0.5)


def _exponential_rate(
    sys: LinearSystem, series: GramianSeries, drift: np.ndarray, level: int
) -> tuple[float, float]:
    """Exponential collapse rate for a level >= 2 point, by Richardson
    extrapolation of t^{2 level - 3} * stay-cost on a geometric grid.

    Returns (rate, next-order correction coefficient); the correction has
    no claimed accuracy and is reported as a diagnostic only.
    """
    pole = 2 * level - 3
    grid = 0.08 * 0.5 ** np.arange(8)
    vals = []
    for t in grid:
        r = flow_integral(sys.A, t) @ drift
        vals.append(t**pole * 0.5 * gram_quadratic_form(series, t, r))
    vals = np.array(vals)

    # Neville table for a sequence C + c1 t + c2 t^2 + ... on ratio-2 grid
    table = [vals]
    for lvl in range(1, len(vals)):
        prev = table[-1]
        fac = 2.0**lvl
        table.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    diag = np.array([col[-1] for col in table])
    rate, prior = float(diag[-1]), float(diag[-2])
    if not math.isfinite(rate) or rate <= 0:
        raise ExtrapolationUnstable(f"nonpositive rate estimate {rate!r}")
    if abs(rate - prior) > 1e-3 * abs(rate):
        raise ExtrapolationUnstable(
            f"successive rate estimates {prior!r} and {rate!r} disagree beyond 1e-3"
        )

    # first-order correction of the same sequence, diagnostic only
    resid = (vals - rate) / grid
    sub = [resid]
    for lvl in range(1, 4):
        prev = sub[-1]
        fac = 2.0**lvl
        sub.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    correction = float(sub[-1][-1])
    return rate, correction


def diagonal_asymptotics(
    sys: LinearSystem,
    x0,
    order: int = 4,
    filtration: Filtration | None = None,
    series: GramianSeries | None = None,
) -> KernelAsymptotics:
    """Classify x0 and assemble its small-time kernel description.

    order is the highest retained power of t in the equilibrium expansion
    (and fixes how deep the curvature traces are taken).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    x0 = _check_point(sys, x0, "x0")
    if filtration is None:
        filtration = build_filtration(sys)
    need = max(order, DEFAULT_ORDER)
    if series is None or series.order < need:
        series = rescaled_series(sys, filtration, order=need)
    regime = classify_point(sys, x0, filtration)

    from .gramian import det_covariance_expansion

    a_det = _coefficients_from_determinant(det_covariance_expansion(series, order=order))
    if order >= 2:
        expansion = laurent_expansion(sys, filtration, order=order - 2, series=series)
        q_traces = expansion.coeff_traces
    else:
        q_traces = np.zeros(0)
    a_tr = _coefficients_from_traces(series.trace_A, q_traces, order)

    first_order = None
    rate = None
    correction = None
    if regime.level == 1:
        y, *_ = np.linalg.lstsq(sys.B, regime.drift, rcond=None)
        first_order = 0.5 * series.trace_A + 0.5 * float(y @ y)
    elif regime.level >= 2:
        rate, correction = _exponential_rate(sys, series, regime.drift, regime.level)

    return KernelAsymptotics(
        point=x0,
        level=regime.level,
        decay_exponent=series.decay_exponent,
        c0=series.c0,
        order=order,
        coefficients=a_tr,
        coefficients_from_det=a_det,
        first_order=first_order,
        rate=rate,
        rate_correction=correction,
    )


def offdiagonal_asymptotics(
    sys: LinearSystem,
    x,
    y,
    order: int = 4,
    filtration: Filtration | None = None,
    series: GramianSeries | None = None,
):
    """Gaussian-exponent evaluator and shared expansion coefficients.

    Returns (cost, coefficients) where cost(t) is the steering cost
    S_t(x, y) entering p = exp(-S_t) (det cov)^{-1/2} (2 pi)^{-n/2}, and
    coefficients are the same a_i as in the equilibrium diagonal expansion:

        p(t, x, y) exp(S_t(x, y)) (2 pi)^{n/2} sqrt(c0) t^{decay/2}
            = sum a_i t^i + O(t^{order+1}).
    """
    x = _check_point(sys, x, "x")
    y = _check_point(sys, y, "y")
    if filtration is None:
        filtration = build_filtration(sys)
    need = max(order, DEFAULT_ORDER)
    if series is None or series.order < need:
        series = rescaled_series(sys, filtration, order=need)
    ser = series

    def cost(t: float) -> float:
        if not t > 0:
            raise NonPositiveTime(f"time must be positive, got {t}")
        resid = matrix_exponential(-t * sys.A) @ y - x - drift_integral(sys, t)
        if t < SMALL_TIME:
            return 0.5 * gram_quadratic_form(ser, t, resid)
        from .gramian import gramian

        cho = scipy.linalg.cho_factor(gramian(sys, t), lower=True)
        return 0.5 * float(resid @ scipy.linalg.cho_solve(cho, resid))

    if order >= 2:
        expansion = laurent_expansion(sys, filtration, order=order - 2, series=ser)
        q_traces = expansion.coeff_traces
    else:
        q_traces = np.zeros(0)
    coefficients = _coefficients_from_traces(ser.trace_A, q_traces, order)
    return cost, coefficients
