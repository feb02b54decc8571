"""Minimum-energy optimal control for the deterministic counterpart system.

Steering dx/dt = A x + alpha + B u from x1 to x2 in time T at minimal
(1/2) integral |u|^2 has the closed-form solution u(s) = B^T exp(-sA^T) p0,
where the covector p0 solves gram(T) p0 = exp(-TA) x2 - x1 - wint(T) and
wint is the integrated free drift.  The optimal cost is a Gramian quadratic
form; when T is below `SMALL_TIME` the solve is rerouted through the
rescaled expansion, since gram(T) itself is numerically singular there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditionedWarning, NonPositiveTime
from .gramian import (
    SMALL_TIME,
    GramianSeries,
    _gramian_any,
    flow_integral,
    gram_quadratic_form,
    gram_solve,
    gramian,
    matrix_exponential,
    rescaled_series,
)
from .system import LinearSystem
from .util import as_vector

# cross-check tolerance between the two equivalent value-function forms
_FORM_RTOL = 1e-6


def _steering_residual(sys: LinearSystem, T: float, x1, x2) -> np.ndarray:
    """exp(-TA) x2 - x1 - wint(T): the defect the control must cover,
    measured at time zero."""
    x1 = as_vector(x1, "x1")
    x2 = as_vector(x2, "x2")
    w = flow_integral(sys.A, T) @ sys.alpha
    return matrix_exponential(-T * sys.A) @ x2 - x1 - w


def _series_or_build(sys, series: GramianSeries | None) -> GramianSeries:
    return series if series is not None else rescaled_series(sys)


def connecting_covector(
    sys: LinearSystem, x1, x2, T: float, series: GramianSeries | None = None
) -> np.ndarray:
    """Initial covector p0 of the minimum-energy control from x1 to x2.

    For T below SMALL_TIME the Gramian solve is routed through the rescaled
    expansion and an IllConditionedWarning is emitted.
    """
    if not T > 0:
        raise NonPositiveTime(f"horizon must be positive, got {T}")
    r = _steering_residual(sys, T, x1, x2)
    if T < SMALL_TIME:
        warnings.warn(
            f"horizon {T} below {SMALL_TIME}: Gramian nearly singular, "
            "routing the solve through the rescaled expansion",
            IllConditionedWarning,
            stacklevel=2,
        )
        return gram_solve(_series_or_build(sys, series), T, r)
    cho = scipy.linalg.cho_factor(gramian(sys, T), lower=True)
    return scipy.linalg.cho_solve(cho, r)


def value_function(
    sys: LinearSystem, x1, x2, T: float, series: GramianSeries | None = None
) -> float:
    """Optimal steering cost S_T(x1, x2) = (1/2) p0^T gram(T) p0 >= 0.

    Computed as a Gramian quadratic form; for T >= SMALL_TIME the equivalent
    covariance form (1/2)(x2 - flow(x1))^T cov(T)^{-1} (x2 - flow(x1)) is
    evaluated as well and the two are cross-checked.  Below SMALL_TIME only
    the rescaled-series route is meaningful, so the cross-check is skipped.
    """
    if not T > 0:
        raise NonPositiveTime(f"horizon must be positive, got {T}")
    r = _steering_residual(sys, T, x1, x2)
    if T < SMALL_TIME:
        return 0.5 * gram_quadratic_form(_series_or_build(sys, series), T, r)

    gam = gramian(sys, T)
    cho = scipy.linalg.cho_factor(gam, lower=True)
    s_gram = 0.5 * float(r @ scipy.linalg.cho_solve(cho, r))

    # covariance form of the same quantity
    E = matrix_exponential(T * sys.A)
    cov = E @ gam @ E.T
    d = as_vector(x2, "x2") - E @ (as_vector(x1, "x1") + flow_integral(sys.A, T) @ sys.alpha)
    cho_cov = scipy.linalg.cho_factor(0.5 * (cov + cov.T), lower=True)
    s_cov = 0.5 * float(d @ scipy.linalg.cho_solve(cho_cov, d))

    if abs(s_gram - s_cov) > _FORM_RTOL * (1.0 + abs(s_gram)):
        warnings.warn(
            f"value-function forms disagree: {s_gram!r} vs {s_cov!r}",
            IllConditionedWarning,
            stacklevel=2,
        )
    return max(s_gram, 0.0)


def geodesic_cost(
    sys: LinearSystem,
    p0,
    x0,
    t: float,
    x,
    series: GramianSeries | None = None,
) -> float:
    """Concave cost profile of the extremal seeded at (x0, p0), evaluated at x:

        c_t(x) = -1/2 p0^T gram(t) p0 + p0^T (x - x0)
                 - 1/2 (x - x0)^T gram(t)^{-1} (x - x0).

    Equals minus the steering cost from x to the extremal endpoint at time t.
    """
    if not t > 0:
        raise NonPositiveTime(f"time must be positive, got {t}")
    p0 = as_vector(p0, "p0")
    dx = as_vector(x, "x") - as_vector(x0, "x0")
    gam = gramian(sys, t)  # evaluating the Gramian is stable at any t
    if t < SMALL_TIME:
        quad = gram_quadratic_form(_series_or_build(sys, series), t, dx)
    else:
        cho = scipy.linalg.cho_factor(gam, lower=True)
        quad = float(dx @ scipy.linalg.cho_solve(cho, dx))
    return float(-0.5 * p0 @ gam @ p0 + p0 @ dx - 0.5 * quad)


@dataclass(frozen=True)
class Extremal:
    """Normal extremal of the control Hamiltonian, seeded at (x0, p0).

    The covector obeys dp/dt = -A^T p and the state rides the controlled
    flow dx/dt = A x + alpha + B B^T p; both are evaluated in closed form,
    for either sign of t.
    """

    sys: LinearSystem
    p0: np.ndarray
    x0: np.ndarray

    def momentum(self, t: float) -> np.ndarray:
        return matrix_exponential(-t * self.sys.A.T) @ self.p0

    def state(self, t: float) -> np.ndarray:
        if t == 0.0:
            return self.x0.copy()
        w = flow_integral(self.sys.A, t) @ self.sys.alpha
        drive = _gramian_any(self.sys, t) @ self.p0
        return matrix_exponential(t * self.sys.A) @ (self.x0 + w + drive)

    def control(self, t: float) -> np.ndarray:
        return self.sys.B.T @ self.momentum(t)

    def cost(self, t: float) -> float:
        """Accumulated control energy (1/2) integral_0^t |u|^2."""
        return 0.5 * float(self.p0 @ _gramian_any(self.sys, t) @ self.p0)

    def hamiltonian(self, t: float) -> float:
        """p^T (A x + alpha) + 1/2 |B^T p|^2; conserved along the extremal."""
        p, x = self.momentum(t), self.state(t)
        u = self.sys.B.T @ p
        return float(p @ (self.sys.A @ x + self.sys.alpha) + 0.5 * u @ u)

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.momentum(t), self.state(t)


def extremal(sys: LinearSystem, p0, x0) -> Extremal:
    """Package (x0, p0) as an extremal with closed-form trajectory evaluation."""
    p0 = as_vector(p0, "p0")
    x0 = as_vector(x0, "x0")
    if p0.shape != (sys.dim,) or x0.shape != (sys.dim,):
        from .errors import DimensionMismatch

        raise DimensionMismatch(
            f"p0 and x0 must have length {sys.dim}, got {p0.shape} and {x0.shape}"
        )
    return Extremal(sys=sys, p0=p0, x0=x0)


def extremal_flow(sys: LinearSystem, p0, x0, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(momentum, state) of the extremal seeded at (x0, p0), evaluated at t."""
    return extremal(sys, p0, x0).at(t)
