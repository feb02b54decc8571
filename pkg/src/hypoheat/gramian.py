"""Controllability Gramians, covariances, and their small-time expansion.

The backward Gramian of a system (A, B) is

    gram(t) = integral_0^t exp(-s A) B B^T exp(-s A^T) ds,

computed in closed form from one exponential of an augmented 2n x 2n block
matrix.  The endpoint covariance of the diffusion is the forward companion
cov(t) = exp(tA) gram(t) exp(tA^T).

For small t the Gramian collapses onto the controllability flag with
per-block powers of t, so inverting it directly is hopeless.  The cure is a
diagonal rescaling: in adapted coordinates gram(t) = J M(t) J with
J = diag(sqrt(t)**w) and weights w odd integers, where M(t) is an analytic
matrix family with positive definite limit M(0).  `rescaled_series` builds
the Taylor coefficients of M exactly (term-by-term integration, no
sampling), and the helpers below route inverse-Gramian quadratic forms and
determinants through M(t) whenever t is below `SMALL_TIME`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonFinite, NonPositiveTime, SeriesDegenerate
from .series import TruncatedMatrixSeries, poly_mul
from .system import Filtration, LinearSystem, build_filtration
from .util import as_matrix, symmetrize

# below this horizon, inverse-Gramian computations go through the rescaled
# series; above it, direct Cholesky factorizations are well conditioned
SMALL_TIME = 0.05

# default truncation order of the rescaled series
DEFAULT_ORDER = 8


def matrix_exponential(M) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade, via scipy)."""
    M = as_matrix(M, "matrix")
    out = scipy.linalg.expm(M)
    if not np.all(np.isfinite(out)):
        raise NonFinite("matrix exponential overflowed")
    return out


def flow_integral(A: np.ndarray, t: float) -> np.ndarray:
    """The matrix integral_0^t exp(-s A) ds, from one augmented exponential."""
    n = A.shape[0]
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = -A
    blk[:n, n:] = np.eye(n)
    E = matrix_exponential(t * blk)
    return E[:n, n:]


def _gramian_any(sys: LinearSystem, t: float) -> np.ndarray:
    """Signed-time Gramian integral; t may be negative (then the result is
    negative semidefinite).  One augmented exponential, no quadrature."""
    n = sys.dim
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = -sys.A
    blk[:n, n:] = sys.diffusion
    blk[n:, n:] = sys.A.T
    E = matrix_exponential(t * blk)
    # top-right block is gram(t) exp(tA^T); top-left is exp(-tA)
    return symmetrize(E[:n, n:] @ E[:n, :n].T)


def gramian(sys: LinearSystem, t: float) -> np.ndarray:
    """Controllability Gramian at horizon t > 0 (symmetric positive definite)."""
    if not t > 0:
        raise NonPositiveTime(f"horizon must be positive, got {t}")
    return _gramian_any(sys, t)


def gramian_quadrature(sys: LinearSystem, t: float, tol: float = 1e-12) -> np.ndarray:
    """Adaptive-quadrature fallback for the same integral; slower but
    independent of the augmented-exponential route."""
    if not t > 0:
        raise NonPositiveTime(f"horizon must be positive, got {t}")
    from scipy.integrate import quad_vec

    bbt = sys.diffusion

    def integrand(s):
        e = scipy.linalg.expm(-s * sys.A)
        return e @ bbt @ e.T

    val, _ = quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=tol)
    return symmetrize(val)


def covariance(sys: LinearSystem, t: float) -> np.ndarray:
    """Endpoint covariance cov(t) = exp(tA) gram(t) exp(tA^T), t > 0.

    Equals minus the signed Gramian at -t; that reflection is exercised by
    the test suite as a structural check.
    """
    if not t > 0:
        raise NonPositiveTime(f"horizon must be positive, got {t}")
    E = matrix_exponential(t * sys.A)
    return symmetrize(E @ _gramian_any(sys, t) @ E.T)


# ---------------------------------------------------------------------------
# rescaled small-time series


@dataclass(frozen=True)
class GramianSeries:
    """Taylor data of the rescaled Gramian in adapted coordinates.

    gram(t) = basis @ (J_t @ M(t) @ J_t) @ basis.T with
    J_t = diag(sqrt(t)**scaling_weights) and
    M(t) = coeffs[0] + coeffs[1] t + ... + coeffs[order] t^order + O(t^{order+1}).

    Attributes
    ----------
    order : int
        Truncation order of M.
    coeffs : (order+1, n, n) array
        Symmetric coefficient matrices; coeffs[0] is positive definite.
    c0 : float
        det coeffs[0] = lim gram(t)/t^decay_exponent determinant scale.
    scaling_weights : (n,) int array
        Odd integers, weight 2i-1 on coordinates of the i-th block.
    decay_exponent : int
        Sum of the weights; det J_t = t^(decay_exponent/2).
    basis : (n, n) array
        Orthonormal adapted basis (columns).
    trace_A : float
        Trace of the state matrix, kept for determinant expansions.
    input_block : (k1, k) array
        The input matrix expressed in adapted coordinates, nonzero rows only.
    """

    order: int
    coeffs: np.ndarray = field(repr=False)
    c0: float
    scaling_weights: np.ndarray = field(repr=False)
    decay_exponent: int
    basis: np.ndarray = field(repr=False)
    trace_A: float
    input_block: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.coeffs, self.scaling_weights, self.basis, self.input_block):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def leading(self) -> np.ndarray:
        """Positive definite limit M(0)."""
        return self.coeffs[0]

    @property
    def subleading(self) -> np.ndarray:
        """First-order coefficient; its leading-inverse trace equals -tr A."""
        return self.coeffs[1]

    def matrix_series(self, order: int | None = None) -> TruncatedMatrixSeries:
        h = self.order if order is None else min(order, self.order)
        return TruncatedMatrixSeries(self.coeffs[: h + 1].copy())

    def eval(self, t: float) -> np.ndarray:
        """M(t) by Horner evaluation of the truncated polynomial."""
        acc = np.zeros((self.dim, self.dim))
        for c in self.coeffs[::-1]:
            acc = acc * t + c
        return acc


def rescaled_series(
    sys: LinearSystem,
    filtration: Filtration | None = None,
    order: int = DEFAULT_ORDER,
) -> GramianSeries:
    """Exact Taylor coefficients of the rescaled Gramian family M(t).

    The Gramian integrand exp(-sA) B B^T exp(-sA^T) is integrated term by
    term; in adapted coordinates the (i, j) block of the t^p Gramian
    coefficient vanishes for p < i + j - 1, and coefficient p = i + j - 1 + h
    is exactly the (i, j) block of the h-th coefficient of M.

    Raises
    ------
    SeriesDegenerate
        If the coefficients are inconsistent with the filtration structure
        or the leading matrix fails to be positive definite.
    """
    if order < 2:
        raise ValueError("order must be >= 2 (leading and subleading terms)")
    if filtration is None:
        filtration = build_filtration(sys)
    T = filtration.adapted_basis
    n, k = sys.dim, sys.rank
    m = filtration.step
    slices = filtration.block_slices

    A_ad = T.T @ sys.A @ T
    B_ad = T.T @ sys.B
    scale = np.linalg.norm(sys.A) + np.linalg.norm(sys.B) + 1.0

    # enforce the exact block structure: A maps E_i into E_{i+1}, and the
    # input matrix lives in the first block
    stray = 0.0
    for r in range(m):
        for s in range(m):
            if r > s + 1:
                stray = max(stray, np.max(np.abs(A_ad[slices[r], slices[s]])))
                A_ad[slices[r], slices[s]] = 0.0
    k1 = filtration.dims[0]
    if k1 < n:
        stray = max(stray, np.max(np.abs(B_ad[k1:, :])))
        B_ad[k1:, :] = 0.0
    if stray > 1e-8 * scale:
        raise SeriesDegenerate(
            f"adapted coordinates violate the block structure by {stray:.3e}"
        )

    # P_a = A^a B / a! in adapted coordinates
    p_max = 2 * m - 1 + order
    powers = np.zeros((p_max, n, k))
    powers[0] = B_ad
    for a in range(1, p_max):
        powers[a] = (A_ad @ powers[a - 1]) / a

    # Gramian Taylor coefficients G_p, p = 1..p_max
    gram_coeff = np.zeros((p_max + 1, n, n))
    for p in range(1, p_max + 1):
        acc = np.zeros((n, n))
        for a in range(p):
            acc += powers[a] @ powers[p - 1 - a].T
        gram_coeff[p] = ((-1.0) ** (p - 1) / p) * acc

    coeffs = np.zeros((order + 1, n, n))
    for h in range(order + 1):
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                si, sj = slices[i - 1], slices[j - 1]
                coeffs[h][si, sj] = gram_coeff[i + j - 1 + h][si, sj]
        asym = np.max(np.abs(coeffs[h] - coeffs[h].T))
        if asym > 1e-10 * max(1.0, np.max(np.abs(coeffs[h]))):
            raise SeriesDegenerate(f"coefficient {h} asymmetric by {asym:.3e}")
        coeffs[h] = symmetrize(coeffs[h])

    sign, logdet = np.linalg.slogdet(coeffs[0])
    try:
        np.linalg.cholesky(coeffs[0])
    except np.linalg.LinAlgError:
        sign = -1.0
    if sign <= 0:
        raise SeriesDegenerate("leading coefficient is not positive definite")

    return GramianSeries(
        order=order,
        coeffs=coeffs,
        c0=float(np.exp(logdet)),
        scaling_weights=filtration.scaling_weights.astype(int),
        decay_exponent=filtration.decay_exponent,
        basis=T.copy(),
        trace_A=float(np.trace(sys.A)),
        input_block=B_ad[:k1, :].copy(),
    )


def det_covariance_expansion(
    series: GramianSeries, trace_A: float | None = None, order: int | None = None
) -> np.ndarray:
    """Coefficients e with det cov(t) = c0 t^decay_exponent (e0 + e1 t + ...),
    e0 = 1.  Exact consequence of det cov(t) = exp(2 t tr A) det gram(t).
    trace_A defaults to the value recorded on the series."""
    tr_a = series.trace_A if trace_A is None else float(trace_A)
    h = series.order if order is None else order
    if h > series.order:
        raise ValueError(f"series order {series.order} < requested order {h}")
    det_m = series.matrix_series(h).det_series()
    two_tra = np.array([(2.0 * tr_a) ** p / math.factorial(p) for p in range(h + 1)])
    return poly_mul(two_tra, det_m, h) / series.c0


# ---------------------------------------------------------------------------
# small-time evaluation helpers (all assume t > 0)


def _scaled_input(series: GramianSeries, t: float, r: np.ndarray) -> np.ndarray:
    """J_t^{-1} basis^T r, the well-scaled right-hand side for M(t) solves."""
    return (series.basis.T @ r) * t ** (-0.5 * series.scaling_weights.reshape(
        series.scaling_weights.shape + (1,) * (r.ndim - 1)
    ))


def _chol(series: GramianSeries, t: float):
    try:
        return scipy.linalg.cho_factor(series.eval(t), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SeriesDegenerate(f"rescaled family not positive definite at t={t}") from exc


def gram_quadratic_form(series: GramianSeries, t: float, r: np.ndarray) -> float:
    """r^T gram(t)^{-1} r through the rescaled family (stable for small t)."""
    u = _scaled_input(series, t, r)
    z = scipy.linalg.cho_solve(_chol(series, t), u)
    return float(u @ z)


def gram_solve(series: GramianSeries, t: float, r: np.ndarray) -> np.ndarray:
    """gram(t)^{-1} r through the rescaled family; r may be a vector or matrix."""
    u = _scaled_input(series, t, r)
    z = scipy.linalg.cho_solve(_chol(series, t), u)
    w = series.scaling_weights.reshape(
        series.scaling_weights.shape + (1,) * (r.ndim - 1)
    )
    return series.basis @ (z * t ** (-0.5 * w))


def gram_logdet(series: GramianSeries, t: float) -> float:
    """log det gram(t) = decay_exponent log t + log det M(t)."""
    c, _ = _chol(series, t)
    return series.decay_exponent * math.log(t) + 2.0 * float(
        np.sum(np.log(np.diag(c)))
    )


def covariance_logdet(series: GramianSeries, t: float) -> float:
    """log det cov(t) = 2 t tr A + log det gram(t)."""
    return 2.0 * t * series.trace_A + gram_logdet(series, t)


def reconstruct_gramian(series: GramianSeries, t: float) -> np.ndarray:
    """gram(t) rebuilt from the truncated family, for convergence checks."""
    j = t ** (0.5 * series.scaling_weights)
    inner = series.eval(t) * np.outer(j, j)
    return symmetrize(series.basis @ inner @ series.basis.T)
