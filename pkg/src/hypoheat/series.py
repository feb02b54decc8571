"""Truncated power series arithmetic, scalar and matrix valued.

Scalar series are plain 1-D float arrays of coefficients c[0] + c[1] t + ...
truncated at a fixed order; matrix series stack square coefficient matrices
along the first axis.  All products are Cauchy convolutions cut at the
truncation order, so every operation is exact in float arithmetic on the
retained coefficients: no symbolic algebra, no sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# scalar series helpers


def poly_mul(a: np.ndarray, b: np.ndarray, order: int | None = None) -> np.ndarray:
    """Product of two coefficient arrays, truncated at `order`."""
    if order is None:
        order = max(len(a), len(b)) - 1
    out = np.convolve(a, b)[: order + 1]
    if len(out) < order + 1:
        out = np.pad(out, (0, order + 1 - len(out)))
    return out


def poly_inv(a: np.ndarray, order: int | None = None) -> np.ndarray:
    """Reciprocal series; requires a[0] != 0."""
    if order is None:
        order = len(a) - 1
    if a[0] == 0.0:
        raise ZeroDivisionError("series has vanishing constant term")
    a = np.pad(np.asarray(a, dtype=float), (0, max(0, order + 1 - len(a))))
    out = np.zeros(order + 1)
    out[0] = 1.0 / a[0]
    for p in range(1, order + 1):
        out[p] = -np.dot(a[1 : p + 1], out[p - 1 :: -1]) / a[0]
    return out


def poly_exp(a: np.ndarray, order: int | None = None) -> np.ndarray:
    """exp of a series.  Uses b' = a' b, seeded with exp(a[0])."""
    if order is None:
        order = len(a) - 1
    a = np.pad(np.asarray(a, dtype=float), (0, max(0, order + 1 - len(a))))
    out = np.zeros(order + 1)
    out[0] = np.exp(a[0])
    for p in range(1, order + 1):
        # p * b_p = sum_{q=1}^{p} q * a_q * b_{p-q}
        acc = 0.0
        for q in range(1, p + 1):
            acc += q * a[q] * out[p - q]
        out[p] = acc / p
    return out


def poly_log(a: np.ndarray, order: int | None = None) -> np.ndarray:
    """log of a series with a[0] > 0.  Uses L' = a'/a."""
    if order is None:
        order = len(a) - 1
    a = np.pad(np.asarray(a, dtype=float), (0, max(0, order + 1 - len(a))))
    if a[0] <= 0.0:
        raise ValueError("series log needs a positive constant term")
    out = np.zeros(order + 1)
    out[0] = np.log(a[0])
    for p in range(1, order + 1):
        acc = p * a[p]
        for q in range(1, p):
            acc -= q * out[q] * a[p - q]
        out[p] = acc / (p * a[0])
    return out


def poly_pow(a: np.ndarray, alpha: float, order: int | None = None) -> np.ndarray:
    """a(t)**alpha for real alpha, a[0] > 0.  Via exp(alpha * log a)."""
    if order is None:
        order = len(a) - 1
    return poly_exp(alpha * poly_log(a, order), order)


def poly_eval(a: np.ndarray, t: float) -> float:
    """Horner evaluation of a coefficient array at t."""
    acc = 0.0
    for c in a[::-1]:
        acc = acc * t + c
    return acc


# ---------------------------------------------------------------------------
# matrix-valued series


@dataclass(frozen=True)
class TruncatedMatrixSeries:
    """A square-matrix power series C0 + C1 t + ... + Ch t^h.

    coeffs has shape (h+1, n, n).  Arithmetic stays closed at order h:
    terms beyond the truncation are dropped, never invented.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("coeffs must have shape (order+1, n, n)")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def identity(cls, dim: int, order: int) -> "TruncatedMatrixSeries":
        c = np.zeros((order + 1, dim, dim))
        c[0] = np.eye(dim)
        return cls(c)

    def truncate(self, order: int) -> "TruncatedMatrixSeries":
        if order >= self.order:
            return self
        return TruncatedMatrixSeries(self.coeffs[: order + 1].copy())

    def __add__(self, other: "TruncatedMatrixSeries") -> "TruncatedMatrixSeries":
        h = min(self.order, other.order)
        return TruncatedMatrixSeries(self.coeffs[: h + 1] + other.coeffs[: h + 1])

    def __sub__(self, other: "TruncatedMatrixSeries") -> "TruncatedMatrixSeries":
        h = min(self.order, other.order)
        return TruncatedMatrixSeries(self.coeffs[: h + 1] - other.coeffs[: h + 1])

    def __mul__(self, other: "TruncatedMatrixSeries") -> "TruncatedMatrixSeries":
        h = min(self.order, other.order)
        out = np.zeros((h + 1, self.dim, self.dim))
        for p in range(h + 1):
            for q in range(p + 1):
                out[p] += self.coeffs[q] @ other.coeffs[p - q]
        return TruncatedMatrixSeries(out)

    def scale(self, s: float) -> "TruncatedMatrixSeries":
        return TruncatedMatrixSeries(s * self.coeffs)

    def transpose(self) -> "TruncatedMatrixSeries":
        return TruncatedMatrixSeries(np.swapaxes(self.coeffs, 1, 2).copy())

    def inverse(self) -> "TruncatedMatrixSeries":
        """Series inverse; requires the constant coefficient to be invertible.

        Satisfies S * S.inverse() = I + O(t^{h+1}).
        """
        h = self.order
        out = np.zeros_like(self.coeffs)
        c0_inv = np.linalg.inv(self.coeffs[0])
        out[0] = c0_inv
        for p in range(1, h + 1):
            acc = np.zeros((self.dim, self.dim))
            for q in range(1, p + 1):
                acc += self.coeffs[q] @ out[p - q]
            out[p] = -c0_inv @ acc
        return TruncatedMatrixSeries(out)

    def deriv(self) -> "TruncatedMatrixSeries":
        """Coefficient-wise d/dt; the order drops by one."""
        h = self.order
        if h == 0:
            return TruncatedMatrixSeries(np.zeros((1, self.dim, self.dim)))
        out = np.array([(p + 1) * self.coeffs[p + 1] for p in range(h)])
        return TruncatedMatrixSeries(out)

    def trace(self) -> np.ndarray:
        """Scalar series of traces."""
        return np.trace(self.coeffs, axis1=1, axis2=2)

    def at(self, t: float) -> np.ndarray:
        """Evaluate the truncated polynomial at a time t (Horner)."""
        acc = np.zeros((self.dim, self.dim))
        for c in self.coeffs[::-1]:
            acc = acc * t + c
        return acc

    def det_series(self) -> np.ndarray:
        """Scalar series of det(S(t)), via d/dt log det = tr(S^-1 S')."""
        h = self.order
        sign, logdet0 = np.linalg.slogdet(self.coeffs[0])
        if sign == 0:
            raise ValueError("det series needs an invertible constant coefficient")
        g = (self.inverse() * self.deriv()).trace()  # order h-1
        logdet = np.zeros(h + 1)
        for p in range(1, h + 1):
            logdet[p] = g[p - 1] / p
        return sign * np.exp(logdet0) * poly_exp(logdet, h)
