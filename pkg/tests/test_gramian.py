"""Gramian, covariance, rescaled series, and the small-time solve routes.

Closed-form oracles used below, derived by hand before freezing:

* double integrator (A e1 = e2 feed, B = e1): exp(-sA) B = (1, -s), so
  gram(t) = [[t, -t^2/2], [-t^2/2, t^3/3]] exactly and cov(t) is the same
  with +t^2/2 off-diagonal.
* chain3: exp(-sA) B = (1, -s, s^2/2), so gram(t) is the 3x3 moment matrix
  with entries t, -t^2/2, t^3/6, t^3/3, -t^4/8, t^5/20 -- a polynomial
  matrix that Fraction arithmetic can invert exactly at rational t.
* scalar OU: gram(t) = (1 - e^{-2t})/2, cov(t) = (e^{2t} - 1)/2.
"""

from fractions import Fraction

import numpy as np
import pytest

from hypoheat import (
    NonPositiveTime,
    build_filtration,
    covariance,
    covariance_logdet,
    det_covariance_expansion,
    flow_integral,
    gram_logdet,
    gram_quadratic_form,
    gram_solve,
    gramian,
    gramian_quadrature,
    matrix_exponential,
    reconstruct_gramian,
    rescaled_series,
)
from hypoheat.gramian import _gramian_any
from conftest import random_controllable


def di_gram_exact(t: float) -> np.ndarray:
    return np.array([[t, -t * t / 2], [-t * t / 2, t**3 / 3]])


def chain3_gram_fractions(t: Fraction):
    """Exact rational Gramian of the length-3 chain at rational t."""
    return [
        [t, -t**2 / 2, t**3 / 6],
        [-t**2 / 2, t**3 / 3, -t**4 / 8],
        [t**3 / 6, -t**4 / 8, t**5 / 20],
    ]


def solve_fractions(mat, rhs):
    """Gaussian elimination over Fractions; exact reference solve."""
    n = len(mat)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col] / aug[col][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


# ---------------------------------------------------------------------------
# matrix exponential and flow integral


def test_matrix_exponential_cases():
    np.testing.assert_allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3))
    N = np.array([[0.0, 0.0], [0.7, 0.0]])
    np.testing.assert_allclose(matrix_exponential(N), np.eye(2) + N, atol=1e-15)
    np.testing.assert_allclose(matrix_exponential(np.array([[1.0]])), [[np.e]], rtol=1e-15)


def test_flow_integral_matches_quadrature(rng):
    from scipy.integrate import quad_vec
    import scipy.linalg

    for _ in range(5):
        A = rng.uniform(-1, 1, (3, 3))
        t = float(rng.uniform(0.1, 2.0))
        direct = flow_integral(A, t)
        ref, _ = quad_vec(lambda s: scipy.linalg.expm(-s * A), 0.0, t, epsabs=1e-12)
        np.testing.assert_allclose(direct, ref, atol=1e-10)


# ---------------------------------------------------------------------------
# gramian / covariance closed forms


def test_gramian_double_integrator(double_integrator):
    np.testing.assert_allclose(
        gramian(double_integrator, 1.0), [[1.0, -0.5], [-0.5, 1 / 3]], atol=1e-14
    )
    for t in (0.1, 0.7, 2.0):
        np.testing.assert_allclose(gramian(double_integrator, t), di_gram_exact(t), atol=1e-13)


def test_gramian_elliptic(elliptic3):
    np.testing.assert_allclose(gramian(elliptic3, 0.9), 0.9 * np.eye(3), atol=1e-14)


def test_gramian_scalar_ou(scalar_ou):
    t = 1.0
    np.testing.assert_allclose(
        gramian(scalar_ou, t), [[(1 - np.exp(-2 * t)) / 2]], rtol=1e-14
    )
    np.testing.assert_allclose(
        covariance(scalar_ou, t), [[(np.exp(2 * t) - 1) / 2]], rtol=1e-14
    )


def test_gramian_rejects_nonpositive_time(double_integrator):
    with pytest.raises(NonPositiveTime):
        gramian(double_integrator, 0.0)
    with pytest.raises(NonPositiveTime):
        covariance(double_integrator, -1.0)


def test_covariance_double_integrator(double_integrator):
    for t in (0.3, 1.0):
        np.testing.assert_allclose(
            covariance(double_integrator, t),
            [[t, t * t / 2], [t * t / 2, t**3 / 3]],
            atol=1e-13,
        )


def test_gramian_agrees_with_quadrature(rng):
    for _ in range(8):
        sys = random_controllable(rng, n_max=4)
        for t in (1e-3, 0.3, 2.0):
            g = gramian(sys, t)
            q = gramian_quadrature(sys, t)
            assert np.linalg.norm(g - q) <= 1e-9 * max(np.linalg.norm(g), 1e-12)


def test_covariance_is_reflected_gramian(rng):
    for _ in range(8):
        sys = random_controllable(rng, n_max=5)
        for t in (0.1, 0.37, 1.0):
            d = covariance(sys, t)
            np.testing.assert_allclose(d, -_gramian_any(sys, -t), atol=1e-10 * (1 + np.abs(d).max()))


# ---------------------------------------------------------------------------
# rescaled series


def test_series_double_integrator(double_integrator):
    ser = rescaled_series(double_integrator)
    assert ser.c0 == pytest.approx(1 / 12, abs=1e-14)
    np.testing.assert_allclose(ser.leading, [[1.0, -0.5], [-0.5, 1 / 3]], atol=1e-12)
    np.testing.assert_allclose(ser.subleading, 0.0, atol=1e-12)
    np.testing.assert_allclose(ser.scaling_weights, [1, 3])


def test_series_elliptic(elliptic3):
    ser = rescaled_series(elliptic3)
    assert ser.c0 == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(ser.leading, np.eye(3), atol=1e-14)
    for p in range(1, ser.order + 1):
        np.testing.assert_allclose(ser.coeffs[p], 0.0, atol=1e-14)


def test_series_scalar_ou(scalar_ou):
    # gram(t) = (1 - e^{-2t})/2 = t - t^2 + (2/3) t^3 - (1/3) t^4 + ...
    ser = rescaled_series(scalar_ou)
    np.testing.assert_allclose(ser.leading, [[1.0]], atol=1e-14)
    np.testing.assert_allclose(ser.subleading, [[-1.0]], atol=1e-14)
    np.testing.assert_allclose(ser.coeffs[2], [[2 / 3]], atol=1e-13)
    np.testing.assert_allclose(ser.coeffs[3], [[-1 / 3]], atol=1e-13)


def test_series_trace_identity_random(rng):
    for _ in range(15):
        sys = random_controllable(rng)
        ser = rescaled_series(sys)
        tr = np.trace(np.linalg.solve(ser.leading, ser.subleading))
        assert tr == pytest.approx(-np.trace(sys.A), abs=1e-9 * (1 + abs(np.trace(sys.A))))


def test_series_input_block_top_left_identity(rng):
    # with orthonormalized B columns the top-left k x k block of the
    # leading coefficient is the identity
    for _ in range(10):
        sys = random_controllable(rng, n_max=4)
        ser = rescaled_series(sys)
        k = sys.rank
        bhat = ser.input_block
        np.testing.assert_allclose(
            ser.leading[:k, :k], bhat @ bhat.T, atol=1e-10
        )


def test_series_reconstruction_error_shrinks(rng):
    # relative reconstruction error of the order-h series must drop by
    # >= 10x when t halves (it scales like t^{h+1})
    for _ in range(5):
        sys = random_controllable(rng, n_max=4)
        ser = rescaled_series(sys, order=6)
        errs = []
        for t in (0.1, 0.05):
            g = gramian(sys, t)
            rel = np.linalg.norm(reconstruct_gramian(ser, t) - g) / np.linalg.norm(g)
            errs.append(rel)
        if errs[0] < 1e-13:  # exactly polynomial Gramian: nothing to shrink
            continue
        assert errs[1] <= errs[0] / 10.0


def test_det_gramian_ratio_converges_to_c0(rng):
    # det gram(t) / t^N -> c0; restrict to step <= 2 so float64 determinants
    # stay meaningful at t = 1e-4
    found = 0
    while found < 6:
        sys = random_controllable(rng, n_max=4)
        filt = build_filtration(sys)
        if filt.step > 2:
            continue
        found += 1
        ser = rescaled_series(sys, filt)
        ratios = [
            np.linalg.det(gramian(sys, t)) / t**filt.decay_exponent
            for t in (1e-2, 1e-3, 1e-4)
        ]
        # first-order extrapolation from the two smallest times
        extrap = ratios[2] + (ratios[2] - ratios[1]) / 9.0
        assert extrap == pytest.approx(ser.c0, rel=5e-4)


def test_det_covariance_expansion_cases(double_integrator, scalar_ou, elliptic3):
    ser = rescaled_series(double_integrator)
    e = det_covariance_expansion(ser, order=5)
    np.testing.assert_allclose(e, [1, 0, 0, 0, 0, 0], atol=1e-12)

    # scalar OU: det cov(t) = (e^{2t}-1)/2 = t (1 + t + (2/3)t^2 + (1/3)t^3 + ...)
    ser = rescaled_series(scalar_ou)
    e = det_covariance_expansion(ser, order=4)
    np.testing.assert_allclose(e, [1, 1, 2 / 3, 1 / 3, 2 / 15], atol=1e-12)

    ser = rescaled_series(elliptic3)
    np.testing.assert_allclose(det_covariance_expansion(ser, order=3), [1, 0, 0, 0], atol=1e-13)


def test_det_covariance_expansion_explicit_trace_argument(scalar_ou):
    ser = rescaled_series(scalar_ou)
    default = det_covariance_expansion(ser, order=3)
    explicit = det_covariance_expansion(ser, 1.0, order=3)
    np.testing.assert_allclose(default, explicit, atol=1e-15)


def test_rescaled_series_rejects_low_order(scalar_ou):
    with pytest.raises(ValueError):
        rescaled_series(scalar_ou, order=1)


# ---------------------------------------------------------------------------
# small-time solve routes, against exact Fraction arithmetic


def test_small_time_quadratic_form_exact_chain(chain3):
    # at t = 1/1000 the raw Gramian has condition ~ 1e16: the series route
    # must still match the exact rational solve to high relative accuracy
    t = Fraction(1, 1000)
    ser = rescaled_series(chain3)
    r_exact = [Fraction(3, 10), Fraction(-1, 5), Fraction(1, 7)]
    sol = solve_fractions(chain3_gram_fractions(t), r_exact)
    quad_exact = float(sum(a * b for a, b in zip(r_exact, sol)))

    r = np.array([float(v) for v in r_exact])
    quad = gram_quadratic_form(ser, float(t), r)
    assert quad == pytest.approx(quad_exact, rel=1e-9)

    sol_np = gram_solve(ser, float(t), r)
    np.testing.assert_allclose(
        sol_np, [float(v) for v in sol], rtol=1e-8
    )


def test_small_time_logdet_exact_chain(chain3):
    # det gram(t) = t^9 / 8640 exactly for the chain: expanding the 3x3
    # moment determinant gives t^9 (1/960 - 1/480 + 1/864) = t^9 / 8640
    t = 1e-3
    ser = rescaled_series(chain3)
    exact = 9 * np.log(t) - np.log(8640.0)
    assert gram_logdet(ser, t) == pytest.approx(exact, rel=1e-12)
    # covariance logdet only shifts by 2 t tr A = 0 here
    assert covariance_logdet(ser, t) == pytest.approx(exact, rel=1e-12)


def test_gram_solve_matches_direct_at_moderate_time(rng):
    for _ in range(5):
        sys = random_controllable(rng, n_max=4)
        ser = rescaled_series(sys)
        t = 0.04  # just below the series threshold
        r = rng.uniform(-1, 1, sys.dim)
        direct = np.linalg.solve(gramian(sys, t), r)
        np.testing.assert_allclose(gram_solve(ser, t, r), direct, rtol=1e-6, atol=1e-9)


def test_gram_logdet_matches_direct_at_moderate_time(rng):
    for _ in range(5):
        sys = random_controllable(rng, n_max=4)
        ser = rescaled_series(sys)
        t = 0.04
        sign, ref = np.linalg.slogdet(gramian(sys, t))
        assert sign == 1.0
        assert gram_logdet(ser, t) == pytest.approx(ref, rel=1e-8)


def test_reconstruct_gramian_matches(double_integrator):
    ser = rescaled_series(double_integrator)
    for t in (1e-4, 1e-2):
        np.testing.assert_allclose(
            reconstruct_gramian(ser, t), di_gram_exact(t), rtol=1e-12, atol=1e-20
        )
