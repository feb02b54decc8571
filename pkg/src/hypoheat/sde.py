"""Monte Carlo validation of the transition density moments.

Two schemes integrate dx = (A x + alpha) dt + B dw:

* "euler": explicit Euler-Maruyama, biased at first order in dt;
* "exact": iterated draws from the exact Gaussian one-step transition,
  bias-free at any step size.

Randomness comes from a counter-based Philox stream expanded to normals by
the inverse CDF, so a seed pins the sample set bit-for-bit across platforms
(rejection-based normal samplers do not have that property).  Draws are
consumed one time step at a time, all paths at once; the draw order is part
of the reproducibility contract.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import InvalidConfig, TooFewSamples
from .gramian import SMALL_TIME, covariance, matrix_exponential, rescaled_series
from .kernel import drift_integral
from .system import LinearSystem
from .util import as_vector

SCHEMES = ("euler", "exact")


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo run description.

    dt must not exceed t_final; the number of steps is round(t_final / dt)
    and the effective step is t_final / steps, so the endpoint is hit
    exactly.
    """

    n_paths: int
    dt: float
    t_final: float
    seed: int = 0
    scheme: str = "exact"

    def __post_init__(self):
        if self.n_paths < 2:
            raise InvalidConfig(f"n_paths must be >= 2, got {self.n_paths}")
        if not self.t_final > 0:
            raise InvalidConfig(f"t_final must be positive, got {self.t_final}")
        if not 0 < self.dt <= self.t_final:
            raise InvalidConfig(
                f"dt must lie in (0, t_final], got dt={self.dt}, t_final={self.t_final}"
            )
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    @property
    def dt_effective(self) -> float:
        return self.t_final / self.n_steps


def _normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by inverse CDF of Philox uniforms."""
    u = rng.random(shape)
    # rng.random() lies in [0, 1); shift the exact zero away from the pole
    return ndtri(np.maximum(u, 1e-300))


def simulate(sys: LinearSystem, x0, config: SimulationConfig) -> np.ndarray:
    """Endpoint samples of shape (n_paths, n) at time t_final."""
    x0 = as_vector(x0, "x0")
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    dt = config.dt_effective
    steps = config.n_steps
    n, k = sys.dim, sys.rank
    state = np.tile(x0, (config.n_paths, 1))

    if config.scheme == "euler":
        bdt = math.sqrt(dt) * sys.B
        for _ in range(steps):
            z = _normals(rng, (config.n_paths, k))
            state = state + dt * (state @ sys.A.T + sys.alpha) + z @ bdt.T
        return state

    # exact Gaussian one-step transition
    E = matrix_exponential(dt * sys.A)
    shift = E @ drift_integral(sys, dt)
    if dt < SMALL_TIME:
        # graded square root: cov = (E T J) M (E T J)^T with M well conditioned
        ser = rescaled_series(sys)
        j = dt ** (0.5 * ser.scaling_weights)
        root = np.linalg.cholesky(ser.eval(dt))
        L = E @ ser.basis @ (root * j[:, None])
    else:
        L = np.linalg.cholesky(covariance(sys, dt))
    for _ in range(steps):
        z = _normals(rng, (config.n_paths, n))
        state = state @ E.T + shift + z @ L.T
    return state


@dataclass(frozen=True)
class MomentReport:
    """z-scores of sample mean and covariance against their references.

    Mean entry j is compared with standard error sqrt(cov_jj / n); covariance
    entry (j, h) with the Gaussian asymptotic standard error
    sqrt((cov_jj cov_hh + cov_jh^2) / n).  passed means every |z| <= z_max.
    """

    n_paths: int
    t: float
    z_mean: np.ndarray = field(repr=False)
    z_cov: np.ndarray = field(repr=False)
    max_abs_z: float = 0.0
    z_max: float = 4.0
    passed: bool = False
    ref_mean: np.ndarray = field(default=None, repr=False)
    ref_cov: np.ndarray = field(default=None, repr=False)
    sample_mean: np.ndarray = field(default=None, repr=False)
    sample_cov: np.ndarray = field(default=None, repr=False)


def _moment_report(
    samples: np.ndarray,
    ref_mean: np.ndarray,
    ref_cov: np.ndarray,
    t: float,
    z_max: float,
) -> MomentReport:
    n_paths, n = samples.shape
    smean = samples.mean(axis=0)
    scov = np.cov(samples, rowvar=False).reshape(n, n)
    var = np.diag(ref_cov)
    z_mean = (smean - ref_mean) / np.sqrt(var / n_paths)
    se_cov = np.sqrt((np.outer(var, var) + ref_cov**2) / n_paths)
    z_cov = (scov - ref_cov) / se_cov
    max_abs = float(max(np.max(np.abs(z_mean)), np.max(np.abs(z_cov))))
    return MomentReport(
        n_paths=n_paths,
        t=t,
        z_mean=z_mean,
        z_cov=z_cov,
        max_abs_z=max_abs,
        z_max=z_max,
        passed=bool(max_abs <= z_max),
        ref_mean=ref_mean,
        ref_cov=ref_cov,
        sample_mean=smean,
        sample_cov=scov,
    )


def moment_check(
    samples: np.ndarray,
    sys: LinearSystem,
    x0,
    t: float,
    z_max: float = 4.0,
) -> MomentReport:
    """Compare endpoint samples against the exact transition moments.

    Raises TooFewSamples below 1000 paths; the asymptotic standard errors
    are meaningless for small batches.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != sys.dim:
        raise InvalidConfig(
            f"samples must have shape (n_paths, {sys.dim}), got {samples.shape}"
        )
    if samples.shape[0] < 1000:
        raise TooFewSamples(f"need >= 1000 samples, got {samples.shape[0]}")
    x0 = as_vector(x0, "x0")
    ref_mean = matrix_exponential(t * sys.A) @ (x0 + drift_integral(sys, t))
    ref_cov = covariance(sys, t)
    return _moment_report(samples, ref_mean, ref_cov, t, z_max)


def write_samples_csv(samples: np.ndarray, path) -> None:
    """Dump endpoint samples, one row per path, columns x1..xn."""
    samples = np.asarray(samples, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(samples.shape[1])])
        writer.writerows(samples.tolist())
