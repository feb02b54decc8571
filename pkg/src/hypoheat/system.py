"""Linear system model, controllability filtration, and point classification.

A system is a pair (A, B) with an optional constant drift offset alpha,
describing the degenerate diffusion dx = (A x + alpha) dt + B dw.  Everything
downstream (Gramians, optimal control, kernel asymptotics) assumes the
controllability rank test holds, so construction goes through
:func:`validate_system`, which caches the controllability step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NotControllable,
    RankDeficientB,
    SeriesDegenerate,
)
from .util import as_matrix, as_vector

# relative threshold for numerical rank decisions (times largest singular value)
RANK_RTOL = 1e-10
# relative threshold for subspace membership of a drift vector
MEMBERSHIP_RTOL = 1e-8
# scale-aware threshold below which a drift vector counts as zero
EQUILIBRIUM_ATOL = 1e-12


@dataclass(frozen=True)
class LinearSystem:
    """Validated constant-coefficient system (A, B, alpha).

    Attributes
    ----------
    A : (n, n) array
        State matrix.
    B : (n, k) array
        Full-column-rank input/noise matrix, k <= n.
    alpha : (n,) array
        Constant drift offset (zeros when absent).
    kalman_step : int
        Smallest m with rank [B, AB, ..., A^{m-1}B] = n.
    """

    A: np.ndarray
    B: np.ndarray
    alpha: np.ndarray
    kalman_step: int

    def __post_init__(self):
        for arr in (self.A, self.B, self.alpha):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def rank(self) -> int:
        return self.B.shape[1]

    @property
    def diffusion(self) -> np.ndarray:
        """The symmetric product B B^T."""
        return self.B @ self.B.T


def validate_system(A, B, alpha=None, rank_rtol: float = RANK_RTOL) -> LinearSystem:
    """Check shapes, finiteness, column rank of B, and controllability.

    Parameters
    ----------
    A, B : array_like
        State and input matrices.
    alpha : array_like, optional
        Constant drift offset; absent means zero.
    rank_rtol : float
        Relative singular-value threshold for rank decisions.

    Returns
    -------
    LinearSystem
        Validated system with the controllability step cached.

    Raises
    ------
    DimensionMismatch, NonFinite, RankDeficientB, NotControllable
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
    k = B.shape[1]
    if not 1 <= k <= n:
        raise DimensionMismatch(f"B must have between 1 and {n} columns, got {k}")
    if alpha is None:
        off = np.zeros(n)
    else:
        off = as_vector(alpha, "alpha")
        if off.shape != (n,):
            raise DimensionMismatch(f"alpha must have length {n}, got {off.shape}")

    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= rank_rtol * sv[0]:
        raise RankDeficientB(
            f"B has numerical rank < {k} (min/max singular value "
            f"{sv[-1]:.3e}/{sv[0]:.3e})"
        )

    dims = _kalman_dims(A, B, rank_rtol)
    if dims[-1] < n:
        raise NotControllable(
            f"controllability matrix has rank {dims[-1]} < {n}",
            achieved_rank=int(dims[-1]),
        )
    return LinearSystem(A=A, B=B, alpha=off, kalman_step=len(dims))


def _kalman_dims(A: np.ndarray, B: np.ndarray, rank_rtol: float) -> list[int]:
    """Ranks of [B], [B, AB], ... until they saturate (at most n blocks)."""
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    stacked = np.hstack(blocks)
    sv_all = np.linalg.svd(stacked, compute_uv=False)
    thresh = rank_rtol * sv_all[0]
    dims = []
    for i in range(1, n + 1):
        sub = stacked[:, : i * B.shape[1]]
        sv = np.linalg.svd(sub, compute_uv=False)
        r = int(np.sum(sv > thresh))
        dims.append(r)
        if r == n or (i > 1 and r == dims[-2]):
            break
    # drop a trailing repeat left by the saturation probe
    if len(dims) > 1 and dims[-1] == dims[-2]:
        dims.pop()
    return dims


@dataclass(frozen=True)
class Filtration:
    """Growth data of the controllability subspaces E_i = col[B, ..., A^{i-1}B].

    Attributes
    ----------
    dims : tuple[int, ...]
        k_i = dim E_i, strictly increasing to n.
    increments : tuple[int, ...]
        d_i = k_i - k_{i-1}; non-increasing.
    step : int
        Number of subspaces m, with E_m = R^n.
    rows : tuple[int, ...]
        Diagram row lengths n_j = #{i : d_i >= j}.
    decay_exponent : int
        Sum (2i-1) d_i; the on-diagonal kernel decays like t^{-decay_exponent/2}.
    adapted_basis : (n, n) array
        Orthonormal columns; the first k_i of them span E_i.  Built by
        modified Gram-Schmidt over the ordered column blocks B, AB, ...
        keeping first-seen independent directions.
    """

    dims: tuple[int, ...]
    increments: tuple[int, ...]
    step: int
    rows: tuple[int, ...]
    decay_exponent: int
    adapted_basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.adapted_basis.setflags(write=False)

    @property
    def scaling_weights(self) -> np.ndarray:
        """Odd integers w_j = 2i-1 per coordinate: the diagonal rescaling
        at time t multiplies coordinate j by sqrt(t)**w_j."""
        return np.repeat(2 * np.arange(1, self.step + 1) - 1, self.increments)

    @property
    def block_slices(self) -> list[slice]:
        edges = np.concatenate([[0], np.cumsum(self.increments)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def build_filtration(sys: LinearSystem, rank_rtol: float = RANK_RTOL) -> Filtration:
    """Compute subspace dimensions, diagram rows, decay exponent, and an
    orthonormal adapted basis for a validated system."""
    A, B, n = sys.A, sys.B, sys.dim
    dims = _kalman_dims(A, B, rank_rtol)
    increments = [dims[0]] + [dims[i] - dims[i - 1] for i in range(1, len(dims))]
    if any(d <= 0 for d in increments):
        raise SeriesDegenerate("subspace dimensions are not strictly increasing")
    if any(increments[i] < increments[i + 1] for i in range(len(increments) - 1)):
        raise SeriesDegenerate("subspace growth increments are not non-increasing")
    m = len(dims)
    rows = tuple(
        sum(1 for d in increments if d >= j) for j in range(1, increments[0] + 1)
    )
    exponent = sum((2 * i - 1) * d for i, d in enumerate(increments, start=1))

    basis = _adapted_basis(A, B, dims, rank_rtol)
    return Filtration(
        dims=tuple(dims),
        increments=tuple(increments),
        step=m,
        rows=rows,
        decay_exponent=int(exponent),
        adapted_basis=basis,
    )


def _adapted_basis(A, B, dims, rank_rtol) -> np.ndarray:
    """Orthonormal basis adapted to the subspace flag, by modified
    Gram-Schmidt (with one reorthogonalization pass) over B, AB, A^2 B, ...

    The per-block count of accepted directions must reproduce the
    SVD-determined dimensions; otherwise the rank decisions are inconsistent
    and we refuse to continue.
    """
    n = A.shape[0]
    cols: list[np.ndarray] = []
    block = B.copy()
    for i, target in enumerate(dims):
        for j in range(block.shape[1]):
            v = block[:, j]
            scale = np.linalg.norm(v)
            for _ in range(2):  # MGS with reorthogonalization
                for q in cols:
                    v = v - q * (q @ v)
            norm = np.linalg.norm(v)
            if scale > 0 and norm > max(rank_rtol * scale, 1e-14 * scale):
                cols.append(v / norm)
        if len(cols) != target:
            raise SeriesDegenerate(
                f"adapted basis found {len(cols)} directions through block {i + 1}, "
                f"rank test expected {target}"
            )
        block = A @ block
    return np.column_stack(cols)


@dataclass(frozen=True)
class PointClass:
    """Regime of a base point x0 under the drift field x -> A x + alpha.

    level 0 means the drift vanishes at x0 (equilibrium); level i >= 1 means
    the drift lies in E_i but not E_{i-1}.
    """

    level: int
    drift: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.drift.setflags(write=False)

    @property
    def is_equilibrium(self) -> bool:
        return self.level == 0

    def label(self) -> str:
        return "equilibrium" if self.level == 0 else f"level-{self.level}"


def classify_point(
    sys: LinearSystem,
    x0,
    filtration: Filtration | None = None,
    membership_rtol: float = MEMBERSHIP_RTOL,
    equilibrium_atol: float = EQUILIBRIUM_ATOL,
) -> PointClass:
    """Classify x0 by where its drift vector sits in the subspace flag.

    The drift v = A x0 + alpha counts as zero when |v| is below
    equilibrium_atol * (1 + |A| |x0| + |alpha|); otherwise membership in E_i
    is tested by the projection residual onto the first k_i adapted basis
    columns, relative to |v|.
    """
    x0 = as_vector(x0, "x0")
    if x0.shape != (sys.dim,):
        raise DimensionMismatch(f"x0 must have length {sys.dim}, got {x0.shape}")
    if filtration is None:
        filtration = build_filtration(sys)
    v = sys.A @ x0 + sys.alpha
    scale = 1.0 + np.linalg.norm(sys.A, 2) * np.linalg.norm(x0) + np.linalg.norm(
        sys.alpha
    )
    if np.linalg.norm(v) <= equilibrium_atol * scale:
        return PointClass(level=0, drift=v)
    T = filtration.adapted_basis
    for i, k_i in enumerate(filtration.dims, start=1):
        proj = T[:, :k_i] @ (T[:, :k_i].T @ v)
        if np.linalg.norm(v - proj) <= membership_rtol * np.linalg.norm(v):
            return PointClass(level=i, drift=v)
    # controllable systems always end at E_m = R^n; numerical safety net
    return PointClass(level=filtration.step, drift=v)
