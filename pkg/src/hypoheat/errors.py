"""Exception types shared across the package.

Everything raised on bad input or on a detected numerical inconsistency
derives from :class:`HypoheatError`, so callers (and the CLI) can catch one
base class and map it to an input-error exit code.
"""

from __future__ import annotations


class HypoheatError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(HypoheatError):
    """Array shapes are inconsistent with a square-state linear system."""


class RankDeficientB(HypoheatError):
    """The input matrix driving the noise has linearly dependent columns."""


class NotControllable(HypoheatError):
    """The pair (A, B) fails the controllability rank test.

    Attributes
    ----------
    achieved_rank : int
        Rank of the controllability matrix that was actually reached.
    """

    def __init__(self, message: str, achieved_rank: int = -1):
        super().__init__(message)
        self.achieved_rank = achieved_rank


class NonFinite(HypoheatError):
    """An input array contains NaN or infinite entries."""


class NonPositiveTime(HypoheatError):
    """A strictly positive time horizon was required."""


class SeriesDegenerate(HypoheatError):
    """The rescaled small-time expansion is inconsistent.

    Signals that the leading coefficient matrix failed to be positive
    definite beyond tolerance, which means the subspace growth data and
    the Gramian expansion disagree (usually a near rank-deficient input).
    """


class FitIllConditioned(HypoheatError):
    """The least-squares grid fit has an unusable condition number."""


class ExtrapolationUnstable(HypoheatError):
    """Successive pole-coefficient estimates failed to settle."""


class InvalidConfig(HypoheatError):
    """A simulation configuration violates its invariants."""


class TooFewSamples(HypoheatError):
    """Not enough Monte Carlo samples for the requested statistics."""


class IllConditionedWarning(UserWarning):
    """A direct solve was requested in a regime where the matrix is nearly
    singular; the computation was rerouted through the rescaled expansion."""
