"""Typed exceptions raised across the toolkit.

Every error derives from :class:`PottsError` so callers (and the command line
front end) can map failures to exit codes without string matching.
"""

from __future__ import annotations


class PottsError(Exception):
    """Base class for all toolkit errors."""


class BoundaryPoint(PottsError, ValueError):
    """A derivative was requested at a point with a vanishing coordinate."""


class SizeLimit(PottsError, ValueError):
    """The requested system size is too large for full enumeration."""


class SingularInput(PottsError, ValueError):
    """A diagnostic function was evaluated at its pole."""


class NoRoot(PottsError, ValueError):
    """A branch equation has no solution for the given parameters."""


class NoValleys(PottsError, ValueError):
    """The landscape has no metastable valleys at this temperature."""


class OutOfRange(PottsError, ValueError):
    """An argument lies outside the domain of an inverse function."""


class NoSolution(PottsError, ValueError):
    """An off-diagonal critical-point equation has no solution."""


class FoldDetected(PottsError, RuntimeError):
    """Continuation stopped because the tracked critical point disappeared."""


class DegenerateRegime(PottsError, ValueError):
    """Eyring-Kramers predictions are unavailable at a degenerate parameter."""


class EpsilonTooLarge(PottsError, ValueError):
    """The metastable-set margin exceeds the smallest valley depth."""


class NotASaddle(PottsError, ValueError):
    """A saddle-only quantity was requested at a non-saddle point."""


class DegenerateInput(PottsError, ValueError):
    """A minimum-only quantity was requested at a degenerate point."""


class EventBudgetExceeded(PottsError, RuntimeError):
    """A trajectory exhausted its event budget before reaching its target.

    Attributes
    ----------
    partial : object
        The partial trajectory summary recorded before the budget ran out.
    """

    def __init__(self, message: str, partial: object = None) -> None:
        super().__init__(message)
        self.partial = partial
