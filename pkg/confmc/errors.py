"""Error hierarchy shared by every confmc module.

Every error carries an ``exit_code`` that ``confmc`` (the CLI) returns:

- ``2``  invalid input: malformed files, non-stochastic matrices, instances
         too large for exact enumeration
- ``3``  backend failure: LP backend or SMT solver unavailable / misbehaving,
         or an internal soundness guard tripped
"""

from __future__ import annotations

from typing import Optional


class ConfmcError(Exception):
    """Base class for all confmc errors."""

    exit_code: int = 3


# ---------------------------------------------------------------------------
# Invalid input  (exit 2)
# ---------------------------------------------------------------------------

class InvalidInput(ConfmcError, ValueError):
    """Raised when user-supplied data cannot be used as given."""

    exit_code = 2


class NotNormalized(InvalidInput):
    """Raised when distribution weights do not sum to exactly 1."""


class NegativeWeight(InvalidInput):
    """Raised when a distribution weight is negative."""


class InvalidScheduler(InvalidInput):
    """Raised when a scheduler evaluates to something other than a distribution."""


class DimensionMismatch(InvalidInput):
    """Raised when vectors / matrices of different sizes are combined."""


class NotStochastic(InvalidInput):
    """Raised when a transition matrix row is not a probability distribution."""

    def __init__(self, action: str, row: int, total, detail: str = ""):
        self.action = action
        self.row = row
        self.total = total
        msg = f"matrix of action '{action}' row {row} sums to {total}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BranchExplosion(InvalidInput):
    """Raised when exact enumeration would exceed the configured branch cap."""


class ConjunctExplosion(InvalidInput):
    """Raised when the complement decomposition has too many conjuncts."""

    def __init__(self, n_generators: int, n_states: int, cap: int):
        self.n_generators = n_generators
        self.n_states = n_states
        self.cap = cap
        super().__init__(
            f"{n_states}^{n_generators} complement conjuncts exceed the cap of {cap} "
            f"(n={n_generators} generators, |Q|={n_states})"
        )


class NotAffine(InvalidInput):
    """Raised when Farkas elimination is asked to handle a non-affine right-hand side."""


class DegreeTooHigh(InvalidInput):
    """Raised when Handelman elimination exceeds its degree or product cap."""


class SemanticsMismatch(InvalidInput):
    """Raised when compositional and closed-form successor distributions disagree."""


class ParseError(InvalidInput):
    """Raised when a model / query file cannot be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = []
        if path:
            where.append(f"at {path}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


# ---------------------------------------------------------------------------
# Backend failure  (exit 3)
# ---------------------------------------------------------------------------

class BackendFailure(ConfmcError, RuntimeError):
    """Raised when an LP backend or external solver fails."""

    exit_code = 3


class SolverSpawnFailure(BackendFailure):
    """Raised when the SMT solver process cannot be started."""


class ModelParseError(BackendFailure):
    """Raised when solver output cannot be turned into exact rational values."""

    def __init__(self, message: str, raw_output: str = ""):
        self.raw_output = raw_output
        super().__init__(message)


class WitnessReplayFailed(BackendFailure):
    """Raised when an extracted witness does not replay into the target set."""
