"""Exception types shared across the package."""


class CappedKaczmarzError(Exception):
    """Base class for all library errors."""


class DegenerateState(CappedKaczmarzError):
    """Selection was asked for at a state where no greedy rule is defined
    (zero residual, or every row gradient numerically vanished)."""


class EmptySet(CappedKaczmarzError):
    """A greedy index set came out empty.  Unreachable for valid inputs;
    raised defensively so floating-point drift surfaces as a bug."""


class AllWeightsZero(CappedKaczmarzError):
    """Every sampling weight in a selection is zero (stationary degenerate
    state: all selected rows have vanishing gradients)."""


class ZeroGradient(CappedKaczmarzError):
    """A single-row projection step hit an underflowing gradient norm."""


class FactorizationFailure(CappedKaczmarzError):
    """A dense factorization (SVD / least squares) did not complete, or its
    inputs were not finite."""


class DimensionMismatch(CappedKaczmarzError):
    """Problem constructor received inconsistently shaped inputs."""


class InvalidEta(CappedKaczmarzError):
    """A convergence factor was requested for eta >= 1/2, where the bound
    is meaningless."""


class HypothesisViolated(CappedKaczmarzError):
    """A block-factor hypothesis (alpha > 0 or beta > 0) does not hold at
    the given state.  Reported by diagnostics, never fatal to a solve."""


class ParseError(CappedKaczmarzError):
    """Malformed dataset input.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
