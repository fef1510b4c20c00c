"""Exception hierarchy for the cantordiff package."""


class CantordiffError(Exception):
    """Base class for all errors raised by this package."""


class NegativeMassError(CantordiffError, ValueError):
    """An atom was given negative probability mass."""


class MassExceedsOneError(CantordiffError, ValueError):
    """Atom masses sum to more than one."""


class MemberOutOfRangeError(CantordiffError, ValueError):
    """A letter lies outside the alphabet, or a bitstring is malformed."""


class ParameterOutOfRangeError(CantordiffError, ValueError):
    """A numeric parameter violates its documented domain."""


class AlphabetMismatchError(CantordiffError, ValueError):
    """Operands are defined over different alphabets."""


class IndexOutOfRangeError(CantordiffError, ValueError):
    """A letter index or word letter lies outside the alphabet."""


class DepthMismatchError(CantordiffError, ValueError):
    """A level was requested beyond a realization's sampled depth."""


class WordLengthMismatchError(CantordiffError, ValueError):
    """A word's length does not match the level of the data it addresses."""


class HypothesisNotMetError(CantordiffError, ValueError):
    """Inputs do not satisfy the hypothesis the routine relies on."""


class InvariantViolationError(CantordiffError, RuntimeError):
    """An internal self-check failed; indicates a bug, not bad input."""


class ResourceLimitExceededError(CantordiffError, RuntimeError):
    """A configured resource cap would be exceeded.

    ``partial`` carries whatever results were completed before the cap hit.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
