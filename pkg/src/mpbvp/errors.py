"""Exception hierarchy shared across the package."""


class MpbvpError(Exception):
    """Base class for every error raised by this package."""


class ExprError(MpbvpError, ValueError):
    """Problem with an expression: syntax, names, or evaluation.

    ``offset`` is the byte offset into the UTF-8 source, when known.
    """

    def __init__(self, message, offset=None, source=None):
        self.offset = offset
        self.source = source
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class EvalError(ExprError):
    """Unbound variable or non-finite intermediate during evaluation."""


class DimensionMismatch(MpbvpError, ValueError):
    pass


class NumericalFailure(MpbvpError):
    pass


class SingularMatrix(NumericalFailure):
    pass


class StiffnessFailure(NumericalFailure):
    """Integration could not proceed; ``t`` is the last time reached."""

    def __init__(self, message, t):
        self.t = t
        super().__init__(f"{message} (last t = {t!r})")


class IllPosed(MpbvpError):
    """The boundary matrix F failed the solvability test."""

    def __init__(self, reason, rcond, det):
        self.reason = reason
        self.rcond = rcond
        self.det = det
        super().__init__(f"{reason} (rcond = {rcond:.3e}, det = {det:.3e})")


class EpsilonTooSmall(MpbvpError, ValueError):
    pass


class Diverged(NumericalFailure):
    """Fixed-point iteration failed; ``trace`` holds the iteration history."""

    def __init__(self, message, trace):
        self.trace = trace
        super().__init__(message)


class NonFiniteRHS(NumericalFailure):
    pass


class InsufficientData(MpbvpError, ValueError):
    pass


class AnchorOffGrid(MpbvpError, ValueError):
    pass


class OuterUndefined(NumericalFailure):
    pass


class ProblemFileError(MpbvpError):
    """Malformed or inconsistent problem file."""
