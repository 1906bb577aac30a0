"""Exception hierarchy.

Everything raised on bad user input derives from :class:`ConfigError`, which
the CLI maps to exit code 2.
"""


class MfzetaError(Exception):
    pass


class ConfigError(MfzetaError, ValueError):
    """Invalid system description, table, or CLI argument."""


class NotStronglyConnected(ConfigError):
    pass


class BadProbabilityVector(ConfigError):
    def __init__(self, vertex, total):
        self.vertex = vertex
        self.total = total
        super().__init__(
            f"probabilities of edges leaving vertex {vertex!r} sum to {total!r}, expected 1"
        )


class BadRatio(ConfigError):
    def __init__(self, edge, message):
        self.edge = edge
        super().__init__(f"edge {edge!r}: {message}")


class EnumerationCapExceeded(MfzetaError):
    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        super().__init__(
            f"refusing to enumerate {count} words (cap {cap}); raise MFZETA_CAP to override"
        )


class DepthMismatch(MfzetaError, ValueError):
    pass


class DenominatorSignViolation(MfzetaError, ValueError):
    pass


class BadHolderData(ConfigError):
    pass


class NotIrreducible(MfzetaError, ValueError):
    pass


class NotNegative(MfzetaError, ValueError):
    pass


class SignViolation(MfzetaError, ValueError):
    pass


class PositivityViolation(MfzetaError, ValueError):
    pass


class DegenerateTarget(MfzetaError, ValueError):
    """Target set whose interior misses the attainable set.

    The fixed-target value in that situation is ``-inf``; it is carried on
    the exception so callers can report it instead of failing.
    """

    value = float("-inf")


class UnknownSubcommand(ConfigError):
    pass
