"""Exception hierarchy shared by every module."""


class SettleSimError(Exception):
    """Base class for all settlesim errors."""


class ConfigError(SettleSimError):
    """Invalid run or simulation configuration.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class FormatError(SettleSimError):
    """Unreadable or malformed block-log / record bytes."""


class EmptyBatch(SettleSimError):
    pass


class StatusViolation(SettleSimError):
    pass


class OutOfRange(SettleSimError):
    pass


class OutOfOrderTransition(SettleSimError):
    pass


class ZeroValidators(SettleSimError):
    pass


class NotLeader(SettleSimError):
    pass


class DuplicateProposal(SettleSimError):
    pass


class Violation(SettleSimError):
    """A transaction broke a contract rule; ``reason`` is a ``RejectReason``."""

    def __init__(self, reason, message: str = ""):
        super().__init__(message or getattr(reason, "name", str(reason)))
        self.reason = reason


class InsufficientBalance(Violation):
    def __init__(self, message: str = ""):
        from .ledger import RejectReason

        super().__init__(RejectReason.INSUFFICIENT_BALANCE, message)


class UnknownTransaction(SettleSimError):
    pass


class AlreadyResolved(SettleSimError):
    pass


class StaleOracle(SettleSimError):
    pass


class UnknownCurrencyPair(SettleSimError):
    pass


class NoFeedData(SettleSimError):
    pass


class UnknownFault(SettleSimError):
    pass


class NonPositiveBaseline(SettleSimError):
    pass


class ZeroSavings(SettleSimError):
    pass


class MissingInput(SettleSimError):
    pass


class SafetyViolation(SettleSimError):
    """Two honest validators committed different blocks at one height."""
