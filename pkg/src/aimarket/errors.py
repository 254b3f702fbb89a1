"""Exception hierarchy shared by every protocol module."""


class ProtocolError(Exception):
    """Base class for rejected protocol operations."""


# ledger-core
class ZeroStake(ProtocolError):
    pass


class PassAlreadyActive(ProtocolError):
    pass


class NoActivePass(ProtocolError):
    pass


class InFlightOrders(ProtocolError):
    pass


class InvalidServicePass(ProtocolError):
    """Uncharged order submitted without a usable service pass."""


class InsufficientAllowance(ProtocolError):
    pass


class InsufficientBalance(ProtocolError):
    pass


class UnknownServiceType(ProtocolError):
    pass


class ZeroPrice(ProtocolError):
    pass


class OrderNotFound(ProtocolError):
    pass


class AlreadyAllocated(ProtocolError):
    pass


class MinerUnavailable(ProtocolError):
    pass


class NotAllocated(ProtocolError):
    pass


class BadSignature(ProtocolError):
    pass


class AlreadyCompleted(ProtocolError):
    pass


class OrderExpired(ProtocolError):
    pass


class NoCompletedService(ProtocolError):
    pass


class ClientRestricted(ProtocolError):
    pass


class CollateralTooLow(ProtocolError):
    pass


class AlreadyRegistered(ProtocolError):
    pass


class NotRegistered(ProtocolError):
    pass


class InFlightWork(ProtocolError):
    pass


class AmountOverflow(ProtocolError):
    pass


# scheduler
class EmptyBatch(ProtocolError):
    pass


class IllegalTransition(ProtocolError):
    pass


# selection
class EmptyInput(ProtocolError):
    pass


class NoEligibleMiners(ProtocolError):
    pass


class ZeroTotalReputation(ProtocolError):
    pass


# coordination
class HeightGap(ProtocolError):
    pass


class NotAMember(ProtocolError):
    pass


class DuplicateSignature(ProtocolError):
    pass


# economics
class ConservationViolation(ProtocolError):
    pass


class NotCompleted(ProtocolError):
    pass


class NotCharged(ProtocolError):
    pass


class EmptyListing(ProtocolError):
    pass


# protocol-actors
class NotAllocatedToMe(ProtocolError):
    pass


class NotExecuted(ProtocolError):
    pass


# simulation
class ConfigInvalid(ProtocolError):
    """Scenario configuration failed validation.

    ``location`` names the offending key path, e.g. ``coordinator.m``.
    """

    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class InvariantViolation(ProtocolError):
    """A runtime invariant broke mid-simulation; ``trace`` carries recent events."""

    def __init__(self, message: str, trace: list | None = None) -> None:
        super().__init__(message)
        self.trace = trace or []


class ShapeMismatch(ProtocolError):
    pass
