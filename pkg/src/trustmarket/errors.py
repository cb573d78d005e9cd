"""Exception hierarchy shared across the trust, crypto, auth, broker and company layers."""

from __future__ import annotations


class TrustMarketError(Exception):
    """Base class for every error raised by this package."""


# trust algebra
class TrustValueError(TrustMarketError, ValueError):
    """An input violates an Opinion/EvidenceRecord/RatingScale constraint."""


class DegenerateBaseRate(TrustValueError):
    """AND with both f = 1, or OR with both f = 0; the operator is undefined."""


class ZeroBaseExpectation(TrustValueError):
    """Behavioral probability requested with f = 0."""


class EvidenceCapReached(TrustMarketError):
    """r + s already equals N; certainty is undefined past the cap."""


class ClampOverflow(TrustMarketError, ArithmeticError):
    """An operator result left [0, 1] by more than rounding noise."""


# crypto
class CryptoError(TrustMarketError):
    pass


class UnknownPrincipal(CryptoError, KeyError):
    pass


class IntegrityFailure(CryptoError):
    pass


class WrongKey(CryptoError):
    pass


class DecryptFailure(CryptoError):
    pass


class MissingKey(DecryptFailure):
    """The key referenced by an invoice is no longer in the keystore."""


class EncryptionFailure(CryptoError):
    pass


class UnsupportedAlgorithm(CryptoError, ValueError):
    pass


# auth
class AuthError(TrustMarketError):
    pass


class DuplicateUser(AuthError):
    pass


class InvalidMailAddress(AuthError, ValueError):
    pass


class UnknownUser(AuthError, KeyError):
    pass


class BadOtp(AuthError):
    pass


class ReplayedOtp(BadOtp):
    """The OTP was valid once and has already been consumed."""


class Unauthenticated(AuthError):
    pass


# broker / company
class MarketError(TrustMarketError):
    pass


class DuplicateCompany(MarketError):
    pass


class InvalidProfile(MarketError, ValueError):
    pass


class UnknownCompany(MarketError, KeyError):
    pass


class CompanyUnavailable(MarketError):
    pass


class NotRegistered(MarketError):
    pass


class TransportFailure(MarketError):
    pass


class NoBrokeredSession(MarketError):
    pass


class NoCompletedTransaction(MarketError):
    """Evidence reported for a client that never transacted with the company."""


class UnknownInvoice(MarketError, KeyError):
    pass


class Unauthorized(MarketError):
    pass


class UnknownServer(MarketError, KeyError):
    pass


# harness
class ScriptError(TrustMarketError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class StepError(TrustMarketError):
    """A module error raised while executing a scenario step."""

    def __init__(self, step_index: int, line: int, cause: Exception):
        self.step_index = step_index
        self.line = line
        self.cause = cause
        super().__init__(
            f"step {step_index} (line {line}): {type(cause).__name__}: {cause}"
        )


class InvalidResolution(TrustMarketError, ValueError):
    pass


class NoTransactions(TrustMarketError):
    pass


def error_by_name(name: str) -> type[TrustMarketError]:
    """Resolve an error class from its name, as carried in reply messages."""
    cls = globals().get(name)
    if isinstance(cls, type) and issubclass(cls, TrustMarketError):
        return cls
    return TransportFailure
