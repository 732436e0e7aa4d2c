"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations

from enum import Enum


class TSEError(Exception):
    """Base class for all errors raised by this package."""


# group / field


class ZeroInverse(TSEError, ZeroDivisionError):
    pass


class DecodeError(TSEError, ValueError):
    """Bytes do not encode a valid scalar or group element."""


class IdentityOutput(TSEError):
    pass


# secret sharing


class BadThreshold(TSEError, ValueError):
    pass


class DuplicatePoint(TSEError, ValueError):
    pass


class ZeroDenominator(TSEError, ZeroDivisionError):
    """Two evaluation points coincide modulo the group order."""


# commitments / encryption


class LengthMismatch(TSEError, ValueError):
    pass


class LengthLimit(TSEError, ValueError):
    pass


class DecryptionError(TSEError):
    pass


class MalformedCiphertext(DecryptionError):
    pass


class CommitmentMismatch(DecryptionError):
    def __init__(self, msg: str = "commitment mismatch"):
        super().__init__(msg)


# dprf


class ProofRejected(TSEError):
    """A partial evaluation failed its proof check."""

    def __init__(self, issuer: int):
        super().__init__(f"proof rejected for participant {issuer}")
        self.issuer = issuer


# protocol


class AbortReason(str, Enum):
    DEGREE_TOO_HIGH = "DegreeTooHigh"
    DEGREE_TOO_LOW = "DegreeTooLow"
    IDENTITY_SECRET = "IdentitySecret"
    PROOF_REJECTED = "ProofRejected"
    TIMEOUT = "Timeout"
    EPOCH_MISMATCH = "EpochMismatch"
    REFRESH_MISMATCH = "RefreshMismatch"
    MISSING_DEAL = "MissingDeal"
    COORDINATOR = "CoordinatorAbort"


class ProtocolAborted(TSEError):
    """The setup or refresh instance must be discarded and restarted."""

    def __init__(self, reason: AbortReason, participant: int | None = None, detail: str = ""):
        self.reason = AbortReason(reason)
        self.participant = participant
        self.detail = detail
        text = self.reason.value
        if participant is not None:
            text += f"({participant})"
        if detail:
            text += f": {detail}"
        super().__init__(text)


class MissingDeal(ProtocolAborted):
    def __init__(self, participant: int):
        super().__init__(AbortReason.MISSING_DEAL, participant)


class EpochMismatch(ProtocolAborted):
    def __init__(self, expected: int, got: int):
        super().__init__(AbortReason.EPOCH_MISMATCH, detail=f"expected epoch {expected}, got {got}")


# network


class ChannelError(TSEError):
    pass


class HandshakeFailed(ChannelError):
    pass


class PeerUnreachable(ChannelError):
    pass


class ChannelDown(ChannelError):
    def __init__(self, participant: int):
        super().__init__(f"channel to participant {participant} is down")
        self.participant = participant


class IntegrityError(ChannelError):
    """A frame failed authentication on a secure channel."""


class EvalTimeout(TSEError):
    """Some members of the evaluation set did not answer in time."""

    def __init__(self, missing: list[int], received: dict | None = None):
        super().__init__(f"no partial evaluation from participants {missing}")
        self.missing = missing
        self.received = received or {}


class InstanceAborted(TSEError):
    def __init__(self, reasons: dict[int, str]):
        summary = ", ".join(f"{j}: {r}" for j, r in sorted(reasons.items()))
        super().__init__(f"instance aborted ({summary})")
        self.reasons = reasons
