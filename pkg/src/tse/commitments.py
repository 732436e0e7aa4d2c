"""Pedersen commitments over a prime-order group, and SHAKE256 hash commitments."""

from __future__ import annotations

import hashlib
import hmac

from .errors import LengthMismatch
from .group import GroupParams


def pedersen_commit(pp: GroupParams, m: int, r: int):
    """gamma = g^m * h^r"""
    return pp.group.multi_exp([(pp.g, m), (pp.h, r)])


def pedersen_verify(pp: GroupParams, m: int, r: int, gamma) -> bool:
    try:
        return pedersen_commit(pp, m, r) == gamma
    except (TypeError, AttributeError):
        return False


def hash_commit(m: bytes, r: bytes) -> bytes:
    """alpha = SHAKE256(r || m), three times as long as m."""
    if not m:
        raise ValueError("cannot commit to an empty message")
    if len(r) != len(m):
        raise LengthMismatch(f"randomness is {len(r)} bytes, message is {len(m)}")
    return hashlib.shake_256(r + m).digest(3 * len(m))


def hash_verify(m: bytes, r: bytes, alpha: bytes) -> bool:
    if not m or len(r) != len(m) or len(alpha) != 3 * len(m):
        return False
    return hmac.compare_digest(hashlib.shake_256(r + m).digest(3 * len(m)), alpha)
