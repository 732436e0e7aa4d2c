"""Threshold authenticated encryption on top of the DPRF.

The initiator commits to SHA-256(m) with fresh 32-byte randomness rho, asks k
participants to evaluate the DPRF on ``initiator || alpha``, and masks
``m || rho`` with an AES-CTR keystream keyed from the combined output. The
keystream key also binds the initiator and the commitment, so a combined value
can never be replayed under a different header.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .commitments import hash_commit, hash_verify
from .errors import CommitmentMismatch, LengthLimit, MalformedCiphertext

ID_LEN = 16
RHO_LEN = 32
ALPHA_LEN = 96
KDF_DST = b"TSE-V01-KEYSTREAM"
MAX_KEYSTREAM = 2**32


@dataclass(frozen=True)
class Ciphertext:
    initiator: bytes
    alpha: bytes
    epsilon: bytes

    def __post_init__(self):
        if len(self.initiator) != ID_LEN:
            raise MalformedCiphertext("initiator id must be 16 bytes")
        if len(self.alpha) != ALPHA_LEN:
            raise MalformedCiphertext("commitment must be 96 bytes")
        if len(self.epsilon) < RHO_LEN:
            raise MalformedCiphertext("masked payload shorter than the commitment randomness")

    @property
    def dprf_input(self) -> bytes:
        return self.initiator + self.alpha

    def to_bytes(self) -> bytes:
        return self.initiator + len(self.alpha).to_bytes(2, "big") + self.alpha + self.epsilon

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if len(data) < ID_LEN + 2:
            raise MalformedCiphertext("truncated header")
        alpha_len = int.from_bytes(data[ID_LEN:ID_LEN + 2], "big")
        start = ID_LEN + 2
        if len(data) < start + alpha_len:
            raise MalformedCiphertext("truncated commitment")
        return cls(data[:ID_LEN], data[start:start + alpha_len], data[start + alpha_len:])


def encrypt_commit(m: bytes) -> tuple[bytes, bytes, bytes]:
    """Returns (alpha, rho, digest)."""
    if not m:
        raise ValueError("cannot encrypt an empty message")
    digest = hashlib.sha256(m).digest()
    rho = os.urandom(RHO_LEN)
    return hash_commit(digest, rho), rho, digest


def dprf_input(initiator: bytes, alpha: bytes) -> bytes:
    return initiator + alpha


def kdf(combined, initiator: bytes, alpha: bytes) -> bytes:
    return hashlib.sha256(KDF_DST + combined.encode() + initiator + alpha).digest()


def keystream(key: bytes, length: int) -> bytes:
    if length > MAX_KEYSTREAM:
        raise LengthLimit(f"keystream limited to 2^32 bytes, asked for {length}")
    if length <= 0:
        return b""
    # zero IV: each key is used for exactly one message
    enc = Cipher(algorithms.AES(key), modes.CTR(bytes(16))).encryptor()
    return enc.update(bytes(length)) + enc.finalize()


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def encrypt_finalize(m: bytes, rho: bytes, alpha: bytes, initiator: bytes, combined) -> Ciphertext:
    plain = m + rho
    ks = keystream(kdf(combined, initiator, alpha), len(plain))
    return Ciphertext(initiator, alpha, _xor(ks, plain))


def decrypt_finalize(c: Ciphertext, combined) -> bytes:
    """Recover m, or raise CommitmentMismatch if the commitment does not open."""
    if len(c.epsilon) < RHO_LEN:
        raise MalformedCiphertext("masked payload too short")
    ks = keystream(kdf(combined, c.initiator, c.alpha), len(c.epsilon))
    plain = _xor(ks, c.epsilon)
    m, rho = plain[:-RHO_LEN], plain[-RHO_LEN:]
    if not m or not hash_verify(hashlib.sha256(m).digest(), rho, c.alpha):
        raise CommitmentMismatch()
    return m
