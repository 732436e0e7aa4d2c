"""Mutually authenticated secure channels over any ordered frame transport.

The handshake mixes three X25519 results (ephemeral-ephemeral and each side's
static key against the other side's ephemeral) into HKDF, then both sides
prove they derived the same keys. Data frames are AES-GCM with per-direction
counter nonces, so replay, reordering and bit flips all fail authentication.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..errors import HandshakeFailed, IntegrityError

PROTOCOL_NAME = b"TSE-V01-CHANNEL-X25519-AESGCM"


def public_bytes(key: X25519PublicKey) -> bytes:
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


@dataclass
class StaticKey:
    private: X25519PrivateKey = field(default_factory=X25519PrivateKey.generate)

    @property
    def public(self) -> bytes:
        return public_bytes(self.private.public_key())

    def private_bytes(self) -> bytes:
        return self.private.private_bytes(
            serialization.Encoding.Raw, serialization.PrivateFormat.Raw, serialization.NoEncryption()
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "StaticKey":
        return cls(X25519PrivateKey.from_private_bytes(raw))


class Transport:
    """Ordered, reliable delivery of opaque frames between two endpoints."""

    async def send(self, data: bytes) -> None:
        raise NotImplementedError

    async def recv(self) -> bytes:
        raise NotImplementedError

    async def close(self) -> None:
        pass


class SecureChannel:
    def __init__(self, transport: Transport, send_key: bytes, recv_key: bytes, peer_static: bytes):
        self.transport = transport
        self.peer_static = peer_static
        self._send = AESGCM(send_key)
        self._recv = AESGCM(recv_key)
        self._send_ctr = 0
        self._recv_ctr = 0

    async def send(self, payload: bytes) -> None:
        nonce = struct.pack(">4xQ", self._send_ctr)
        self._send_ctr += 1
        await self.transport.send(self._send.encrypt(nonce, payload, None))

    async def recv(self) -> bytes:
        data = await self.transport.recv()
        nonce = struct.pack(">4xQ", self._recv_ctr)
        try:
            payload = self._recv.decrypt(nonce, data, None)
        except InvalidTag:
            raise IntegrityError("frame failed authentication") from None
        self._recv_ctr += 1
        return payload

    async def close(self) -> None:
        await self.transport.close()


def _derive(secrets: list[bytes], transcript: bytes) -> tuple[bytes, bytes, bytes]:
    okm = HKDF(
        algorithm=hashes.SHA256(),
        length=96,
        salt=hashlib.sha256(transcript).digest(),
        info=PROTOCOL_NAME,
    ).derive(b"".join(secrets))
    return okm[:32], okm[32:64], okm[64:]


async def _handshake(transport: Transport, me: StaticKey, peer_static: bytes, initiator: bool) -> SecureChannel:
    eph = X25519PrivateKey.generate()
    eph_pub = public_bytes(eph.public_key())
    try:
        await transport.send(eph_pub)
        peer_eph = await transport.recv()
        if len(peer_eph) != 32:
            raise HandshakeFailed("bad ephemeral key")
        peer_eph_key = X25519PublicKey.from_public_bytes(peer_eph)
        peer_static_key = X25519PublicKey.from_public_bytes(peer_static)
        ee = eph.exchange(peer_eph_key)
        # static-ephemeral terms, ordered initiator-first on both sides
        mine = me.private.exchange(peer_eph_key)
        theirs = eph.exchange(peer_static_key)
        if initiator:
            i_eph, r_eph, i_static, r_static = eph_pub, peer_eph, me.public, peer_static
            dh = [ee, theirs, mine]
        else:
            i_eph, r_eph, i_static, r_static = peer_eph, eph_pub, peer_static, me.public
            dh = [ee, mine, theirs]
        transcript = PROTOCOL_NAME + i_static + r_static + i_eph + r_eph
        k_i2r, k_r2i, k_confirm = _derive(dh, transcript)
        tag_mine = hmac.new(k_confirm, b"initiator" if initiator else b"responder", "sha256").digest()
        tag_peer = hmac.new(k_confirm, b"responder" if initiator else b"initiator", "sha256").digest()
        await transport.send(tag_mine)
        got = await transport.recv()
    except (ValueError, EOFError, ConnectionError) as exc:
        raise HandshakeFailed(str(exc)) from exc
    if not hmac.compare_digest(got, tag_peer):
        raise HandshakeFailed("peer failed key confirmation")
    if initiator:
        return SecureChannel(transport, k_i2r, k_r2i, peer_static)
    return SecureChannel(transport, k_r2i, k_i2r, peer_static)


async def open_secure_channel(transport: Transport, me: StaticKey, peer_static: bytes) -> SecureChannel:
    """Initiator side of the handshake."""
    return await _handshake(transport, me, peer_static, True)


async def accept_secure_channel(transport: Transport, me: StaticKey, peer_static: bytes) -> SecureChannel:
    return await _handshake(transport, me, peer_static, False)
