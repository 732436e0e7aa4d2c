"""Frame transports: in-memory queue pairs for the harness, TCP for real runs."""

from __future__ import annotations

import asyncio
import struct
from typing import Callable

from ..errors import PeerUnreachable
from .channel import Transport
from .messages import MAX_MESSAGE

# tap(src, dst, frame) -> frame to deliver (may be modified), or None to drop
Tap = Callable[[str, str, bytes], "bytes | None"]

_CLOSED = object()


class MemoryTransport(Transport):
    def __init__(self, inbox: asyncio.Queue, outbox: asyncio.Queue, name: str, peer: str, taps: list):
        self._inbox = inbox
        self._outbox = outbox
        self.name = name
        self.peer = peer
        self._taps = taps
        self.closed = False

    async def send(self, data: bytes) -> None:
        if self.closed:
            raise PeerUnreachable(f"{self.name} -> {self.peer} is closed")
        if len(data) > MAX_MESSAGE + 64:
            raise ValueError("frame too large")
        for tap in self._taps:
            data = tap(self.name, self.peer, data)
            if data is None:
                return
        await self._outbox.put(data)

    async def recv(self) -> bytes:
        data = await self._inbox.get()
        if data is _CLOSED:
            raise EOFError("transport closed")
        return data

    async def close(self) -> None:
        if not self.closed:
            self.closed = True
            await self._outbox.put(_CLOSED)


def memory_pair(a: str, b: str, taps: list | None = None) -> tuple[MemoryTransport, MemoryTransport]:
    """Two connected endpoints; ``taps`` sees every frame in both directions."""
    taps = taps if taps is not None else []
    q_ab: asyncio.Queue = asyncio.Queue()
    q_ba: asyncio.Queue = asyncio.Queue()
    return MemoryTransport(q_ba, q_ab, a, b, taps), MemoryTransport(q_ab, q_ba, b, a, taps)


class TcpTransport(Transport):
    """Length-prefixed frames over an asyncio stream."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    async def send(self, data: bytes) -> None:
        self.writer.write(struct.pack(">I", len(data)) + data)
        await self.writer.drain()

    async def recv(self) -> bytes:
        try:
            header = await self.reader.readexactly(4)
            (size,) = struct.unpack(">I", header)
            if size > MAX_MESSAGE + 64:
                raise ValueError("frame too large")
            return await self.reader.readexactly(size)
        except asyncio.IncompleteReadError as exc:
            raise EOFError("connection closed") from exc

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def tcp_connect(host: str, port: int) -> TcpTransport:
    try:
        reader, writer = await asyncio.open_connection(host, port)
    except OSError as exc:
        raise PeerUnreachable(f"{host}:{port}: {exc}") from exc
    return TcpTransport(reader, writer)
