"""Append-only public storage (commitments, parameter records, ciphertexts)."""

from __future__ import annotations

import asyncio
import struct
import threading
from pathlib import Path

# record types
GAMMA = "gamma"
PARAMS = "params"
CIPHERTEXT = "ciphertext"


class RecordExists(KeyError):
    pass


class PublicStorage:
    """Linearizable key -> bytes map where a key can be written once.

    Keys are ``(instance, record_type, issuer)``. With ``path`` set, every write
    is appended to a record file as ``len(4) || key || value`` and the file is
    replayed on open.
    """

    def __init__(self, path: str | Path | None = None):
        self._records: dict[tuple[bytes, str, int], bytes] = {}
        self._lock = threading.Lock()
        self._path = Path(path) if path else None
        self.writes = 0
        if self._path and self._path.exists():
            self._replay()

    def put(self, instance: bytes, record_type: str, issuer: int, value: bytes) -> None:
        key = (bytes(instance), record_type, issuer)
        with self._lock:
            if key in self._records:
                if self._records[key] == value:
                    return
                raise RecordExists(f"record {record_type}/{issuer} already written")
            self._records[key] = bytes(value)
            self.writes += 1
            if self._path:
                with open(self._path, "ab") as fh:
                    fh.write(_encode_record(key, value))

    def get(self, instance: bytes, record_type: str, issuer: int) -> bytes | None:
        with self._lock:
            return self._records.get((bytes(instance), record_type, issuer))

    def collect(self, instance: bytes, record_type: str) -> dict[int, bytes]:
        with self._lock:
            return {
                issuer: v
                for (inst, rt, issuer), v in self._records.items()
                if inst == instance and rt == record_type
            }

    def values(self) -> list[bytes]:
        with self._lock:
            return list(self._records.values())

    def __len__(self) -> int:
        return len(self._records)

    async def wait_for(self, instance: bytes, record_type: str, count: int, timeout: float, poll: float = 0.002):
        """Wait until ``count`` records of a type exist for an instance."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while True:
            found = self.collect(instance, record_type)
            if len(found) >= count:
                return found
            if loop.time() >= deadline:
                raise TimeoutError(f"only {len(found)}/{count} {record_type} records visible")
            await asyncio.sleep(poll)

    def _replay(self) -> None:
        data = self._path.read_bytes()
        off = 0
        while off < len(data):
            (size,) = struct.unpack(">I", data[off:off + 4])
            key, value = _decode_record(data[off + 4:off + 4 + size])
            self._records[key] = value
            off += 4 + size


def _encode_record(key, value: bytes) -> bytes:
    instance, record_type, issuer = key
    rt = record_type.encode()
    body = instance + struct.pack(">BH", len(rt), issuer) + rt + value
    return struct.pack(">I", len(body)) + body


def _decode_record(body: bytes):
    instance = body[:16]
    rt_len, issuer = struct.unpack(">BH", body[16:19])
    rt = body[19:19 + rt_len].decode()
    return (instance, rt, issuer), body[19 + rt_len:]
