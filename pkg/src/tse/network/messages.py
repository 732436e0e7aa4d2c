"""Protocol messages and their wire framing.

A frame is ``len(4, big-endian) || kind(1) || instance(16) || payload``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from ..errors import DecodeError

MAX_MESSAGE = 64 * 1024
INSTANCE_LEN = 16


class MessageKind(IntEnum):
    DEAL_SHARE = 1
    COMMITMENT_POSTED = 2
    EVAL_REQUEST = 3
    EVAL_RESPONSE = 4
    PHASE_PROMPT = 5
    ABORT = 6
    PHASE_REPORT = 7


# messages exchanged between participants; the rest is coordinator control traffic
PARTICIPANT_KINDS = frozenset(
    {MessageKind.DEAL_SHARE, MessageKind.COMMITMENT_POSTED, MessageKind.EVAL_REQUEST, MessageKind.EVAL_RESPONSE}
)


class Prompt(IntEnum):
    SETUP_DEAL = 1
    SETUP_TEST = 2
    REFRESH_DEAL = 3
    REFRESH_TEST = 4


class EvalMode(IntEnum):
    KEY = 0  # operational evaluation with the current key share
    TEST = 1  # test evaluation inside a running setup or refresh


class Status(IntEnum):
    OK = 0
    REFUSED = 1


# minimum payload length per kind
_MIN_PAYLOAD = {
    MessageKind.DEAL_SHARE: 2 + 4 + 1,
    MessageKind.COMMITMENT_POSTED: 2 + 1,
    MessageKind.EVAL_REQUEST: 8 + 1 + 1,
    MessageKind.EVAL_RESPONSE: 8 + 1,
    MessageKind.PHASE_PROMPT: 1 + 4 + 2,
    MessageKind.ABORT: 0,
    MessageKind.PHASE_REPORT: 2 + 1,
}


@dataclass(frozen=True)
class ProtocolMessage:
    kind: MessageKind
    instance: bytes
    body: bytes = b""

    def __post_init__(self):
        if len(self.instance) != INSTANCE_LEN:
            raise DecodeError("instance id must be 16 bytes")
        if 1 + INSTANCE_LEN + len(self.body) > MAX_MESSAGE:
            raise DecodeError("message exceeds 64 KiB")

    def encode(self) -> bytes:
        return bytes([self.kind]) + self.instance + self.body

    @classmethod
    def decode(cls, data: bytes) -> "ProtocolMessage":
        if len(data) < 1 + INSTANCE_LEN:
            raise DecodeError("truncated message")
        if len(data) > MAX_MESSAGE:
            raise DecodeError("message exceeds 64 KiB")
        try:
            kind = MessageKind(data[0])
        except ValueError:
            raise DecodeError(f"unknown message kind {data[0]}") from None
        body = data[1 + INSTANCE_LEN:]
        if len(body) < _MIN_PAYLOAD[kind]:
            raise DecodeError(f"{kind.name} payload too short")
        return cls(kind, data[1:1 + INSTANCE_LEN], body)


def frame(payload: bytes) -> bytes:
    if len(payload) > MAX_MESSAGE:
        raise DecodeError("frame exceeds 64 KiB")
    return struct.pack(">I", len(payload)) + payload


def unframe(data: bytes) -> tuple[bytes, bytes]:
    """Split one frame off the front of ``data``; returns (payload, rest)."""
    if len(data) < 4:
        raise DecodeError("truncated frame header")
    (size,) = struct.unpack(">I", data[:4])
    if size > MAX_MESSAGE:
        raise DecodeError("frame exceeds 64 KiB")
    if len(data) < 4 + size:
        raise DecodeError("truncated frame")
    return data[4:4 + size], data[4 + size:]


# payload helpers


def deal_body(sender: int, epoch: int, value: bytes) -> bytes:
    return struct.pack(">HI", sender, epoch) + value


def parse_deal(body: bytes) -> tuple[int, int, bytes]:
    sender, epoch = struct.unpack(">HI", body[:6])
    return sender, epoch, body[6:]


def commitment_body(issuer: int, gamma: bytes) -> bytes:
    return struct.pack(">H", issuer) + gamma


def parse_commitment(body: bytes) -> tuple[int, bytes]:
    return struct.unpack(">H", body[:2])[0], body[2:]


def eval_request_body(request_id: int, mode: EvalMode, x: bytes) -> bytes:
    return struct.pack(">QB", request_id, mode) + x


def parse_eval_request(body: bytes) -> tuple[int, EvalMode, bytes]:
    request_id, mode = struct.unpack(">QB", body[:9])
    try:
        return request_id, EvalMode(mode), body[9:]
    except ValueError:
        raise DecodeError(f"unknown evaluation mode {mode}") from None


def eval_response_body(request_id: int, status: Status, payload: bytes) -> bytes:
    return struct.pack(">QB", request_id, status) + payload


def parse_eval_response(body: bytes) -> tuple[int, Status, bytes]:
    request_id, status = struct.unpack(">QB", body[:9])
    try:
        return request_id, Status(status), body[9:]
    except ValueError:
        raise DecodeError(f"unknown response status {status}") from None


def prompt_body(prompt: Prompt, epoch: int, k: int) -> bytes:
    return struct.pack(">BIH", prompt, epoch, k)


def parse_prompt(body: bytes) -> tuple[Prompt, int, int]:
    prompt, epoch, k = struct.unpack(">BIH", body[:7])
    try:
        return Prompt(prompt), epoch, k
    except ValueError:
        raise DecodeError(f"unknown prompt {prompt}") from None


def report_body(index: int, done: bool, reason: str = "") -> bytes:
    return struct.pack(">H?", index, done) + reason.encode()


def parse_report(body: bytes) -> tuple[int, bool, str]:
    index, done = struct.unpack(">H?", body[:3])
    return index, done, body[3:].decode(errors="replace")
