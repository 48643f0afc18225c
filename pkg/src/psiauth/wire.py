"""Framed binary wire protocol between device and carrier.

Frame layout: 1 version byte (0x01), 1 message-type byte, a 4-byte big-endian
payload length, then the payload.  Payloads use the canonical length-prefixed
encoding from ``encoding``; integer sequences carry a 4-byte count prefix and
user ids are length-prefixed UTF-8 of at most 256 bytes.

Message types:

    0x01 StoreProfile(userId, profile)    0x02 StoreAck
    0x03 AuthInit(userId, sampleSize)     0x04 Challenge(challenge)
    0x05 Response(sessionId, entries)     0x06 Result(decision)
    0x7F Error(code, text)

Error codes: 0x01 unknown user, 0x02 expired/consumed session, 0x03 decode
failure, 0x04 protocol violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO, Union

from .encoding import DecodeError, Reader, encode_str, encode_uint
from .profiles import EncryptedProfile
from .protocol import AuthChallenge, AuthDecision, AuthResponseEntry

__all__ = [
    "AuthInit",
    "Challenge",
    "ErrorReply",
    "Message",
    "Response",
    "Result",
    "StoreAck",
    "StoreProfile",
    "DecodeError",
    "ERR_DECODE",
    "ERR_PROTOCOL",
    "ERR_SESSION",
    "ERR_UNKNOWN_USER",
    "MAX_PAYLOAD",
    "PROTOCOL_VERSION",
    "decode_frame",
    "encode_frame",
    "read_frame",
    "write_frame",
]

PROTOCOL_VERSION = 0x01
MAX_PAYLOAD = 64 * 1024 * 1024
MAX_USER_ID_BYTES = 256
MAX_ENTRIES = 1 << 20

ERR_UNKNOWN_USER = 0x01
ERR_SESSION = 0x02
ERR_DECODE = 0x03
ERR_PROTOCOL = 0x04


@dataclass(frozen=True)
class StoreProfile:
    user_id: str
    profile: EncryptedProfile


@dataclass(frozen=True)
class StoreAck:
    pass


@dataclass(frozen=True)
class AuthInit:
    user_id: str
    sample_size: int


@dataclass(frozen=True)
class Challenge:
    challenge: AuthChallenge


@dataclass(frozen=True)
class Response:
    session_id: bytes
    entries: tuple[AuthResponseEntry, ...]


@dataclass(frozen=True)
class Result:
    decision: AuthDecision


@dataclass(frozen=True)
class ErrorReply:
    code: int
    text: str


Message = Union[StoreProfile, StoreAck, AuthInit, Challenge, Response,
                Result, ErrorReply]

_MSG_TAGS: dict[type, int] = {
    StoreProfile: 0x01,
    StoreAck: 0x02,
    AuthInit: 0x03,
    Challenge: 0x04,
    Response: 0x05,
    Result: 0x06,
    ErrorReply: 0x7F,
}


def _encode_payload(msg: Message) -> bytes:
    if isinstance(msg, StoreProfile):
        return encode_str(msg.user_id) + msg.profile.to_bytes()
    if isinstance(msg, StoreAck):
        return b""
    if isinstance(msg, AuthInit):
        return encode_str(msg.user_id) + encode_uint(msg.sample_size)
    if isinstance(msg, Challenge):
        return msg.challenge.to_bytes()
    if isinstance(msg, Response):
        parts = [len(msg.session_id).to_bytes(4, "big"), msg.session_id,
                 len(msg.entries).to_bytes(4, "big")]
        parts.extend(entry.to_bytes() for entry in msg.entries)
        return b"".join(parts)
    if isinstance(msg, Result):
        return msg.decision.to_bytes()
    if isinstance(msg, ErrorReply):
        if not 0 <= msg.code <= 0xFF:
            raise ValueError("error code must fit one byte")
        return bytes([msg.code]) + encode_str(msg.text)
    raise TypeError(f"not a wire message: {type(msg).__name__}")


def _decode_payload(tag: int, payload: bytes) -> Message:
    reader = Reader(payload)
    if tag == 0x01:
        user_id = reader.str_lp(MAX_USER_ID_BYTES)
        profile = EncryptedProfile.from_reader(reader)
        msg: Message = StoreProfile(user_id, profile)
    elif tag == 0x02:
        msg = StoreAck()
    elif tag == 0x03:
        user_id = reader.str_lp(MAX_USER_ID_BYTES)
        sample_size = reader.uint()
        msg = AuthInit(user_id, sample_size)
    elif tag == 0x04:
        msg = Challenge(AuthChallenge.from_reader(reader))
    elif tag == 0x05:
        session_id = reader.bytes_lp(64)
        entry_count = int.from_bytes(reader.take(4), "big")
        if entry_count > MAX_ENTRIES:
            reader.fail("unreasonable entry count")
        entries = tuple(AuthResponseEntry.from_reader(reader)
                        for _ in range(entry_count))
        msg = Response(session_id, entries)
    elif tag == 0x06:
        msg = Result(AuthDecision.from_reader(reader))
    elif tag == 0x7F:
        code = reader.byte()
        text = reader.str_lp(1 << 16)
        msg = ErrorReply(code, text)
    else:
        reader.fail(f"unknown message type 0x{tag:02x}")
    reader.expect_end()
    return msg


def encode_frame(msg: Message) -> bytes:
    payload = _encode_payload(msg)
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} bytes exceeds the frame limit")
    return bytes([PROTOCOL_VERSION, _MSG_TAGS[type(msg)]]) + \
        len(payload).to_bytes(4, "big") + payload


def decode_frame(data: bytes) -> Message:
    if len(data) < 6:
        raise DecodeError("frame shorter than its header", len(data))
    version, tag = data[0], data[1]
    if version != PROTOCOL_VERSION:
        raise DecodeError(f"unsupported version 0x{version:02x}", 0)
    length = int.from_bytes(data[2:6], "big")
    if length > MAX_PAYLOAD:
        raise DecodeError(f"payload length {length} exceeds the frame limit", 2)
    if len(data) != 6 + length:
        raise DecodeError(
            f"frame length {len(data)} does not match header ({6 + length})", 6)
    return _decode_payload(tag, data[6:])


def write_frame(stream: BinaryIO, msg: Message) -> None:
    stream.write(encode_frame(msg))
    stream.flush()


def read_frame(stream: BinaryIO) -> Message | None:
    """Read one frame; ``None`` on clean end of stream.

    Whenever the version or message type is unknown, the payload has still
    been consumed, so framing stays in sync and the peer can be answered
    with an error instead of dropping the connection.
    """
    header = stream.read(6)
    if not header:
        return None
    if len(header) < 6:
        raise DecodeError("truncated frame header", len(header))
    length = int.from_bytes(header[2:6], "big")
    if length > MAX_PAYLOAD:
        raise DecodeError(f"payload length {length} exceeds the frame limit", 2)
    payload = stream.read(length) if length else b""
    if len(payload) < length:
        raise DecodeError("truncated payload", 6 + len(payload))
    return decode_frame(header + payload)
