"""Binary wire protocol: framing and payload encodings.

Frame layout (little-endian):

    payload_len : u32   -- byte length of the payload only
    opcode      : u8
    request_id  : u32
    payload     : payload_len bytes, opcode-specific

Payload encodings: handles u32; scalars IEEE-754 f64; vectors u32 count
followed by that many f64s; strings u32 byte length followed by UTF-8;
images u32 width, u32 height, then row-major pixel data (RGB: 3 bytes per
pixel; depth: one f64 per pixel, metric metres).
"""

import struct
from dataclasses import dataclass

from .errors import FrameTooLargeError, ProtocolError, TruncatedFrameError, UnknownOpcodeError

MAX_PAYLOAD = 64 * 1024 * 1024
HEADER = struct.Struct("<IBI")
HEADER_SIZE = HEADER.size  # 9

OP_STEP = 0x01
OP_GET_POSITION = 0x02
OP_SET_POSITION = 0x03
OP_SET_JOINT_TARGET_VELOCITY = 0x04
OP_CAPTURE_RGB = 0x05
OP_CAPTURE_DEPTH = 0x06
OP_GET_HANDLE = 0x07
OP_START = 0x08
OP_STOP = 0x09
OP_LOAD_SCENE = 0x0A
OP_SOLVE_IK = 0x0B
OP_PLAN_PATH = 0x0C

OPCODES = frozenset(range(OP_STEP, OP_PLAN_PATH + 1))

ST_OK = 0x00
ST_NOT_FOUND = 0x01
ST_BAD_ARGS = 0x02
ST_SIM_NOT_RUNNING = 0x03
ST_WRONG_MODE = 0x04
ST_INTERNAL = 0x05

STATUS_NAMES = {
    ST_OK: "OK",
    ST_NOT_FOUND: "NOT_FOUND",
    ST_BAD_ARGS: "BAD_ARGS",
    ST_SIM_NOT_RUNNING: "SIM_NOT_RUNNING",
    ST_WRONG_MODE: "WRONG_MODE",
    ST_INTERNAL: "INTERNAL",
}


@dataclass(frozen=True)
class WireFrame:
    opcode: int
    request_id: int
    payload: bytes


def encode_frame(opcode, request_id, payload=b""):
    if not 0 <= opcode <= 0xFF:
        raise ValueError(f"opcode {opcode} out of range")
    if len(payload) > MAX_PAYLOAD:
        raise FrameTooLargeError(f"payload of {len(payload)} bytes exceeds 64 MiB")
    return HEADER.pack(len(payload), opcode, request_id & 0xFFFFFFFF) + bytes(payload)


def decode_frame(data):
    """Decode one complete frame from `data`; rejects trailing bytes."""
    if len(data) < HEADER_SIZE:
        raise TruncatedFrameError(f"frame of {len(data)} bytes is shorter than the header")
    payload_len, opcode, request_id = HEADER.unpack_from(data)
    if payload_len > MAX_PAYLOAD:
        raise FrameTooLargeError(f"declared payload of {payload_len} bytes exceeds 64 MiB")
    if len(data) != HEADER_SIZE + payload_len:
        raise TruncatedFrameError(
            f"declared payload of {payload_len} bytes but "
            f"{len(data) - HEADER_SIZE} present"
        )
    if opcode not in OPCODES:
        raise UnknownOpcodeError(f"unknown opcode 0x{opcode:02X}")
    return WireFrame(opcode, request_id, bytes(data[HEADER_SIZE:]))


def recv_exact(sock, n):
    """Read exactly n bytes from a socket; None on clean EOF at a boundary."""
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            if remaining == n:
                return None
            raise TruncatedFrameError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock):
    """Read one frame from a socket; None on clean EOF between frames."""
    header = recv_exact(sock, HEADER_SIZE)
    if header is None:
        return None
    payload_len, opcode, request_id = HEADER.unpack(header)
    if payload_len > MAX_PAYLOAD:
        raise FrameTooLargeError(f"declared payload of {payload_len} bytes exceeds 64 MiB")
    payload = recv_exact(sock, payload_len) if payload_len else b""
    if payload_len and payload is None:
        raise TruncatedFrameError("connection closed mid-frame")
    if opcode not in OPCODES:
        raise UnknownOpcodeError(f"unknown opcode 0x{opcode:02X}")
    return WireFrame(opcode, request_id, payload)


# --- payload builders ------------------------------------------------------


def pack_u8(value):
    return struct.pack("<B", value)


def pack_u32(value):
    return struct.pack("<I", value)


def pack_f64(value):
    return struct.pack("<d", value)

def pack_f64s(values):
    return struct.pack(f"<{len(values)}d", *values)


def pack_vec(values):
    values = list(values)
    return pack_u32(len(values)) + pack_f64s(values)


def pack_str(text):
    raw = text.encode("utf-8")
    return pack_u32(len(raw)) + raw


class PayloadReader:
    """Sequential decoder; every underrun raises ProtocolError."""

    __slots__ = ("data", "offset")

    def __init__(self, data):
        self.data = data
        self.offset = 0

    def _take(self, n):
        end = self.offset + n
        if end > len(self.data):
            raise ProtocolError(
                f"payload underrun: wanted {n} bytes at offset {self.offset}, "
                f"have {len(self.data) - self.offset}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u8(self):
        return self._take(1)[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def f64(self):
        return struct.unpack("<d", self._take(8))[0]

    def f64s(self, count):
        return struct.unpack(f"<{count}d", self._take(8 * count))

    def vec(self):
        count = self.u32()
        if count > len(self.data):  # cheap sanity bound before allocating
            raise ProtocolError(f"vector count {count} exceeds payload size")
        return self.f64s(count)

    def str(self):
        length = self.u32()
        raw = self._take(length)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid UTF-8 in string field: {exc}") from exc

    def raw(self, n):
        return self._take(n)

    def expect_end(self):
        if self.offset != len(self.data):
            raise ProtocolError(
                f"{len(self.data) - self.offset} unexpected trailing bytes"
            )
