"""Framing and transport for the simulation server's TCP protocol.

A frame is ``payload_len:u32 | opcode:u8 | request_id:u32 | payload``, all
little-endian, with the length covering the payload only.  Responses echo
the request's opcode and id; the first payload byte is a status code, zero
for success.

This module is deliberately self-contained — it does not import the kernel
package.  The SDK's only coupling to the server is these bytes, so it can
talk to any implementation of the protocol.
"""

import socket
import struct

from .errors import ConnectionClosed, ProtocolViolation, error_for_status

HEADER = struct.Struct("<IBI")
HEADER_SIZE = HEADER.size  # 9
MAX_PAYLOAD = 64 * 1024 * 1024

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

ST_OK = 0x00

_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")


def pack_u32(value: int) -> bytes:
    return _U32.pack(value)


def pack_f64s(values) -> bytes:
    values = list(values)
    return struct.pack(f"<{len(values)}d", *values)


def pack_str(text: str) -> bytes:
    data = text.encode("utf-8")
    return _U32.pack(len(data)) + data


class Reader:
    """Sequential decoder over a response payload."""

    __slots__ = ("data", "offset")

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def _take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise ProtocolViolation(
                f"response payload ended early: wanted {n} bytes at {self.offset}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def f64(self) -> float:
        return _F64.unpack(self._take(8))[0]

    def f64s(self, count: int):
        return struct.unpack(f"<{count}d", self._take(8 * count))

    def str(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def remaining(self) -> int:
        return len(self.data) - self.offset


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionClosed("server closed the connection")
        buf.extend(chunk)
    return bytes(buf)


class Channel:
    """A connected socket carrying one request at a time.

    ``call`` blocks until the matching response arrives; the protocol allows
    pipelining but the SDK never uses it, which keeps request/response
    pairing trivial.
    """

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectionClosed(f"cannot connect to {host}:{port}: {exc}") from None
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._next_id = 1
        self.host = host
        self.port = port

    def call(self, opcode: int, payload: bytes = b"") -> Reader:
        """Send one request and return a Reader positioned after the status byte."""
        request_id = self._next_id
        self._next_id = (self._next_id + 1) & 0xFFFFFFFF or 1
        try:
            self._sock.sendall(HEADER.pack(len(payload), opcode, request_id) + payload)
            raw = _recv_exact(self._sock, HEADER_SIZE)
            length, r_opcode, r_id = HEADER.unpack(raw)
            if length > MAX_PAYLOAD:
                raise ProtocolViolation(f"response claims {length} payload bytes")
            body = _recv_exact(self._sock, length) if length else b""
        except socket.timeout:
            raise ConnectionClosed("timed out waiting for the server") from None
        except OSError as exc:
            raise ConnectionClosed(str(exc)) from None
        if r_id != request_id or r_opcode != opcode:
            raise ProtocolViolation(
                f"response ({r_opcode:#x}, id {r_id}) does not match "
                f"request ({opcode:#x}, id {request_id})"
            )
        reader = Reader(body)
        status = reader.u8()
        if status != ST_OK:
            message = reader.str() if reader.remaining() else ""
            raise error_for_status(status, message)
        return reader

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass
