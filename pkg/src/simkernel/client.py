"""Blocking TCP client for the remote API.

One request in flight per connection; request_ids increase monotonically and
the response must echo the id.  Remote statuses map back onto the kernel's
exception types where a natural counterpart exists (NOT_FOUND, WRONG_MODE,
SIM_NOT_RUNNING); everything else raises RemoteError.
"""

import socket

import numpy as np

from . import protocol as wp
from .errors import (
    ConnectionClosedError,
    NotFoundError,
    NotRunningError,
    ProtocolError,
    RemoteError,
    RemoteTimeoutError,
    TruncatedFrameError,
    WrongModeError,
)

DEFAULT_PORT = 19997


def _raise_for_status(status, message):
    if status == wp.ST_NOT_FOUND:
        raise NotFoundError(message)
    if status == wp.ST_WRONG_MODE:
        raise WrongModeError(message)
    if status == wp.ST_SIM_NOT_RUNNING:
        raise NotRunningError(message)
    raise RemoteError(status, message)


class RemoteClient:
    """Synchronous connection to a remote simulation kernel."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT, timeout=10.0):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectionClosedError(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._next_id = 1
        self._closed = False

    def close(self):
        if not self._closed:
            self._closed = True
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    # -- transport ----------------------------------------------------------

    def call(self, opcode, payload=b""):
        """Send one request, block for its response, return a PayloadReader
        positioned just past the status byte."""
        if self._closed:
            raise ConnectionClosedError("client is closed")
        request_id = self._next_id
        self._next_id += 1
        try:
            self._sock.sendall(wp.encode_frame(opcode, request_id, payload))
            frame = wp.recv_frame(self._sock)
        except socket.timeout as exc:
            raise RemoteTimeoutError(f"no response to opcode 0x{opcode:02X}") from exc
        except TruncatedFrameError as exc:
            raise ConnectionClosedError(str(exc)) from exc
        except OSError as exc:
            raise ConnectionClosedError(f"connection failed: {exc}") from exc
        if frame is None:
            raise ConnectionClosedError("server closed the connection")
        if frame.request_id != request_id:
            raise ProtocolError(
                f"response id {frame.request_id} does not match request {request_id}"
            )
        reader = wp.PayloadReader(frame.payload)
        status = reader.u8()
        if status != wp.ST_OK:
            message = reader.str() if reader.offset < len(frame.payload) else ""
            _raise_for_status(status, message)
        return reader

    # -- commands ------------------------------------------------------------

    def start(self):
        self.call(wp.OP_START).expect_end()

    def stop(self):
        self.call(wp.OP_STOP).expect_end()

    def step(self, count=1):
        for _ in range(count):
            self.call(wp.OP_STEP).expect_end()

    def load_scene(self, path):
        self.call(wp.OP_LOAD_SCENE, wp.pack_str(str(path))).expect_end()

    def get_handle(self, name):
        r = self.call(wp.OP_GET_HANDLE, wp.pack_str(name))
        handle = r.u32()
        r.expect_end()
        return handle

    def get_position(self, handle, relative_to=0):
        r = self.call(wp.OP_GET_POSITION, wp.pack_u32(handle) + wp.pack_u32(relative_to))
        p = r.f64s(3)
        r.expect_end()
        return np.array(p)

    def set_position(self, handle, position, relative_to=0):
        x, y, z = (float(v) for v in position)
        payload = wp.pack_u32(handle) + wp.pack_u32(relative_to) + wp.pack_f64s([x, y, z])
        self.call(wp.OP_SET_POSITION, payload).expect_end()

    def set_joint_target_velocities(self, pairs):
        """pairs: iterable of (joint handle, target velocity)."""
        pairs = list(pairs)
        payload = wp.pack_u32(len(pairs))
        payload += b"".join(wp.pack_u32(h) for h, _ in pairs)
        payload += wp.pack_f64s([float(v) for _, v in pairs])
        self.call(wp.OP_SET_JOINT_TARGET_VELOCITY, payload).expect_end()

    def capture_rgb(self, sensor_handle):
        r = self.call(wp.OP_CAPTURE_RGB, wp.pack_u32(sensor_handle))
        width = r.u32()
        height = r.u32()
        raw = r.raw(width * height * 3)
        r.expect_end()
        return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)

    def capture_depth(self, sensor_handle):
        r = self.call(wp.OP_CAPTURE_DEPTH, wp.pack_u32(sensor_handle))
        width = r.u32()
        height = r.u32()
        raw = r.raw(width * height * 8)
        r.expect_end()
        return np.frombuffer(raw, dtype="<f8").reshape(height, width)

    def solve_ik(self, tip_handle, position, orientation_wxyz, position_only=False):
        x, y, z = (float(v) for v in position)
        quat = [float(v) for v in orientation_wxyz]
        payload = (
            wp.pack_u32(tip_handle)
            + wp.pack_f64s([x, y, z])
            + wp.pack_f64s(quat)
            + wp.pack_u8(1 if position_only else 0)
        )
        r = self.call(wp.OP_SOLVE_IK, payload)
        q = np.array(r.vec())
        iterations = r.u32()
        r.expect_end()
        return q, iterations

    def plan_path(self, tip_handle, q_goal, seed=0):
        payload = (
            wp.pack_u32(tip_handle)
            + wp.pack_vec([float(v) for v in q_goal])
            + wp.pack_u32(seed)
        )
        r = self.call(wp.OP_PLAN_PATH, payload)
        n = r.u32()
        dof = r.u32()
        raw = r.raw(n * dof * 8)
        r.expect_end()
        return np.frombuffer(raw, dtype="<f8").reshape(n, dof)
