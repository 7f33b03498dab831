"""TCP remote-API server.

Reader threads parse frames and append commands to the simulator's mailbox;
a single service thread owns the simulator and executes commands according
to the configured cadence:

* ``step_boundary`` -- commands are serviced only when a step runs, and a
  step runs once per pending STEP request.  While the simulation is running,
  a command other than STEP therefore waits (possibly forever) until some
  client submits a STEP; this stall is intentional and observable.  While
  the simulation is not running the mailbox is serviced inline so that
  START and friends work at all.  With ``busy_step`` the service thread
  instead steps continuously while running, which gives remote calls a
  latency of a step boundary rather than of a client round trip.

* ``fixed_interval`` -- the service thread polls the mailbox and executes a
  command once it has sat in the queue for at least the interval, so every
  round trip pays the full emulated service latency.

Error responses carry ``[status u8][message string]`` and echo the request's
opcode and request_id.
"""

import argparse
import socket
import sys
import threading
import time

import numpy as np

from . import protocol as wp
from . import render
from . import scene as scene_mod
from . import simulation
from .errors import (
    AlreadyRunningError,
    LimitViolationError,
    NotALightError,
    NotAVisionSensorError,
    NotFoundError,
    NotRunningError,
    PortInUseError,
    ProtocolError,
    SceneError,
    SetOnJointError,
    SimError,
    WrongModeError,
)
from .kinematics import ArmDescriptor, solve_ik
from .planning import PlanningParams, collision_world_from_scene, plan_rrt_connect
from .transforms import Pose, Quaternion

DEFAULT_PORT = 19997
SERVICE_STEP_BOUNDARY = "step_boundary"
SERVICE_FIXED_INTERVAL = "fixed_interval"

# Most-derived classes first; the first match wins.
_STATUS_BY_TYPE = (
    (NotFoundError, wp.ST_NOT_FOUND),
    (WrongModeError, wp.ST_WRONG_MODE),
    (NotRunningError, wp.ST_SIM_NOT_RUNNING),
    (AlreadyRunningError, wp.ST_BAD_ARGS),
    (LimitViolationError, wp.ST_BAD_ARGS),
    (SetOnJointError, wp.ST_BAD_ARGS),
    (SceneError, wp.ST_BAD_ARGS),
    (NotAVisionSensorError, wp.ST_BAD_ARGS),
    (NotALightError, wp.ST_BAD_ARGS),
    (ProtocolError, wp.ST_BAD_ARGS),
    (ValueError, wp.ST_BAD_ARGS),
    (SimError, wp.ST_INTERNAL),  # IK / planning failures and the like
)


def _status_for(exc):
    for etype, status in _STATUS_BY_TYPE:
        if isinstance(exc, etype):
            return status
    return wp.ST_INTERNAL


# --- opcode handlers --------------------------------------------------------
#
# Each takes (sim, PayloadReader) and returns the OK response body (without
# the status byte).  Argument errors surface as exceptions and are mapped to
# statuses by _Command.run.


def _op_step(sim, r):
    # Reached on the claimed-step path (after integration) or when a queued
    # command stopped the simulation before this step could run.
    r.expect_end()
    if sim.phase != simulation.PHASE_RUNNING:
        raise NotRunningError("simulation is not running")
    return b""


def _op_get_position(sim, r):
    handle = r.u32()
    relative_to = r.u32()
    r.expect_end()
    p = scene_mod.get_position(sim.scene, handle, relative_to or None)
    return wp.pack_f64s([float(p[0]), float(p[1]), float(p[2])])


def _op_set_position(sim, r):
    handle = r.u32()
    relative_to = r.u32()
    xyz = r.f64s(3)
    r.expect_end()
    scene_mod.set_position(sim.scene, handle, xyz, relative_to or None)
    return b""


def _op_set_joint_target_velocity(sim, r):
    count = r.u32()
    if count > 4096:
        raise ProtocolError(f"velocity batch of {count} joints is implausible")
    handles = [r.u32() for _ in range(count)]
    velocities = r.f64s(count)
    r.expect_end()
    for handle, velocity in zip(handles, velocities):
        sim.set_joint_target_velocity(handle, velocity)
    return b""


def _op_capture_rgb(sim, r):
    handle = r.u32()
    r.expect_end()
    img = render.quantize_u8(render.capture_rgb(sim.scene, handle))
    height, width = img.shape[:2]
    return wp.pack_u32(width) + wp.pack_u32(height) + img.tobytes()


def _op_capture_depth(sim, r):
    handle = r.u32()
    r.expect_end()
    depth = render.capture_depth(sim.scene, handle)
    height, width = depth.shape
    data = np.ascontiguousarray(depth, dtype="<f8")
    return wp.pack_u32(width) + wp.pack_u32(height) + data.tobytes()


def _op_get_handle(sim, r):
    name = r.str()
    r.expect_end()
    return wp.pack_u32(scene_mod.get_object_by_name(sim.scene, name))


def _op_start(sim, r):
    r.expect_end()
    sim.start()
    return b""


def _op_stop(sim, r):
    r.expect_end()
    sim.stop()
    return b""


def _op_load_scene(sim, r):
    path = r.str()
    r.expect_end()
    sim.load_scene_file(path)
    return b""


def _op_solve_ik(sim, r):
    tip = r.u32()
    position = r.f64s(3)
    quat = r.f64s(4)
    position_only = bool(r.u8())
    r.expect_end()
    arm = ArmDescriptor.from_scene(sim.scene, tip)
    target = Pose(position, Quaternion(*quat))
    result = solve_ik(arm, target, arm.current_q(), position_only=position_only)
    return wp.pack_vec(result.q) + wp.pack_u32(result.iterations)


def _op_plan_path(sim, r):
    tip = r.u32()
    q_goal = np.array(r.vec())
    seed = r.u32()
    r.expect_end()
    arm = ArmDescriptor.from_scene(sim.scene, tip)
    world = collision_world_from_scene(sim.scene, arm)
    params = PlanningParams(seed=seed)
    path = np.asarray(plan_rrt_connect(arm, arm.current_q(), q_goal, world, params))
    header = wp.pack_u32(path.shape[0]) + wp.pack_u32(path.shape[1])
    return header + np.ascontiguousarray(path, dtype="<f8").tobytes()


_HANDLERS = {
    wp.OP_STEP: _op_step,
    wp.OP_GET_POSITION: _op_get_position,
    wp.OP_SET_POSITION: _op_set_position,
    wp.OP_SET_JOINT_TARGET_VELOCITY: _op_set_joint_target_velocity,
    wp.OP_CAPTURE_RGB: _op_capture_rgb,
    wp.OP_CAPTURE_DEPTH: _op_capture_depth,
    wp.OP_GET_HANDLE: _op_get_handle,
    wp.OP_START: _op_start,
    wp.OP_STOP: _op_stop,
    wp.OP_LOAD_SCENE: _op_load_scene,
    wp.OP_SOLVE_IK: _op_solve_ik,
    wp.OP_PLAN_PATH: _op_plan_path,
}


class _Connection:
    """One accepted client socket plus its write lock."""

    __slots__ = ("server", "sock", "peer", "_write_lock", "alive")

    def __init__(self, server, sock, peer):
        self.server = server
        self.sock = sock
        self.peer = peer
        self._write_lock = threading.Lock()
        self.alive = True

    def send_frame(self, opcode, request_id, payload):
        frame = wp.HEADER.pack(len(payload), opcode & 0xFF, request_id) + payload
        try:
            with self._write_lock:
                self.sock.sendall(frame)
        except OSError:
            self.alive = False

    def close(self):
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class _Command:
    """A decoded request waiting in the mailbox."""

    __slots__ = ("conn", "opcode", "request_id", "payload", "enqueued_at")

    def __init__(self, conn, opcode, request_id, payload):
        self.conn = conn
        self.opcode = opcode
        self.request_id = request_id
        self.payload = payload
        self.enqueued_at = time.monotonic()

    @property
    def is_step(self):
        return self.opcode == wp.OP_STEP

    def run(self, sim):
        try:
            body = _HANDLERS[self.opcode](sim, wp.PayloadReader(self.payload))
        except Exception as exc:  # noqa: BLE001 - every failure maps to a status
            self.respond_error(_status_for(exc), str(exc))
        else:
            self.respond_ok(body)

    def respond_ok(self, body=b""):
        self._respond(bytes([wp.ST_OK]) + body)

    def respond_error(self, status, message):
        self._respond(bytes([status]) + wp.pack_str(message))

    def _respond(self, payload):
        if self.is_step:
            self.conn.server._note_step_done()
        self.conn.send_frame(self.opcode, self.request_id, payload)


class RemoteServer:
    """Listening socket plus the threads that serve one simulator."""

    def __init__(self, sim, port=DEFAULT_PORT, service=SERVICE_STEP_BOUNDARY,
                 interval_ms=5.0, busy_step=False, host="127.0.0.1"):
        if service not in (SERVICE_STEP_BOUNDARY, SERVICE_FIXED_INTERVAL):
            raise ValueError(f"unknown service cadence {service!r}")
        if interval_ms <= 0:
            raise ValueError("interval_ms must be positive")
        self.sim = sim
        self.service = service
        self.interval = interval_ms / 1000.0
        self.busy_step = busy_step

        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            listener.close()
            raise PortInUseError(f"cannot bind {host}:{port}: {exc}") from exc
        listener.listen(16)
        self._listener = listener
        self.host = host
        self.port = listener.getsockname()[1]

        # In fixed-interval mode the service tick owns command execution.
        sim.drain_in_step = service == SERVICE_STEP_BOUNDARY
        sim.attach_server(self)

        self._closing = False
        self._wake = threading.Event()
        self._pending_steps = 0
        self._pending_lock = threading.Lock()
        self._conns = set()
        self._conn_lock = threading.Lock()

        self._service_thread = threading.Thread(
            target=self._service_loop, name="sim-service", daemon=True
        )
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="sim-accept", daemon=True
        )
        self._service_thread.start()
        self._accept_thread.start()

    # -- bookkeeping ------------------------------------------------------

    def _note_step_queued(self):
        with self._pending_lock:
            self._pending_steps += 1

    def _note_step_done(self):
        with self._pending_lock:
            self._pending_steps -= 1

    def _steps_pending(self):
        with self._pending_lock:
            return self._pending_steps > 0

    # -- socket side --------------------------------------------------------

    def _accept_loop(self):
        while not self._closing:
            try:
                sock, peer = self._listener.accept()
            except OSError:
                break  # listener closed
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(self, sock, peer)
            with self._conn_lock:
                self._conns.add(conn)
            threading.Thread(
                target=self._read_loop, args=(conn,),
                name=f"sim-read-{peer[1]}", daemon=True,
            ).start()

    def _read_loop(self, conn):
        sock = conn.sock
        try:
            while not self._closing:
                header = wp.recv_exact(sock, wp.HEADER_SIZE)
                if header is None:
                    break  # clean close between frames
                payload_len, opcode, request_id = wp.HEADER.unpack(header)
                if payload_len > wp.MAX_PAYLOAD:
                    # Decodable header, implausible length: answer, then drop
                    # the connection since the stream cannot be resynced.
                    conn.send_frame(
                        opcode, request_id,
                        bytes([wp.ST_BAD_ARGS])
                        + wp.pack_str(f"declared payload of {payload_len} bytes exceeds 64 MiB"),
                    )
                    break
                payload = wp.recv_exact(sock, payload_len) if payload_len else b""
                if payload is None:
                    break  # EOF mid-frame: nothing sensible to answer
                if opcode not in wp.OPCODES:
                    conn.send_frame(
                        opcode, request_id,
                        bytes([wp.ST_BAD_ARGS])
                        + wp.pack_str(f"unknown opcode 0x{opcode:02X}"),
                    )
                    continue  # recoverable; connection survives
                cmd = _Command(conn, opcode, request_id, payload)
                if cmd.is_step:
                    self._note_step_queued()
                self.sim.mailbox.append(cmd)
                self._wake.set()
        except (OSError, wp.TruncatedFrameError):
            pass  # peer vanished mid-frame; close silently
        finally:
            conn.close()
            with self._conn_lock:
                self._conns.discard(conn)

    # -- service side --------------------------------------------------------

    def _wait(self, timeout=0.001):
        self._wake.wait(timeout)
        self._wake.clear()

    def _service_loop(self):
        try:
            if self.service == SERVICE_FIXED_INTERVAL:
                self._fixed_interval_loop()
            else:
                self._step_boundary_loop()
        except Exception:  # pragma: no cover - service thread must not die silently
            if not self._closing:
                raise

    def _step_boundary_loop(self):
        sim = self.sim
        if self.busy_step:
            # Keep the stepping thread from starving reader threads of the
            # interpreter lock for a whole switch interval at a time.
            sys.setswitchinterval(0.0005)
        spin = 0
        while not self._closing:
            if sim.phase == simulation.PHASE_RUNNING:
                if self.busy_step:
                    sim.step()
                    spin = (spin + 1) & 0x3F
                    if spin == 0:
                        time.sleep(0)
                elif self._steps_pending():
                    sim.step()
                else:
                    # Non-STEP commands queued while running stall here until
                    # a STEP arrives; that is the documented cadence contract.
                    self._wait()
            else:
                mailbox = sim.mailbox
                cmd = mailbox.popleft() if mailbox else None
                if cmd is None:
                    self._wait()
                elif cmd.is_step:
                    cmd.respond_error(wp.ST_SIM_NOT_RUNNING, "simulation is not running")
                else:
                    cmd.run(sim)

    def _fixed_interval_loop(self):
        sim = self.sim
        mailbox = sim.mailbox
        interval = self.interval
        tick = min(interval / 8.0, 0.001)
        while not self._closing:
            time.sleep(tick)
            now = time.monotonic()
            # Execute whatever has aged a full interval in the queue; the
            # emulated latency is a real queue delay, not a clock fiction.
            while mailbox and now - mailbox[0].enqueued_at >= interval:
                cmd = mailbox.popleft()
                if cmd.is_step:
                    try:
                        sim.step()
                    except Exception as exc:  # noqa: BLE001
                        cmd.respond_error(_status_for(exc), str(exc))
                    else:
                        cmd.respond_ok()
                else:
                    cmd.run(sim)

    # -- lifecycle ------------------------------------------------------------

    def close(self):
        if self._closing:
            return
        self._closing = True
        self._wake.set()
        # Closing a listening socket does not wake a thread already blocked
        # in accept(), and the kernel keeps completing handshakes while that
        # syscall holds the fd.  Poke the acceptor loose first.
        try:
            with socket.create_connection((self.host, self.port), timeout=0.5):
                pass
        except OSError:
            pass
        try:
            self._listener.close()
        except OSError:
            pass
        self._service_thread.join(timeout=2.0)
        self._accept_thread.join(timeout=2.0)
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def serve(sim, port=DEFAULT_PORT, service=SERVICE_STEP_BOUNDARY,
          interval_ms=5.0, busy_step=False, host="127.0.0.1"):
    """Start serving a simulator over TCP; returns the RemoteServer handle."""
    return RemoteServer(sim, port=port, service=service,
                        interval_ms=interval_ms, busy_step=busy_step, host=host)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="simkernel-server",
        description="Serve a simulation scene over the binary TCP protocol.",
    )
    parser.add_argument("--scene", required=True, help="scene file to load")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT,
                        help="TCP port; 0 picks an ephemeral port")
    parser.add_argument("--service", choices=("step", "fixed"), default="step",
                        help="service cadence: at step boundaries or on a fixed interval")
    parser.add_argument("--interval-ms", type=float, default=5.0,
                        help="service interval for --service fixed")
    parser.add_argument("--busy-step", action="store_true",
                        help="with --service step: step continuously while running")
    parser.add_argument("--start", action="store_true",
                        help="start the simulation immediately")
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    sim = simulation.launch(args.scene, headless=True, dt=args.dt, seed=args.seed)
    if args.start:
        sim.start()
    service = SERVICE_FIXED_INTERVAL if args.service == "fixed" else SERVICE_STEP_BOUNDARY
    server = serve(sim, port=args.port, service=service,
                   interval_ms=args.interval_ms, busy_step=args.busy_step)
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
