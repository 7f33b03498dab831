"""Session lifecycle: launching (or attaching to) a server and stepping it.

A session owns one TCP connection and mirrors the simulation's lifecycle
phase locally, so calls that are invalid for the current phase fail fast
without touching the wire.  Sessions are single-threaded by contract: the
thread that launches a session is the only one allowed to use it.  Multiple
sessions (each with its own server or connection) may coexist in a process.

The newest launched session becomes the process-wide default that proxy
constructors (``Shape('target')``, ``Franka()``, ...) bind to when no
session is passed explicitly.
"""

import os
import shutil
import subprocess
import sys
import threading
import time

from . import wire
from .errors import (
    LaunchError,
    SessionClosedError,
    SessionStateError,
    SessionThreadError,
    SimulationNotRunning,
)

_PHASE_NEW = "new"
_PHASE_STOPPED = "stopped"
_PHASE_RUNNING = "running"
_PHASE_CLOSED = "closed"

_active_session = None


def active_session():
    """The default session proxies bind to; the most recently launched one."""
    if _active_session is None:
        raise SessionStateError("no session has been launched")
    return _active_session


class PyRep:
    """A synchronous connection to a simulation server.

    ``launch`` spawns a local server process for the given scene (or, when
    the session was built with ``address=...``, attaches to one that is
    already listening and asks it to load the scene).  ``start``/``step``/
    ``stop`` then drive the simulation clock; nothing advances between
    ``step`` calls.
    """

    def __init__(self, address=None, server_command=None, interval_ms=1.0,
                 timeout=30.0):
        self._address = address
        self._server_command = list(server_command) if server_command else None
        self._interval_ms = float(interval_ms)
        self._timeout = timeout
        self._channel = None
        self._process = None
        self._phase = _PHASE_NEW
        self._thread_ident = None
        self.scene_path = None

    # -- lifecycle ---------------------------------------------------------

    def launch(self, scene_path, headless=True):
        """Bring up a server for ``scene_path`` and connect to it."""
        if self._phase != _PHASE_NEW:
            raise SessionStateError("this session has already been launched")
        if not headless:
            raise ValueError("only headless operation is supported")
        if self._address is not None:
            host, port = self._address
            self._channel = wire.Channel(host, port, timeout=self._timeout)
            self._channel.call(wire.OP_LOAD_SCENE, wire.pack_str(scene_path))
        else:
            self._spawn_server(scene_path)
        self.scene_path = scene_path
        self._phase = _PHASE_STOPPED
        self._thread_ident = threading.get_ident()
        global _active_session
        _active_session = self
        return self

    def _spawn_server(self, scene_path):
        command = self._server_command
        if command is None:
            found = shutil.which("simkernel-server")
            command = [found] if found else [sys.executable, "-m", "simkernel.server"]
        command = command + [
            "--scene", os.path.abspath(scene_path),
            "--port", "0",
            "--service", "fixed",
            "--interval-ms", str(self._interval_ms),
        ]
        try:
            self._process = subprocess.Popen(
                command, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        except OSError as exc:
            raise LaunchError(f"cannot run {command[0]}: {exc}") from None
        deadline = time.monotonic() + self._timeout
        line = ""
        while time.monotonic() < deadline:
            line = self._process.stdout.readline()
            if not line:
                break
            if line.startswith("listening on "):
                host, _, port = line.split()[-1].rpartition(":")
                self._channel = wire.Channel(host, int(port), timeout=self._timeout)
                return
        self._process.kill()
        self._process.wait()
        raise LaunchError(
            f"server did not come up (last output: {line.strip()!r})"
        )

    def start(self):
        """Begin a simulation run; joints accept commands from here on."""
        self._require_phase(_PHASE_STOPPED, "start")
        self._call(wire.OP_START)
        self._phase = _PHASE_RUNNING

    def step(self):
        """Advance the simulation by exactly one time step."""
        if self._phase != _PHASE_RUNNING:
            self._guard()  # closed / foreign thread take precedence
            raise SimulationNotRunning()
        self._call(wire.OP_STEP)

    def stop(self):
        """End the run; state stays readable, and the next start re-initializes."""
        self._require_phase(_PHASE_RUNNING, "stop")
        self._call(wire.OP_STOP)
        self._phase = _PHASE_STOPPED

    def shutdown(self):
        """Tear down the connection (and the spawned server, if any)."""
        if self._phase == _PHASE_CLOSED:
            return
        self._phase = _PHASE_CLOSED
        if self._channel is not None:
            self._channel.close()
            self._channel = None
        if self._process is not None:
            self._process.terminate()
            try:
                self._process.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._process.kill()
                self._process.wait()
            self._process.stdout.close()
            self._process = None
        global _active_session
        if _active_session is self:
            _active_session = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.shutdown()

    # -- plumbing ----------------------------------------------------------

    @property
    def running(self):
        return self._phase == _PHASE_RUNNING

    def get_handle(self, name):
        """Resolve an object name to its integer scene handle."""
        return self._call(wire.OP_GET_HANDLE, wire.pack_str(name)).u32()

    def _guard(self):
        if self._phase == _PHASE_CLOSED:
            raise SessionClosedError("session has been shut down")
        if self._phase == _PHASE_NEW:
            raise SessionStateError("session has not been launched")
        if threading.get_ident() != self._thread_ident:
            raise SessionThreadError(
                "sessions are not shareable across threads; this one belongs "
                "to the thread that launched it"
            )

    def _require_phase(self, phase, verb):
        self._guard()
        if self._phase != phase:
            raise SessionStateError(
                f"cannot {verb} while the session is {self._phase}"
            )

    def _call(self, opcode, payload=b""):
        """One wire request; every public SDK operation makes exactly one."""
        self._guard()
        return self._channel.call(opcode, payload)


Session = PyRep  # descriptive alias
