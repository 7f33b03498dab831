"""Exception hierarchy for the client SDK.

Remote failures arrive as a status byte plus a human-readable message; they
are surfaced as ``RemoteCallError`` subclasses so callers can catch by
meaning instead of comparing numbers.  Local misuse (wrong lifecycle phase,
wrong thread, dead session) never touches the wire and raises the
``Session*`` errors instead.
"""


class SimClientError(Exception):
    """Base class for everything this package raises on purpose."""


class ConnectionClosed(SimClientError):
    """The server hung up (or was never there)."""


class ProtocolViolation(SimClientError):
    """The byte stream broke the framing rules; the connection is unusable."""


class SessionStateError(SimClientError):
    """Operation not valid for the session's current lifecycle phase."""


class SessionClosedError(SessionStateError):
    """The session (or a proxy bound to it) was used after shutdown."""


class SessionThreadError(SimClientError):
    """A session was used from a thread other than the one that launched it."""


class LaunchError(SimClientError):
    """The server process could not be started or never said hello."""


class RemoteCallError(SimClientError):
    """A request reached the server and was refused."""

    def __init__(self, status: int, message: str):
        super().__init__(message or f"server returned status {status}")
        self.status = status
        self.message = message


class ObjectNotFound(RemoteCallError):
    """No scene object with that name or handle."""


class BadRequest(RemoteCallError):
    pass


class SimulationNotRunning(RemoteCallError):
    """The simulation must be started before stepping or joint commands."""

    def __init__(self, status=0x03, message="simulation is not running"):
        super().__init__(status, message)


class WrongJointMode(RemoteCallError):
    """The joint is not in the control mode this command requires."""


class ServerInternalError(RemoteCallError):
    pass


_BY_STATUS = {
    0x01: ObjectNotFound,
    0x02: BadRequest,
    0x03: SimulationNotRunning,
    0x04: WrongJointMode,
    0x05: ServerInternalError,
}


def error_for_status(status: int, message: str) -> RemoteCallError:
    return _BY_STATUS.get(status, RemoteCallError)(status, message)
