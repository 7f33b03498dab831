"""Exception hierarchy for the simulation kernel."""


class SimError(Exception):
    """Base class for all kernel errors."""


class NotFoundError(SimError):
    """Unknown object handle or name."""


# --- scene loading -----------------------------------------------------------


class SceneError(SimError):
    """Base class for scene-load failures."""


class SceneParseError(SceneError):
    """Scene document is not valid JSON or violates the schema.

    Carries ``line`` / ``column`` when the underlying JSON decoder
    provides them.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class DuplicateNameError(SceneError):
    """Two objects in the scene document share a name."""


class UnknownParentError(SceneError):
    """An object names a parent that does not exist in the document."""


class CycleError(SceneError):
    """Parent links do not form a forest."""


class BadOrientationError(SceneError):
    """Quaternion in the document deviates from unit norm by more than 1e-3."""


class SceneIOError(SceneError):
    """Scene file could not be read."""


# --- scene mutation / simulation ---------------------------------------------


class SetOnJointError(SimError):
    """Pose setters are not allowed on joint objects; use joint targets."""


class WrongModeError(SimError):
    """Joint command does not match the joint's control mode."""


class LimitViolationError(SimError):
    """Joint value outside its configured limits."""


class NotRunningError(SimError):
    """Operation requires a running simulation."""


class AlreadyRunningError(SimError):
    """start() called while the simulation is already running."""


# --- kinematics ---------------------------------------------------------------


class ArmNotBoundError(SimError):
    """Arm descriptor is not attached to a live scene."""


class IkNotConvergedError(SimError):
    """Inverse kinematics did not reach tolerance within max_iters.

    Carries the best-effort joint vector and the final residuals so the
    caller can decide whether the result is usable.
    """

    def __init__(self, q, iterations, pos_err, ori_err):
        super().__init__(
            f"IK not converged after {iterations} iterations "
            f"(pos_err={pos_err:.3e} m, ori_err={ori_err:.3e} rad)"
        )
        self.q = q
        self.iterations = iterations
        self.pos_err = pos_err
        self.ori_err = ori_err


# --- planning ------------------------------------------------------------------


class PlanningError(SimError):
    """Base class for motion-planning failures."""


class StartInCollisionError(PlanningError):
    """q_start collides with the world."""


class GoalInCollisionError(PlanningError):
    """q_goal collides with the world."""


class NoPathFoundError(PlanningError):
    """Planner exhausted max_nodes without connecting the trees."""


# --- rendering -----------------------------------------------------------------


class NotAVisionSensorError(SimError):
    """Capture requested on an object that is not a vision sensor."""


class NotALightError(SimError):
    """Shadow map requested for an object that is not a light."""


# --- wire protocol --------------------------------------------------------------


class ProtocolError(SimError):
    """Base class for wire-protocol violations."""


class FrameTooLargeError(ProtocolError):
    """Declared payload length exceeds the 64 MiB cap."""


class TruncatedFrameError(ProtocolError):
    """Byte stream ended before the declared frame was complete."""


class UnknownOpcodeError(ProtocolError):
    """Opcode byte is not in the opcode table."""


class PortInUseError(SimError):
    """Requested TCP port is already bound."""


class ConnectionClosedError(SimError):
    """Peer closed the connection mid-call."""


class RemoteTimeoutError(SimError):
    """No response within the client timeout."""


class RemoteError(SimError):
    """Non-OK status returned by the remote kernel."""

    def __init__(self, status, message=""):
        super().__init__(f"remote status {status:#04x}: {message}")
        self.status = status
        self.message = message
