"""Object-oriented client for the simulation kernel's TCP protocol.

Typical use::

    from simclient import PyRep
    from simclient.objects import Shape, VisionSensor
    from simclient.arms import Franka

    pr = PyRep()
    pr.launch('scene.json', headless=True)
    pr.start()
    arm = Franka()
    ...
    pr.step()

The SDK speaks only the wire protocol; it never links against the kernel.
All calls are blocking and synchronous, one request in flight at a time.
"""

from . import arms, errors, objects, wire
from .errors import SimClientError
from .session import PyRep, Session, active_session

__version__ = "0.1.0"

__all__ = [
    "PyRep",
    "Session",
    "SimClientError",
    "active_session",
    "arms",
    "errors",
    "objects",
    "wire",
]
