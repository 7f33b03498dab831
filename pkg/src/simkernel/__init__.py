"""Embeddable robot-simulation kernel.

A stepped rigid-scene simulator with forward/inverse kinematics, an
RRT-Connect motion planner, a deterministic software renderer with shadow
mapping, and a binary TCP remote API.  The direct API executes commands
synchronously on the caller's thread; ``server.serve`` exposes the same
operations over sockets with configurable service cadences.
"""

from . import bench, client, kinematics, meshes, planning, protocol, render, scene, server
from .errors import SimError
from .simulation import DEFAULT_DT, Simulator, launch
from .transforms import Pose, Quaternion

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_DT",
    "Pose",
    "Quaternion",
    "SimError",
    "Simulator",
    "bench",
    "client",
    "kinematics",
    "launch",
    "meshes",
    "planning",
    "protocol",
    "render",
    "scene",
    "server",
    "__version__",
]
