"""Typed proxies for scene objects.

A proxy is a bound handle plus the operations that make sense for the
object's kind.  Each method is exactly one wire request; constructing a
proxy from a name costs the one handle lookup.  Proxies never outlive
their session — using one after ``shutdown`` raises.
"""

import numpy as np

from . import wire
from .session import active_session

WORLD_FRAME = 0


def _frame_handle(relative_to):
    if relative_to is None:
        return WORLD_FRAME
    if isinstance(relative_to, Object):
        return relative_to.get_handle()
    return int(relative_to)


class Object:
    """Any scene object: position access in world or relative frames."""

    def __init__(self, name_or_handle, session=None):
        self._session = session if session is not None else active_session()
        if isinstance(name_or_handle, (int, np.integer)):
            self._handle = int(name_or_handle)
            self._name = None
        else:
            self._name = name_or_handle
            self._handle = self._session.get_handle(name_or_handle)

    def get_handle(self) -> int:
        return self._handle

    def get_name(self):
        return self._name

    def get_position(self, relative_to=None) -> np.ndarray:
        """Position as float64 ``[x, y, z]``, in metres.

        ``relative_to`` may be another proxy (or raw handle) whose frame the
        answer is expressed in; the default is the world frame.
        """
        payload = wire.pack_u32(self._handle) + wire.pack_u32(_frame_handle(relative_to))
        reader = self._session._call(wire.OP_GET_POSITION, payload)
        return np.array(reader.f64s(3))

    def set_position(self, position, relative_to=None) -> None:
        x, y, z = (float(v) for v in position)
        payload = (wire.pack_u32(self._handle)
                   + wire.pack_u32(_frame_handle(relative_to))
                   + wire.pack_f64s((x, y, z)))
        self._session._call(wire.OP_SET_POSITION, payload)

    def __repr__(self):
        label = self._name if self._name is not None else f"handle {self._handle}"
        return f"<{type(self).__name__} {label}>"


class Shape(Object):
    pass


class Dummy(Object):
    pass


class VisionSensor(Object):
    """A camera producing RGB and metric depth images.

    Images come back row-major at the sensor's configured resolution: rgb as
    ``(height, width, 3)`` uint8 (the wire encoding), depth as
    ``(height, width)`` float64 metres along the view axis.
    """

    def capture_rgb(self) -> np.ndarray:
        reader = self._session._call(wire.OP_CAPTURE_RGB, wire.pack_u32(self._handle))
        width = reader.u32()
        height = reader.u32()
        data = reader.raw(width * height * 3)
        return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)

    def capture_depth(self) -> np.ndarray:
        reader = self._session._call(wire.OP_CAPTURE_DEPTH, wire.pack_u32(self._handle))
        width = reader.u32()
        height = reader.u32()
        data = reader.raw(width * height * 8)
        return np.frombuffer(data, dtype="<f8").reshape(height, width)
