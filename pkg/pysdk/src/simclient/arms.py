"""Arm proxies: a joint chain discovered by naming convention.

An arm named ``Foo`` is expected to expose its joints as ``Foo_joint1``,
``Foo_joint2``, ... and its end effector as the dummy ``Foo_tip``; that is
how the bundled scenes are laid out.  Discovery happens once, in the
constructor; afterwards every command is a single wire request (the joint
velocity command is one batched frame for the whole chain).
"""

from . import wire
from .errors import ObjectNotFound
from .objects import Dummy, Object


class Arm(Object):
    def __init__(self, name, session=None):
        super().__init__(name, session=session)
        self._joint_handles = []
        while True:
            try:
                handle = self._session.get_handle(f"{name}_joint{len(self._joint_handles) + 1}")
            except ObjectNotFound:
                break
            self._joint_handles.append(handle)
        if not self._joint_handles:
            raise ObjectNotFound(0x01, f"{name!r} has no joints named {name}_joint1...")
        self._tip = Dummy(self._session.get_handle(f"{name}_tip"), session=self._session)

    @property
    def joint_count(self) -> int:
        return len(self._joint_handles)

    def get_joint_handles(self):
        return list(self._joint_handles)

    def get_tip(self) -> Dummy:
        """The end-effector dummy (already resolved; no wire traffic)."""
        return self._tip

    def set_target_joint_velocities(self, velocities) -> None:
        """Command all joints at once, in rad/s (or m/s for prismatic joints)."""
        velocities = [float(v) for v in velocities]
        if len(velocities) != len(self._joint_handles):
            raise ValueError(
                f"expected {len(self._joint_handles)} velocities, got {len(velocities)}"
            )
        payload = wire.pack_u32(len(velocities))
        for handle in self._joint_handles:
            payload += wire.pack_u32(handle)
        payload += wire.pack_f64s(velocities)
        self._session._call(wire.OP_SET_JOINT_TARGET_VELOCITY, payload)


class Franka(Arm):
    """The bundled demo arm; scenes name its objects ``Franka*``."""

    def __init__(self, name="Franka", session=None):
        super().__init__(name, session=session)
