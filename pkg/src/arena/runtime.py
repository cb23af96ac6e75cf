"""Container-runtime abstraction shared by the Docker wire client and the sim.

The surface is deliberately narrow: networks, create/start/stop/remove,
inspect, and a label query.  Both implementations must behave identically on
this contract; the sim is the reference used by the test suite.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from enum import Enum

from .config import ImageRef
from .errors import ValidationError
from .volumes import Mount

LABEL_GAME = "arena.game"
LABEL_SLOT = "arena.slot"


class ContainerState(str, Enum):
    CREATED = "created"
    RUNNING = "running"
    EXITED = "exited"
    NOT_FOUND = "not-found"


@dataclass(frozen=True)
class ContainerStatus:
    state: ContainerState
    since: float | None = None  # RUNNING: start timestamp
    exit_code: int | None = None  # EXITED: process exit code

    @classmethod
    def created(cls) -> "ContainerStatus":
        return cls(ContainerState.CREATED)

    @classmethod
    def running(cls, since: float) -> "ContainerStatus":
        return cls(ContainerState.RUNNING, since=since)

    @classmethod
    def exited(cls, code: int) -> "ContainerStatus":
        return cls(ContainerState.EXITED, exit_code=code)

    @classmethod
    def not_found(cls) -> "ContainerStatus":
        return cls(ContainerState.NOT_FOUND)


@dataclass(frozen=True)
class ContainerConfig:
    name: str
    image: ImageRef
    env: tuple[str, ...] = ()
    mounts: tuple[Mount, ...] = ()
    network: str = "bridge"
    cpus: float = 1.0
    memory_mib: int = 2048
    port_bindings: tuple[tuple[int, int], ...] = ()  # (container_port, host_port)
    labels: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("container name: empty")
        if LABEL_GAME not in self.labels or LABEL_SLOT not in self.labels:
            raise ValidationError(
                f"labels: {LABEL_GAME} and {LABEL_SLOT} are required"
            )
        if self.cpus <= 0:
            raise ValidationError("cpus: must be positive")
        if self.memory_mib <= 0:
            raise ValidationError("memory_mib: must be positive")


@dataclass(frozen=True)
class ContainerHandle:
    id: str
    name: str


class ContainerRuntime(abc.ABC):
    """What the match lifecycle needs from a container runtime, nothing more."""

    @abc.abstractmethod
    def ensure_network(self, name: str) -> str:
        """Create the named bridge network if absent; return its id."""

    @abc.abstractmethod
    def remove_network(self, name: str) -> None:
        """Remove the named network; missing networks are not an error."""

    @abc.abstractmethod
    def create(self, cfg: ContainerConfig) -> ContainerHandle:
        ...

    @abc.abstractmethod
    def start(self, handle: ContainerHandle) -> None:
        ...

    @abc.abstractmethod
    def stop(self, handle: ContainerHandle, grace_s: int) -> None:
        ...

    @abc.abstractmethod
    def remove(self, handle: ContainerHandle) -> None:
        ...

    @abc.abstractmethod
    def inspect(self, handle: ContainerHandle) -> ContainerStatus:
        ...

    @abc.abstractmethod
    def list_by_label(
        self, key: str, value: str | None = None
    ) -> list[ContainerHandle]:
        """Containers whose labels[key] == value (value=None: key present)."""


class Clock(abc.ABC):
    """Time source used by the lifecycle; the sim advances virtual time."""

    @abc.abstractmethod
    def now(self) -> float:
        ...

    @abc.abstractmethod
    def sleep(self, seconds: float) -> None:
        ...


class WallClock(Clock):
    def now(self) -> float:
        import time

        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        import time

        time.sleep(seconds)
