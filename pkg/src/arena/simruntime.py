"""Deterministic in-process simulated container runtime.

Time is virtual: nothing happens until `advance()` is called, and two runs
with the same script and seed produce identical event traces.  Scripts can
inject create/start failures and arbitrary exit codes, and containers
"write" files into their mounted host paths, which is how simulated bots
deliver result files and readiness markers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AlreadyRunningError,
    ContainerNotFoundError,
    ImageMissingError,
    NameConflictError,
    RuntimeUnavailableError,
    StillRunningError,
)
from .runtime import (
    Clock,
    ContainerConfig,
    ContainerHandle,
    ContainerRuntime,
    ContainerState,
    ContainerStatus,
    LABEL_GAME,
    LABEL_SLOT,
)

STOP_EXIT_CODE = 137

DEFAULT_IMAGES = frozenset({"starcraft:game", "starcraft:java"})


@dataclass
class ContainerPlan:
    run_duration_s: float = 5.0
    exit_code: int = 0
    files_to_write: list[tuple[str, bytes]] = field(default_factory=list)
    files_at_start: list[tuple[str, bytes]] = field(default_factory=list)
    fail_create: bool = False
    fail_start: bool = False


@dataclass
class SimScript:
    plans: dict[str, ContainerPlan] = field(default_factory=dict)
    default: ContainerPlan | None = None
    seed: int = 0

    def plan_for(self, name: str) -> ContainerPlan | None:
        plan = self.plans.get(name)
        if plan is not None:
            return plan
        return self.default


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # network | create | start | exit | stop | remove
    name: str
    detail: str = ""


@dataclass
class _SimContainer:
    handle: ContainerHandle
    cfg: ContainerConfig
    plan: ContainerPlan
    status: ContainerStatus
    exit_at: float | None = None
    removed: bool = False


class SimRuntime(ContainerRuntime):
    def __init__(
        self,
        script: SimScript | None = None,
        images: frozenset[str] = DEFAULT_IMAGES,
        available: bool = True,
        auto_results: bool = False,
    ):
        self.script = script or SimScript()
        self.images = images
        self.available = available
        self.auto_results = auto_results
        self.now = 0.0
        self.events: list[SimEvent] = []
        self._containers: dict[str, _SimContainer] = {}  # by id
        self._by_name: dict[str, _SimContainer] = {}  # live only
        self.configs: dict[str, ContainerConfig] = {}  # last cfg per name
        self._networks: dict[str, str] = {}
        self._next_id = 0

    # -- ContainerRuntime ----------------------------------------------------

    def ensure_network(self, name: str) -> str:
        self._check_available()
        if name not in self._networks:
            self._networks[name] = f"net-{len(self._networks)}"
            self._record("network", name, "create")
        return self._networks[name]

    def remove_network(self, name: str) -> None:
        if self._networks.pop(name, None) is not None:
            self._record("network", name, "remove")

    def create(self, cfg: ContainerConfig) -> ContainerHandle:
        self._check_available()
        cfg.validate()
        if cfg.name in self._by_name:
            raise NameConflictError(f"container name in use: {cfg.name}")
        if str(cfg.image) not in self.images:
            raise ImageMissingError(f"no such image: {cfg.image}")
        plan = self.script.plan_for(cfg.name)
        if plan is None:
            plan = self._auto_plan(cfg) if self.auto_results else ContainerPlan()
        if plan.fail_create:
            raise RuntimeUnavailableError(f"injected create failure: {cfg.name}")
        self._next_id += 1
        ctr = _SimContainer(
            handle=ContainerHandle(id=f"sim-{self._next_id:06d}", name=cfg.name),
            cfg=cfg,
            plan=plan,
            status=ContainerStatus.created(),
        )
        self._containers[ctr.handle.id] = ctr
        self._by_name[cfg.name] = ctr
        self.configs[cfg.name] = cfg
        self._record("create", cfg.name)
        return ctr.handle

    def start(self, handle: ContainerHandle) -> None:
        ctr = self._live(handle)
        if ctr.status.state is not ContainerState.CREATED:
            raise AlreadyRunningError(f"{handle.name}: not in created state")
        if ctr.plan.fail_start:
            raise RuntimeUnavailableError(f"injected start failure: {handle.name}")
        ctr.status = ContainerStatus.running(since=self.now)
        ctr.exit_at = self.now + ctr.plan.run_duration_s
        for path, data in ctr.plan.files_at_start:
            self._write_file(ctr, path, data)
        self._record("start", handle.name)

    def stop(self, handle: ContainerHandle, grace_s: int) -> None:
        ctr = self._live(handle)
        if ctr.status.state is ContainerState.RUNNING:
            ctr.status = ContainerStatus.exited(STOP_EXIT_CODE)
            ctr.exit_at = None
            self._record("stop", handle.name)

    def remove(self, handle: ContainerHandle) -> None:
        ctr = self._live(handle)
        if ctr.status.state is ContainerState.RUNNING:
            raise StillRunningError(f"{handle.name}: still running")
        ctr.removed = True
        ctr.status = ContainerStatus.not_found()
        del self._by_name[ctr.cfg.name]
        self._record("remove", handle.name)

    def inspect(self, handle: ContainerHandle) -> ContainerStatus:
        ctr = self._containers.get(handle.id)
        if ctr is None:
            return ContainerStatus.not_found()
        return ctr.status

    def list_by_label(
        self, key: str, value: str | None = None
    ) -> list[ContainerHandle]:
        self._check_available()
        out = []
        for ctr in self._by_name.values():
            if key not in ctr.cfg.labels:
                continue
            if value is not None and ctr.cfg.labels[key] != value:
                continue
            out.append(ctr.handle)
        out.sort(key=lambda h: h.name)
        return out

    # -- simulation control --------------------------------------------------

    def advance(self, seconds: float) -> None:
        """Advance virtual time, firing scheduled container exits in order."""
        target = self.now + seconds
        while True:
            due = [
                ctr
                for ctr in self._by_name.values()
                if ctr.exit_at is not None and ctr.exit_at <= target
            ]
            if not due:
                break
            ctr = min(due, key=lambda c: (c.exit_at, c.cfg.name))
            self.now = ctr.exit_at
            ctr.exit_at = None
            ctr.status = ContainerStatus.exited(ctr.plan.exit_code)
            for path, data in ctr.plan.files_to_write:
                self._write_file(ctr, path, data)
            self._record("exit", ctr.cfg.name, str(ctr.plan.exit_code))
        self.now = target

    def clock(self) -> "SimClock":
        return SimClock(self)

    def resource_config(self, handle: ContainerHandle) -> tuple[float, int]:
        """(cpus, memory_mib) as stored at create time."""
        return (
            self._containers[handle.id].cfg.cpus,
            self._containers[handle.id].cfg.memory_mib,
        )

    def config_of(self, handle: ContainerHandle) -> ContainerConfig:
        return self._containers[handle.id].cfg

    # -- internals -----------------------------------------------------------

    def _check_available(self) -> None:
        if not self.available:
            raise RuntimeUnavailableError("simulated daemon down")

    def _live(self, handle: ContainerHandle) -> _SimContainer:
        ctr = self._containers.get(handle.id)
        if ctr is None or ctr.removed:
            raise ContainerNotFoundError(f"no such container: {handle.name}")
        return ctr

    def _record(self, kind: str, name: str, detail: str = "") -> None:
        self.events.append(SimEvent(self.now, kind, name, detail))

    def _write_file(self, ctr: _SimContainer, container_path: str, data: bytes) -> None:
        host = self._resolve(ctr.cfg, container_path)
        if host is None:
            return  # path not under any mount: silently dropped, like a real bot
        host.parent.mkdir(parents=True, exist_ok=True)
        host.write_bytes(data)

    @staticmethod
    def _resolve(cfg: ContainerConfig, container_path: str) -> Path | None:
        best = None
        for m in cfg.mounts:
            prefix = m.container_path.rstrip("/") + "/"
            if container_path.startswith(prefix) and not m.read_only:
                if best is None or len(m.container_path) > len(best.container_path):
                    best = m
        if best is None:
            return None
        rel = container_path[len(best.container_path.rstrip("/") + "/"):]
        return Path(best.host_path) / rel

    def _auto_plan(self, cfg: ContainerConfig) -> ContainerPlan:
        """Default behavior for unscripted game containers: slot 0 wins."""
        game = cfg.labels[LABEL_GAME]
        slot = int(cfg.labels[LABEL_SLOT])
        plan = ContainerPlan(
            run_duration_s=10.0,
            exit_code=0,
            files_to_write=[result_file(game, slot, is_winner=(slot == 0))],
        )
        if slot == 0:
            plan.files_at_start.append(ready_marker(game))
        return plan


class SimClock(Clock):
    def __init__(self, runtime: SimRuntime):
        self._rt = runtime

    def now(self) -> float:
        return self._rt.now

    def sleep(self, seconds: float) -> None:
        self._rt.advance(seconds)


# -- script-building helpers used by tests and dry runs ----------------------

def result_file(
    game_name: str,
    slot: int,
    is_winner: bool = False,
    is_crashed: bool = False,
    frame_count: int = 8000,
    **scores: int,
) -> tuple[str, bytes]:
    """(container_path, bytes) pair for a result file in the write mount."""
    doc = {
        "slot": slot,
        "is_winner": is_winner,
        "is_crashed": is_crashed,
        "frame_count": frame_count,
    }
    doc.update(scores)
    return (f"/app/sc/write/{game_name}_result.json", json.dumps(doc).encode())


def ready_marker(game_name: str) -> tuple[str, bytes]:
    return (f"/app/sc/write/{game_name}_host_ready", b"")


def container_name(game_name: str, slot: int) -> str:
    return f"arena_{game_name}_{slot}"


def script_for_match(
    game_name: str,
    num_players: int,
    winner_slot: int | None = 0,
    crashed_slots: set[int] = frozenset(),
    duration_s: float = 10.0,
) -> dict[str, ContainerPlan]:
    """Per-container plans for one match: winner claims, crashes, readiness."""
    plans: dict[str, ContainerPlan] = {}
    for slot in range(num_players):
        plan = ContainerPlan(run_duration_s=duration_s)
        if slot in crashed_slots:
            plan.exit_code = 1
        else:
            plan.files_to_write.append(
                result_file(game_name, slot, is_winner=(slot == winner_slot))
            )
        if slot == 0:
            plan.files_at_start.append(ready_marker(game_name))
        plans[container_name(game_name, slot)] = plan
    return plans
