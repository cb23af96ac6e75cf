"""Per-match state machine: provision, launch host then joiners, monitor, tear down.

Slot 0 hosts the LAN game; it must be ready (marker file in its write dir,
or a few seconds of continuous running as fallback) before the joiners are
created, otherwise they would fail to find the named game.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass, field
from enum import Enum

from . import results as results_mod
from . import volumes
from .config import MatchSpec, detect_bot_type, resolve_image
from .errors import (
    ArenaError,
    HostStartTimeoutError,
    PortExhaustedError,
    ProvisionError,
    RuntimeUnavailableError,
)
from .runtime import (
    Clock,
    ContainerConfig,
    ContainerHandle,
    ContainerRuntime,
    ContainerState,
    LABEL_GAME,
    LABEL_SLOT,
)
from .volumes import VolumeLayout

VNC_CONTAINER_PORT = 5900
VNC_BASE_PORT = 5900
MAX_PORT = 65535

POLL_INTERVAL_S = 1.0
HOST_READY_FALLBACK_S = 5.0
HOST_READY_TIMEOUT_S = 30.0
STOP_GRACE_S = 10


class Phase(str, Enum):
    PENDING = "Pending"
    PROVISIONING = "Provisioning"
    HOST_STARTING = "HostStarting"
    JOINING = "Joining"
    RUNNING = "Running"
    FINISHED = "Finished"
    CRASHED = "Crashed"
    TIMED_OUT = "TimedOut"
    ABORTED = "Aborted"


TERMINAL_PHASES = frozenset(
    {Phase.FINISHED, Phase.CRASHED, Phase.TIMED_OUT, Phase.ABORTED}
)

# Legal forward edges; Aborted is additionally reachable from any non-terminal.
ALLOWED_TRANSITIONS = {
    Phase.PENDING: {Phase.PROVISIONING, Phase.ABORTED},
    Phase.PROVISIONING: {Phase.HOST_STARTING, Phase.ABORTED},
    Phase.HOST_STARTING: {Phase.JOINING, Phase.ABORTED},
    Phase.JOINING: {Phase.RUNNING, Phase.ABORTED},
    Phase.RUNNING: {
        Phase.FINISHED,
        Phase.CRASHED,
        Phase.TIMED_OUT,
        Phase.ABORTED,
    },
    Phase.FINISHED: set(),
    Phase.CRASHED: set(),
    Phase.TIMED_OUT: set(),
    Phase.ABORTED: set(),
}


@dataclass(frozen=True)
class MatchState:
    phase: Phase
    result: results_mod.GameResult | None = None
    crashed_slots: frozenset[int] = frozenset()

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES


@dataclass
class MatchHandle:
    spec: MatchSpec
    layout: VolumeLayout
    network: str = ""
    containers: list[ContainerHandle] = field(default_factory=list)
    vnc_ports: list[int] | None = None
    state: MatchState = MatchState(Phase.PENDING)
    started_at: float = 0.0
    deadline: float = 0.0
    state_trace: list[Phase] = field(default_factory=lambda: [Phase.PENDING])
    warnings: list[str] = field(default_factory=list)

    def _set_phase(self, state: MatchState) -> None:
        if state.phase is not self.state.phase:
            self.state_trace.append(state.phase)
        self.state = state


class PortAllocator:
    """Answers whether a host port is free; real impl probes by binding."""

    def is_free(self, port: int) -> bool:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            try:
                s.bind(("127.0.0.1", port))
            except OSError:
                return False
        return True


class FixedPortAllocator(PortAllocator):
    """Test/sim allocator with an explicit occupied set."""

    def __init__(self, occupied: set[int] = frozenset()):
        self.occupied = set(occupied)

    def is_free(self, port: int) -> bool:
        return port not in self.occupied


def allocate_vnc_ports(
    n: int, base: int = VNC_BASE_PORT, allocator: PortAllocator | None = None
) -> list[int]:
    """The n lowest free host ports at or above base, ascending."""
    if n < 1:
        raise ValueError("n must be ≥1")
    allocator = allocator or PortAllocator()
    ports = []
    for port in range(base, MAX_PORT + 1):
        if allocator.is_free(port):
            ports.append(port)
            if len(ports) == n:
                return ports
    raise PortExhaustedError(f"no {n} free ports ≥{base}")


def network_name(game_name: str) -> str:
    return f"arena_{game_name}"


def container_name(game_name: str, slot: int) -> str:
    return f"arena_{game_name}_{slot}"


def _container_config(
    spec: MatchSpec,
    layout: VolumeLayout,
    slot: int,
    vnc_ports: list[int] | None,
) -> ContainerConfig:
    player = spec.players[slot]
    bot_type = detect_bot_type(player.bot_file)
    env = (
        f"GAME_NAME={spec.game_name}",
        f"PLAYER_SLOT={slot}",
        f"NUM_PLAYERS={len(spec.players)}",
        f"BOT_NAME={player.bot_name}",
        f"BOT_FILE={volumes.CTR_BOTS}/{player.bot_name}/{player.bot_file}",
        f"BOT_TYPE={bot_type.value}",
        f"MAP={volumes.CTR_MAPS}/{spec.map}",
        f"HEADFUL={1 if spec.headful else 0}",
        f"LAN_HOST={container_name(spec.game_name, 0) if slot else ''}",
        f"TIMEOUT_S={spec.timeout_s}",
    )
    port_bindings = ()
    if spec.headful:
        assert vnc_ports is not None
        port_bindings = ((VNC_CONTAINER_PORT, vnc_ports[slot]),)
    return ContainerConfig(
        name=container_name(spec.game_name, slot),
        image=resolve_image(bot_type, spec.headful),
        env=env,
        mounts=tuple(volumes.mounts_for_slot(layout, spec, slot)),
        network=network_name(spec.game_name),
        cpus=spec.limits.cpus,
        memory_mib=spec.limits.memory_mib,
        port_bindings=port_bindings,
        labels={LABEL_GAME: spec.game_name, LABEL_SLOT: str(slot)},
    )


def _host_ready(handle: MatchHandle) -> bool:
    marker = handle.layout.write_dir(handle.spec.game_name, 0) / (
        f"{handle.spec.game_name}_host_ready"
    )
    return marker.is_file()


def launch_match(
    spec: MatchSpec,
    runtime: ContainerRuntime,
    layout: VolumeLayout,
    clock: Clock,
    port_allocator: PortAllocator | None = None,
) -> MatchHandle:
    """Bring a match to the Running state, host container first."""
    handle = MatchHandle(spec=spec, layout=layout)
    handle._set_phase(MatchState(Phase.PROVISIONING))
    try:
        volumes.prepare_layout(layout.base_dir, spec)
    except OSError as exc:
        handle._set_phase(MatchState(Phase.ABORTED))
        raise ProvisionError(f"volume preparation failed: {exc}") from exc

    if spec.headful:
        handle.vnc_ports = allocate_vnc_ports(
            len(spec.players), VNC_BASE_PORT, port_allocator
        )

    try:
        handle.network = runtime.ensure_network(network_name(spec.game_name))
    except ArenaError:
        handle._set_phase(MatchState(Phase.ABORTED))
        raise

    handle._set_phase(MatchState(Phase.HOST_STARTING))
    try:
        host = runtime.create(_container_config(spec, layout, 0, handle.vnc_ports))
        handle.containers.append(host)
        runtime.start(host)
    except ArenaError as exc:
        teardown(handle, runtime)
        handle._set_phase(MatchState(Phase.ABORTED))
        raise HostStartTimeoutError(f"host failed to start: {exc}") from exc

    ready_deadline = clock.now() + HOST_READY_TIMEOUT_S
    running_since: float | None = None
    while not _host_ready(handle):
        status = runtime.inspect(host)
        if status.state is ContainerState.RUNNING:
            running_since = running_since or clock.now()
            if clock.now() - running_since >= HOST_READY_FALLBACK_S:
                break
        elif status.state is ContainerState.EXITED:
            teardown(handle, runtime)
            handle._set_phase(MatchState(Phase.ABORTED))
            raise HostStartTimeoutError(
                f"host exited with code {status.exit_code} before readiness"
            )
        if clock.now() >= ready_deadline:
            teardown(handle, runtime)
            handle._set_phase(MatchState(Phase.ABORTED))
            raise HostStartTimeoutError(
                f"host not ready within {HOST_READY_TIMEOUT_S:.0f}s"
            )
        clock.sleep(POLL_INTERVAL_S)

    handle._set_phase(MatchState(Phase.JOINING))
    for slot in range(1, len(spec.players)):
        try:
            joiner = runtime.create(
                _container_config(spec, layout, slot, handle.vnc_ports)
            )
            handle.containers.append(joiner)
            runtime.start(joiner)
        except ArenaError as exc:
            teardown(handle, runtime)
            handle._set_phase(MatchState(Phase.ABORTED))
            raise RuntimeUnavailableError(
                f"joiner slot {slot} failed: {exc}"
            ) from exc

    handle.started_at = clock.now()
    handle.deadline = handle.started_at + spec.timeout_s
    handle._set_phase(MatchState(Phase.RUNNING))
    return handle


def poll(handle: MatchHandle, runtime: ContainerRuntime, clock: Clock) -> MatchState:
    """Recompute the match state from result files, exit codes and the clock."""
    if handle.state.phase is not Phase.RUNNING:
        return handle.state
    spec = handle.spec
    n = len(spec.players)

    per_slot: dict[int, results_mod.PlayerResult | None] = {}
    crashed: set[int] = set()
    for slot in range(n):
        path = handle.layout.write_dir(spec.game_name, slot) / (
            f"{spec.game_name}_result.json"
        )
        if path.is_file():
            try:
                per_slot[slot] = results_mod.parse_result_file(path.read_text())
                continue
            except (results_mod.ProtocolError, OSError) as exc:
                handle.warnings.append(f"slot {slot}: bad result file: {exc}")
        try:
            status = runtime.inspect(handle.containers[slot])
        except ArenaError as exc:
            handle.warnings.append(f"slot {slot}: inspect failed: {exc}")
            return handle.state
        if status.state is ContainerState.EXITED and status.exit_code != 0:
            crashed.add(slot)

    # A fully resolved board decides the game even if the deadline has also
    # passed; the timeout only fires while slots are still unaccounted for.
    resolved = set(per_slot) | crashed
    timed_out = len(resolved) < n and clock.now() >= handle.deadline
    if len(resolved) < n and not timed_out:
        return handle.state

    wall = clock.now() - handle.started_at
    result = results_mod.aggregate(
        spec, per_slot, crashed, timed_out=timed_out, wall_seconds=wall
    )
    if result.outcome is results_mod.Outcome.TIMED_OUT:
        handle._set_phase(MatchState(Phase.TIMED_OUT, result=result))
    elif crashed:
        handle._set_phase(
            MatchState(Phase.CRASHED, result=result, crashed_slots=frozenset(crashed))
        )
    else:
        handle._set_phase(MatchState(Phase.FINISHED, result=result))
    return handle.state


def await_completion(
    handle: MatchHandle, runtime: ContainerRuntime, clock: Clock
) -> MatchState:
    """Poll to a terminal state, then stop and remove everything."""
    while not poll(handle, runtime, clock).terminal:
        clock.sleep(POLL_INTERVAL_S)
    teardown(handle, runtime)
    return handle.state


def abort(handle: MatchHandle, runtime: ContainerRuntime) -> None:
    """Force the match to Aborted (unless already terminal) and tear down."""
    if not handle.state.terminal:
        handle._set_phase(MatchState(Phase.ABORTED))
    teardown(handle, runtime)


def teardown(handle: MatchHandle, runtime: ContainerRuntime) -> None:
    """Best-effort stop+remove of all match containers and the match network."""
    for ctr in handle.containers:
        try:
            runtime.stop(ctr, STOP_GRACE_S)
        except ArenaError as exc:
            handle.warnings.append(f"stop {ctr.name}: {exc}")
        try:
            runtime.remove(ctr)
        except ArenaError as exc:
            handle.warnings.append(f"remove {ctr.name}: {exc}")
    try:
        runtime.remove_network(network_name(handle.spec.game_name))
    except ArenaError as exc:
        handle.warnings.append(f"remove network: {exc}")
