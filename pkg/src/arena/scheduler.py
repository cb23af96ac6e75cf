"""Mass deployment: expand bot/map combinations and run them under a budget.

A single control loop drives many match lifecycles concurrently against the
shared runtime.  Admission is FIFO over plan order, skipping matches whose
CPU cost does not fit the remaining budget in favor of the next one that
does, bounded additionally by max_concurrent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import lifecycle, volumes
from .config import (
    MatchSpec,
    PlayerSlot,
    ResourceLimits,
    _spec_from_mapping,
    validate_spec,
)
from .errors import ArenaError, SpecSyntaxError, ValidationError
from .registry import BotMetadata
from .results import GameResult, Outcome
from .runtime import Clock, ContainerRuntime, WallClock
from .simruntime import SimRuntime


@dataclass(frozen=True)
class MatchTemplate:
    headful: bool = False
    timeout_s: int = 3600
    limits: ResourceLimits = field(default_factory=ResourceLimits)


@dataclass
class DeploymentPlan:
    matches: list[MatchSpec]
    max_concurrent: int = 4
    cpu_budget: float = 8.0
    retry_crashed: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.max_concurrent < 1:
            raise ValidationError("max_concurrent: must be positive")
        if self.cpu_budget <= 0:
            raise ValidationError("cpu_budget: must be positive")
        if self.retry_crashed < 0:
            raise ValidationError("retry_crashed: must be ≥0")
        names = set()
        for spec in self.matches:
            validate_spec(spec)
            if spec.game_name in names:
                raise ValidationError(f"game_name: duplicate {spec.game_name!r}")
            names.add(spec.game_name)
            if spec.cost() > self.cpu_budget:
                raise ValidationError(
                    f"{spec.game_name}: cost {spec.cost()} exceeds cpu_budget"
                )


@dataclass
class MatchOutcome:
    game_name: str  # planned name, without retry suffixes
    attempts: int
    phase: lifecycle.Phase
    result: GameResult | None


@dataclass
class DeploymentReport:
    entries: list[MatchOutcome]
    wall_seconds: float
    seed: int

    def results(self) -> list[GameResult]:
        return [e.result for e in self.entries if e.result is not None]

    def win_matrix(self) -> dict[tuple[str, str], list[int]]:
        """(bot_a, bot_b) sorted pair -> [wins_a, wins_b, other], 1v1 matches only."""
        matrix: dict[tuple[str, str], list[int]] = {}
        for entry in self.entries:
            r = entry.result
            if r is None or len(r.bot_names) != 2:
                continue
            a, b = sorted(r.bot_names)
            cell = matrix.setdefault((a, b), [0, 0, 0])
            if r.outcome is Outcome.DECIDED:
                cell[0 if r.winner_bot == a else 1] += 1
            else:
                cell[2] += 1
        return matrix


def plan_round_robin(
    bots: list[BotMetadata],
    maps: list[str],
    repeats: int,
    template: MatchTemplate = MatchTemplate(),
) -> DeploymentPlan:
    """One 1v1 match per unordered bot pair x map x repeat, in deterministic order."""
    if len(bots) < 2:
        raise ValidationError("bots: need ≥2 for a round robin")
    if not maps:
        raise ValidationError("maps: need ≥1")
    if repeats < 1:
        raise ValidationError("repeats: must be ≥1")
    matches = []
    for i in range(len(bots)):
        for j in range(i + 1, len(bots)):
            for m, map_path in enumerate(maps):
                for r in range(repeats):
                    spec = MatchSpec(
                        game_name=f"rr_{i}_{j}_{m}_{r}",
                        map=map_path,
                        players=(
                            PlayerSlot(0, bots[i].name, bots[i].race, _bot_file(bots[i])),
                            PlayerSlot(1, bots[j].name, bots[j].race, _bot_file(bots[j])),
                        ),
                        headful=template.headful,
                        timeout_s=template.timeout_s,
                        limits=template.limits,
                    )
                    matches.append(spec)
    plan = DeploymentPlan(matches=matches)
    plan.validate()
    return plan


def _bot_file(meta: BotMetadata) -> str:
    return meta.bot_file or f"{meta.name}.{meta.bot_type.value}"


@dataclass
class _Pending:
    spec: MatchSpec
    planned_name: str
    attempts: int = 0


@dataclass
class _Active:
    handle: lifecycle.MatchHandle
    pending: _Pending
    cost: float


def run_plan(
    plan: DeploymentPlan,
    runtime: ContainerRuntime,
    base_dir: Path,
    clock: Clock | None = None,
    port_allocator: lifecycle.PortAllocator | None = None,
) -> DeploymentReport:
    """Execute every planned match; crashes are retried, timeouts are not."""
    plan.validate()
    if clock is None:
        clock = runtime.clock() if isinstance(runtime, SimRuntime) else WallClock()
    start = clock.now()
    pending = [_Pending(spec, spec.game_name) for spec in plan.matches]
    active: list[_Active] = []
    finals: dict[str, MatchOutcome] = {}
    budget_used = 0.0

    while pending or active:
        # Admit in FIFO order whatever fits the budget and the concurrency cap.
        still_pending = []
        for item in pending:
            cost = item.spec.cost()
            if len(active) >= plan.max_concurrent or budget_used + cost > plan.cpu_budget:
                still_pending.append(item)
                continue
            budget_used += cost
            item.attempts += 1
            layout = volumes.VolumeLayout(Path(base_dir))
            try:
                handle = lifecycle.launch_match(
                    item.spec, runtime, layout, clock, port_allocator
                )
            except ArenaError:
                budget_used -= cost
                finals[item.planned_name] = MatchOutcome(
                    item.planned_name, item.attempts, lifecycle.Phase.ABORTED, None
                )
                continue
            active.append(_Active(handle, item, cost))
        pending = still_pending

        finished = []
        for entry in active:
            state = lifecycle.poll(entry.handle, runtime, clock)
            if state.terminal:
                finished.append(entry)
        for entry in finished:
            active.remove(entry)
            lifecycle.teardown(entry.handle, runtime)
            budget_used -= entry.cost
            item = entry.pending
            state = entry.handle.state
            if (
                state.phase is lifecycle.Phase.CRASHED
                and item.attempts <= plan.retry_crashed
            ):
                retry_spec = dataclasses.replace(
                    item.spec,
                    game_name=f"{item.planned_name}_retry{item.attempts}",
                )
                pending.append(_Pending(retry_spec, item.planned_name, item.attempts))
            else:
                finals[item.planned_name] = MatchOutcome(
                    item.planned_name, item.attempts, state.phase, state.result
                )

        if pending or active:
            clock.sleep(lifecycle.POLL_INTERVAL_S)

    entries = [finals[spec.game_name] for spec in plan.matches]
    return DeploymentReport(
        entries=entries, wall_seconds=clock.now() - start, seed=plan.seed
    )


def summarize(report: DeploymentReport) -> str:
    """Win-matrix text table, bots sorted by name, cells wins-losses-other."""
    matrix = report.win_matrix()
    bots = sorted({name for pair in matrix for name in pair})
    width = max([len(b) for b in bots], default=0) + 2
    width = max(width, 8)
    lines = ["".join(["bot".ljust(width)] + [b.ljust(width) for b in bots])]
    for row in bots:
        cells = [row.ljust(width)]
        for col in bots:
            if row == col:
                cells.append("-".ljust(width))
                continue
            a, b = sorted((row, col))
            wins_a, wins_b, other = matrix.get((a, b), (0, 0, 0))
            wins = wins_a if row == a else wins_b
            losses = wins_b if row == a else wins_a
            cells.append(f"{wins}-{losses}-{other}".ljust(width))
        lines.append("".join(cells).rstrip())
    lines[0] = lines[0].rstrip()
    return "\n".join(lines) + "\n"


def parse_plan_file(text: str) -> DeploymentPlan:
    """Parse a TOML deployment plan: scheduling keys plus a [[matches]] array."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecSyntaxError(str(exc)) from exc
    raw_matches = doc.get("matches")
    if not isinstance(raw_matches, list) or not raw_matches:
        raise ValidationError("matches: need at least one match table")
    plan = DeploymentPlan(
        matches=[_spec_from_mapping(m) for m in raw_matches],
        max_concurrent=int(doc.get("max_concurrent", 4)),
        cpu_budget=float(doc.get("cpu_budget", 8.0)),
        retry_crashed=int(doc.get("retry_crashed", 0)),
        seed=int(doc.get("seed", 0)),
    )
    plan.validate()
    return plan
