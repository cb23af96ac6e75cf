"""Command-line entry point wiring all modules together."""

from __future__ import annotations

import json as jsonlib
import logging
import sys
import time
from pathlib import Path

import click

from . import lifecycle, scheduler, volumes
from .config import (
    MatchSpec,
    PlayerSlot,
    Race,
    ResourceLimits,
    parse_match_spec,
    validate_cross,
    validate_spec,
)
from .docker import DockerRuntime
from .errors import ArenaError
from .registry import RegistryClient
from .runtime import LABEL_GAME, WallClock
from .simruntime import SimRuntime

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CRASHED = 2
EXIT_TIMED_OUT = 3

log = logging.getLogger("arena")


class App:
    def __init__(self, base_dir: Path, runtime_kind: str, registry_url: str, as_json: bool):
        self.base_dir = base_dir
        self.runtime_kind = runtime_kind
        self.registry_url = registry_url
        self.as_json = as_json
        self._runtime = None

    @property
    def runtime(self):
        if self._runtime is None:
            if self.runtime_kind == "sim":
                self._runtime = SimRuntime(auto_results=True)
            else:
                self._runtime = DockerRuntime()
        return self._runtime

    def clock(self):
        if isinstance(self.runtime, SimRuntime):
            return self.runtime.clock()
        return WallClock()

    @property
    def layout(self) -> volumes.VolumeLayout:
        return volumes.VolumeLayout(self.base_dir)

    def registry(self) -> RegistryClient:
        if not self.registry_url:
            raise ArenaError("no registry configured (set ARENA_REGISTRY_URL)")
        return RegistryClient(self.registry_url)


@click.group()
@click.option(
    "--base-dir",
    envvar="ARENA_BASE_DIR",
    default=str(Path.home() / ".arena"),
    show_default=True,
    help="Host directory holding maps, bots and per-match write dirs.",
)
@click.option(
    "--runtime",
    "runtime_kind",
    type=click.Choice(["docker", "sim"]),
    default="docker",
    show_default=True,
    help="Container runtime: a real daemon or the built-in simulation.",
)
@click.option("--registry-url", envvar="ARENA_REGISTRY_URL", default="")
@click.option(
    "--log-level",
    type=click.Choice(["debug", "info", "warning", "error"]),
    default="warning",
)
@click.option("--json", "as_json", is_flag=True, help="Machine-parsable output.")
@click.pass_context
def main(ctx, base_dir, runtime_kind, registry_url, log_level, as_json):
    """Run AI-bot game matches in isolated containers."""
    logging.basicConfig(level=log_level.upper())
    if ctx.obj is None:  # tests may inject a pre-built App
        base = Path(base_dir)
        base.mkdir(parents=True, exist_ok=True)
        ctx.obj = App(base, runtime_kind, registry_url, as_json)


def _find_installed_bot(app: App, name: str) -> str | None:
    bot_dir = app.layout.bots_dir / name
    if not bot_dir.is_dir():
        return None
    for f in sorted(bot_dir.iterdir()):
        if f.suffix.lower().lstrip(".") in ("dll", "exe", "jar"):
            return f.name
    return None


def _ensure_bot(app: App, name: str) -> tuple[str, Race]:
    """Return (bot_file, race), fetching from the registry when not installed."""
    installed = _find_installed_bot(app, name)
    if installed is not None:
        return installed, Race.RANDOM
    registry = app.registry()
    for meta in registry.list_bots():
        if meta.name == name:
            pkg = registry.fetch_bot(meta, app.base_dir / "cache")
            volumes.install_bot_files(app.layout, pkg)
            return pkg.local_path.name, meta.race
    raise ArenaError(f"bot not installed and not in registry: {name!r}")


@main.command()
@click.argument("spec_file", required=False, type=click.Path(exists=True))
@click.option("--bot", "bots", multiple=True, help="Bot name (repeat for each player).")
@click.option("--map", "map_path", default=None)
@click.option("--name", "game_name", default=None, help="Match name (default: generated).")
@click.option("--headful", is_flag=True)
@click.option("--timeout", type=int, default=3600, show_default=True)
@click.option("--cpus", type=float, default=1.0, show_default=True)
@click.option("--memory", type=int, default=2048, show_default=True)
@click.pass_obj
def play(app: App, spec_file, bots, map_path, game_name, headful, timeout, cpus, memory):
    """Run one match and print its result."""
    try:
        if spec_file:
            spec = parse_match_spec(Path(spec_file).read_text())
        else:
            if len(bots) < 2:
                click.echo("error: need at least two --bot players", err=True)
                sys.exit(EXIT_ERROR)
            if not map_path:
                click.echo("error: --map is required", err=True)
                sys.exit(EXIT_ERROR)
            players = []
            for slot, bot_name in enumerate(bots):
                bot_file, race = _ensure_bot(app, bot_name)
                players.append(PlayerSlot(slot, bot_name, race, bot_file))
            spec = MatchSpec(
                game_name=game_name or f"play_{int(time.time())}",
                map=map_path,
                players=tuple(players),
                headful=headful,
                timeout_s=timeout,
                limits=ResourceLimits(cpus=cpus, memory_mib=memory),
            )
            validate_spec(spec)

        layout = volumes.prepare_layout(app.base_dir, spec)
        validate_cross(spec, volumes.available_maps(layout))
        clock = app.clock()
        handle = lifecycle.launch_match(spec, app.runtime, layout, clock)
        if handle.vnc_ports:
            for slot, port in enumerate(handle.vnc_ports):
                click.echo(f"VNC: slot {slot} -> localhost:{port}")
        state = lifecycle.await_completion(handle, app.runtime, clock)
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)

    result = state.result
    if app.as_json:
        click.echo(jsonlib.dumps(result.to_dict() if result else {"phase": state.phase.value}))
    elif result is not None:
        winner = result.winner_bot or "-"
        click.echo(f"{spec.game_name}: {result.outcome.value}, winner: {winner}")
    else:
        click.echo(f"{spec.game_name}: {state.phase.value}")
    sys.exit(
        {
            lifecycle.Phase.FINISHED: EXIT_OK,
            lifecycle.Phase.CRASHED: EXIT_CRASHED,
            lifecycle.Phase.TIMED_OUT: EXIT_TIMED_OUT,
        }.get(state.phase, EXIT_ERROR)
    )


@main.command()
@click.argument("plan_file", type=click.Path(exists=True))
@click.pass_obj
def deploy(app: App, plan_file):
    """Run a deployment plan and write report files."""
    try:
        plan = scheduler.parse_plan_file(Path(plan_file).read_text())
        report = scheduler.run_plan(plan, app.runtime, app.base_dir, app.clock())
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    reports_dir = app.base_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(plan_file).stem
    from .results import write_report

    write_report(report.results(), "json", reports_dir / f"{stem}.json")
    write_report(report.results(), "csv", reports_dir / f"{stem}.csv")
    if app.as_json:
        click.echo(
            jsonlib.dumps(
                {
                    "matches": len(report.entries),
                    "wall_seconds": report.wall_seconds,
                    "report_dir": str(reports_dir),
                }
            )
        )
    else:
        click.echo(scheduler.summarize(report), nl=False)
        click.echo(f"reports written to {reports_dir}")
    sys.exit(EXIT_OK)


@main.group()
def bots():
    """Registry operations."""


@bots.command("list")
@click.pass_obj
def bots_list(app: App):
    """List bots available in the registry."""
    try:
        entries = app.registry().list_bots()
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if app.as_json:
        click.echo(
            jsonlib.dumps(
                [
                    {"name": m.name, "race": m.race.value, "botType": m.bot_type.value}
                    for m in entries
                ]
            )
        )
    else:
        for m in entries:
            click.echo(f"{m.name}\t{m.race.value}\t{m.bot_type.value}")
    sys.exit(EXIT_OK)


@bots.command("fetch")
@click.argument("name")
@click.pass_obj
def bots_fetch(app: App, name):
    """Download a bot, verify its checksum, and install it."""
    try:
        registry = app.registry()
        meta = next((m for m in registry.list_bots() if m.name == name), None)
        if meta is None:
            raise ArenaError(f"no such bot in registry: {name!r}")
        pkg = registry.fetch_bot(meta, app.base_dir / "cache")
        app.layout.bots_dir.mkdir(parents=True, exist_ok=True)
        installed = volumes.install_bot_files(app.layout, pkg)
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"installed {name} -> {installed}")
    sys.exit(EXIT_OK)


@main.command()
@click.pass_obj
def status(app: App):
    """List match containers known to the runtime."""
    try:
        handles = app.runtime.list_by_label(LABEL_GAME)
        rows = [
            {"name": h.name, "state": app.runtime.inspect(h).state.value}
            for h in handles
        ]
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if app.as_json:
        click.echo(jsonlib.dumps(rows))
    else:
        for row in rows:
            click.echo(f"{row['name']}\t{row['state']}")
    sys.exit(EXIT_OK)


@main.command()
@click.pass_obj
def clean(app: App):
    """Stop and remove all match containers and prune match networks. Idempotent."""
    try:
        handles = app.runtime.list_by_label(LABEL_GAME)
        games = set()
        for h in handles:
            # container names follow arena_<game>_<slot>
            parts = h.name.rsplit("_", 1)
            if len(parts) == 2 and h.name.startswith("arena_"):
                games.add(parts[0].removeprefix("arena_"))
            try:
                app.runtime.stop(h, lifecycle.STOP_GRACE_S)
                app.runtime.remove(h)
            except ArenaError as exc:
                log.warning("clean %s: %s", h.name, exc)
        for game in sorted(games):
            app.runtime.remove_network(lifecycle.network_name(game))
    except ArenaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if app.as_json:
        click.echo(jsonlib.dumps({"removed": len(handles)}))
    else:
        click.echo(f"{len(handles)} removed")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
