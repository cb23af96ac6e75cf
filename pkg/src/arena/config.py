"""Match specifications: parsing, validation, bot classification, image resolution.

Spec files are TOML, one match per file.  See README for the schema.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import (
    MapNotFoundError,
    SpecSyntaxError,
    UnsupportedBotTypeError,
    ValidationError,
)

NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

DEFAULT_TIMEOUT_S = 3600
DEFAULT_CPUS = 1.0
DEFAULT_MEMORY_MIB = 2048

MIN_PLAYERS = 2
MAX_PLAYERS = 8


class Race(str, Enum):
    TERRAN = "Terran"
    PROTOSS = "Protoss"
    ZERG = "Zerg"
    RANDOM = "Random"


class BotType(str, Enum):
    BWAPI_MODULE = "dll"
    NATIVE_CLIENT = "exe"
    JAVA_CLIENT = "jar"


_EXT_TO_TYPE = {t.value: t for t in BotType}


@dataclass(frozen=True)
class ImageRef:
    name: str
    tag: str = "latest"

    def __str__(self) -> str:
        return f"{self.name}:{self.tag}"


@dataclass(frozen=True)
class ResourceLimits:
    cpus: float = DEFAULT_CPUS
    memory_mib: int = DEFAULT_MEMORY_MIB


@dataclass(frozen=True)
class PlayerSlot:
    slot: int
    bot_name: str
    race: Race
    bot_file: str


@dataclass(frozen=True)
class MatchSpec:
    game_name: str
    map: str
    players: tuple[PlayerSlot, ...]
    headful: bool = False
    timeout_s: int = DEFAULT_TIMEOUT_S
    limits: ResourceLimits = field(default_factory=ResourceLimits)

    def cost(self) -> float:
        """Total CPU cost of the match: one limits.cpus share per player."""
        return self.limits.cpus * len(self.players)


def detect_bot_type(bot_file: str) -> BotType:
    """Classify a bot binary by its (case-insensitive) file extension."""
    if not bot_file:
        raise UnsupportedBotTypeError("empty bot filename")
    _, _, ext = bot_file.rpartition(".")
    bot_type = _EXT_TO_TYPE.get(ext.lower())
    if bot_type is None:
        raise UnsupportedBotTypeError(f"unsupported bot file extension: {bot_file!r}")
    return bot_type


def resolve_image(
    bot_type: BotType,
    headful: bool,
    game_image: ImageRef = ImageRef("starcraft", "game"),
    java_image: ImageRef = ImageRef("starcraft", "java"),
) -> ImageRef:
    """Pick the layered image a bot needs.

    Java clients need the image layer with a JRE; everything else runs on the
    base game image.  GUI on/off is an env toggle, not a separate image, so
    ``headful`` never changes the result.
    """
    del headful
    if bot_type is BotType.JAVA_CLIENT:
        return java_image
    return game_image


def validate_spec(spec: MatchSpec) -> None:
    """Raise ValidationError (naming the offending field) on any invariant violation."""
    if not NAME_RE.match(spec.game_name):
        raise ValidationError("game_name: illegal character")
    n = len(spec.players)
    if n < MIN_PLAYERS:
        raise ValidationError("players: need ≥2")
    if n > MAX_PLAYERS:
        raise ValidationError("players: need ≤8")
    if [p.slot for p in spec.players] != list(range(n)):
        raise ValidationError("players: slot indices must be contiguous 0..n-1")
    for p in spec.players:
        if not NAME_RE.match(p.bot_name):
            raise ValidationError(f"players[{p.slot}].bot_name: illegal character")
        try:
            detect_bot_type(p.bot_file)
        except UnsupportedBotTypeError:
            raise ValidationError(
                f"players[{p.slot}].bot_file: unsupported extension"
            ) from None
    if spec.timeout_s <= 0:
        raise ValidationError("timeout_s: must be positive")
    if spec.limits.cpus <= 0:
        raise ValidationError("limits.cpus: must be positive")
    if spec.limits.memory_mib < 256:
        raise ValidationError("limits.memory_mib: must be ≥256")


def _spec_from_mapping(doc: dict) -> MatchSpec:
    try:
        game_name = doc["game_name"]
        map_path = doc["map"]
        raw_players = doc["players"]
    except KeyError as exc:
        raise ValidationError(f"{exc.args[0]}: missing") from None
    if not isinstance(raw_players, list):
        raise ValidationError("players: must be an array of tables")
    players = []
    for i, entry in enumerate(raw_players):
        try:
            race = Race(entry["race"])
        except ValueError:
            raise ValidationError(f"players[{i}].race: unknown race") from None
        except KeyError:
            raise ValidationError(f"players[{i}].race: missing") from None
        try:
            players.append(
                PlayerSlot(
                    slot=int(entry.get("slot", i)),
                    bot_name=entry["bot_name"],
                    race=race,
                    bot_file=entry["bot_file"],
                )
            )
        except KeyError as exc:
            raise ValidationError(f"players[{i}].{exc.args[0]}: missing") from None
    limits_doc = doc.get("limits", {})
    spec = MatchSpec(
        game_name=game_name,
        map=map_path,
        players=tuple(players),
        headful=bool(doc.get("headful", False)),
        timeout_s=int(doc.get("timeout_s", DEFAULT_TIMEOUT_S)),
        limits=ResourceLimits(
            cpus=float(limits_doc.get("cpus", DEFAULT_CPUS)),
            memory_mib=int(limits_doc.get("memory_mib", DEFAULT_MEMORY_MIB)),
        ),
    )
    validate_spec(spec)
    return spec


def parse_match_spec(text: str) -> MatchSpec:
    """Parse one TOML match spec document into a validated MatchSpec."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecSyntaxError(str(exc)) from exc
    return _spec_from_mapping(doc)


def _toml_str(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def render_match_spec(spec: MatchSpec) -> str:
    """Render a MatchSpec back to TOML; parse(render(spec)) == spec."""
    lines = [
        f"game_name = {_toml_str(spec.game_name)}",
        f"map = {_toml_str(spec.map)}",
        f"headful = {'true' if spec.headful else 'false'}",
        f"timeout_s = {spec.timeout_s}",
        "",
        "[limits]",
        f"cpus = {float(spec.limits.cpus)!r}",
        f"memory_mib = {spec.limits.memory_mib}",
    ]
    for p in spec.players:
        lines += [
            "",
            "[[players]]",
            f"slot = {p.slot}",
            f"bot_name = {_toml_str(p.bot_name)}",
            f"race = {_toml_str(p.race.value)}",
            f"bot_file = {_toml_str(p.bot_file)}",
        ]
    return "\n".join(lines) + "\n"


def validate_cross(spec: MatchSpec, available_maps: set[str]) -> None:
    """Check a spec against the deployed volume contents."""
    if spec.map not in available_maps:
        raise MapNotFoundError(f"map not found: {spec.map!r}")
    for p in spec.players:
        detect_bot_type(p.bot_file)
