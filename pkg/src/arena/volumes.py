"""Host-side directory topology and per-container mount sets.

The host ("master") owns shared directories that are mapped as volumes into
each game container ("slave"): maps and BWAPI data read-only, a shared
map-analysis cache read-write, and one private write directory per player
slot for logs, replays and the result file.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .config import MatchSpec, NAME_RE
from .errors import SlotOutOfRangeError, ValidationError

if TYPE_CHECKING:
    from .registry import BotPackage

# Container-side mount points (fixed contract with the in-container wrapper).
CTR_MAPS = "/app/sc/maps"
CTR_BOTS = "/app/sc/bots"
CTR_BWAPI_DATA = "/app/sc/bwapi-data"
CTR_WRITE = "/app/sc/write"
CTR_BWTA_CACHE = "/app/sc/bwta-cache"


@dataclass(frozen=True)
class Mount:
    host_path: Path
    container_path: str
    read_only: bool


@dataclass(frozen=True)
class VolumeLayout:
    base_dir: Path

    @property
    def maps_dir(self) -> Path:
        return self.base_dir / "maps"

    @property
    def bots_dir(self) -> Path:
        return self.base_dir / "bots"

    @property
    def bwapi_data_dir(self) -> Path:
        return self.base_dir / "bwapi-data"

    @property
    def bwta_cache_dir(self) -> Path:
        return self.base_dir / "bwta-cache"

    def game_dir(self, game_name: str) -> Path:
        return self._inside(self.base_dir / "games" / game_name)

    def write_dir(self, game_name: str, slot: int) -> Path:
        return self._inside(self.game_dir(game_name) / f"write_{slot}")

    def bot_dir(self, bot_name: str) -> Path:
        if not NAME_RE.match(bot_name):
            raise ValidationError("bot_name: illegal character")
        return self._inside(self.bots_dir / bot_name)

    def _inside(self, path: Path) -> Path:
        # Defence in depth: names are regex-checked upstream, but never hand
        # out a path that escapes base_dir.
        base = os.path.abspath(self.base_dir)
        if os.path.commonpath([base, os.path.abspath(path)]) != base:
            raise ValidationError(f"path escapes base_dir: {path}")
        return path


def prepare_layout(base_dir: Path, spec: MatchSpec) -> VolumeLayout:
    """Create the shared dirs plus one write dir per player slot. Idempotent."""
    layout = VolumeLayout(Path(base_dir))
    for d in (
        layout.maps_dir,
        layout.bots_dir,
        layout.bwapi_data_dir,
        layout.bwta_cache_dir,
    ):
        d.mkdir(parents=True, exist_ok=True)
    for p in spec.players:
        layout.write_dir(spec.game_name, p.slot).mkdir(parents=True, exist_ok=True)
    return layout


def mounts_for_slot(layout: VolumeLayout, spec: MatchSpec, slot: int) -> list[Mount]:
    """The five volume mounts a given player slot's container receives."""
    if not 0 <= slot < len(spec.players):
        raise SlotOutOfRangeError(
            f"slot {slot} out of range for {len(spec.players)}-player match"
        )
    return [
        Mount(layout.maps_dir, CTR_MAPS, read_only=True),
        Mount(layout.bots_dir, CTR_BOTS, read_only=True),
        Mount(layout.bwapi_data_dir, CTR_BWAPI_DATA, read_only=True),
        Mount(layout.bwta_cache_dir, CTR_BWTA_CACHE, read_only=False),
        Mount(layout.write_dir(spec.game_name, slot), CTR_WRITE, read_only=False),
    ]


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def install_bot_files(layout: VolumeLayout, pkg: "BotPackage") -> Path:
    """Place a verified bot binary under bots/<name>/; skip when unchanged."""
    dest_dir = layout.bot_dir(pkg.meta.name)
    dest = dest_dir / Path(pkg.local_path).name
    if dest.exists() and _sha256_file(dest) == pkg.meta.sha256:
        return dest
    dest_dir.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dest_dir, prefix=".install-")
    os.close(fd)
    try:
        shutil.copyfile(pkg.local_path, tmp)
        os.replace(tmp, dest)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return dest


def collect_artifacts(layout: VolumeLayout, game_name: str) -> list[tuple[int, Path]]:
    """Every regular file under each slot's write dir, sorted by (slot, path)."""
    game_dir = layout.game_dir(game_name)
    if not game_dir.is_dir():
        return []
    out: list[tuple[int, Path]] = []
    for entry in game_dir.iterdir():
        if not (entry.is_dir() and entry.name.startswith("write_")):
            continue
        try:
            slot = int(entry.name.removeprefix("write_"))
        except ValueError:
            continue
        for f in entry.rglob("*"):
            if f.is_file():
                out.append((slot, f))
    out.sort(key=lambda item: (item[0], str(item[1])))
    return out


def available_maps(layout: VolumeLayout) -> set[str]:
    """Relative paths of every map file under maps/."""
    if not layout.maps_dir.is_dir():
        return set()
    return {
        str(f.relative_to(layout.maps_dir))
        for f in layout.maps_dir.rglob("*")
        if f.is_file()
    }
