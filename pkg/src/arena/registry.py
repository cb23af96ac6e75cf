"""Client for an SSCAIT-style bot registry: list, download, verify, cache.

The cache is content-addressed by sha256, so "is the newest version already
here" is a directory existence check and purging old versions cannot delete
bytes another bot still references under a different digest.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlsplit

import httpx

from .config import BotType, Race
from .errors import ChecksumMismatchError, NetworkError, ProtocolError

SHA256_RE = re.compile(r"^[0-9a-f]{64}$")

_META_FILE = "meta.json"

# One download per digest even under concurrent fetches.
_digest_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
_digest_locks_guard = threading.Lock()


def _lock_for(digest: str) -> threading.Lock:
    with _digest_locks_guard:
        return _digest_locks[digest]


@dataclass(frozen=True)
class BotMetadata:
    name: str
    race: Race
    bot_type: BotType
    binary_url: str
    sha256: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ProtocolError("bot metadata: empty name")
        if not SHA256_RE.match(self.sha256):
            raise ProtocolError(f"bot metadata: bad sha256 for {self.name!r}")

    @property
    def bot_file(self) -> str:
        """Binary filename, taken from the last path segment of binary_url."""
        return Path(urlsplit(self.binary_url).path).name


@dataclass(frozen=True)
class BotPackage:
    meta: BotMetadata
    local_path: Path
    fetched_at: float


def _metadata_from_obj(obj: dict) -> BotMetadata:
    try:
        return BotMetadata(
            name=obj["name"],
            race=Race(obj["race"]),
            bot_type=BotType(obj["botType"]),
            binary_url=obj["binaryUrl"],
            sha256=obj["sha256"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ProtocolError(f"bot metadata: {exc}") from exc


class RegistryClient:
    """HTTP client for the registry protocol (GET /bots, GET <binaryUrl>)."""

    def __init__(self, registry_url: str, http: httpx.Client | None = None):
        self.registry_url = registry_url.rstrip("/")
        self._http = http or httpx.Client(timeout=30.0)

    def list_bots(self) -> list[BotMetadata]:
        try:
            resp = self._http.get(f"{self.registry_url}/bots")
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as exc:
            raise NetworkError(f"registry: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"registry: invalid JSON: {exc}") from exc
        if not isinstance(payload, list):
            raise ProtocolError("registry: expected a JSON array")
        return [_metadata_from_obj(obj) for obj in payload]

    def fetch_bot(self, meta: BotMetadata, cache_dir: Path) -> BotPackage:
        """Download (or reuse) a bot binary, verified against meta.sha256.

        The final path only ever holds verified bytes: downloads go to a temp
        name and are renamed in after the hash checks out.
        """
        cache_dir = Path(cache_dir)
        dest_dir = cache_dir / meta.sha256
        dest = dest_dir / meta.bot_file
        with _lock_for(meta.sha256):
            if dest.is_file():
                return BotPackage(meta, dest, _read_fetched_at(dest_dir))
            cache_dir.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=".fetch-")
            digest = hashlib.sha256()
            try:
                with os.fdopen(fd, "wb") as out:
                    try:
                        with self._http.stream("GET", meta.binary_url) as resp:
                            resp.raise_for_status()
                            for chunk in resp.iter_bytes():
                                digest.update(chunk)
                                out.write(chunk)
                    except httpx.HTTPError as exc:
                        raise NetworkError(f"download: {exc}") from exc
                if digest.hexdigest() != meta.sha256:
                    raise ChecksumMismatchError(
                        f"{meta.name}: got {digest.hexdigest()}, want {meta.sha256}"
                    )
                dest_dir.mkdir(parents=True, exist_ok=True)
                fetched_at = time.time()
                _write_meta(dest_dir, meta, fetched_at)
                os.replace(tmp, dest)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            return BotPackage(meta, dest, fetched_at)


def _write_meta(dest_dir: Path, meta: BotMetadata, fetched_at: float) -> None:
    doc = {
        "name": meta.name,
        "race": meta.race.value,
        "botType": meta.bot_type.value,
        "binaryUrl": meta.binary_url,
        "sha256": meta.sha256,
        "fetchedAt": fetched_at,
    }
    (dest_dir / _META_FILE).write_text(json.dumps(doc, indent=2) + "\n")


def _read_fetched_at(dest_dir: Path) -> float:
    try:
        return float(json.loads((dest_dir / _META_FILE).read_text())["fetchedAt"])
    except (OSError, ValueError, KeyError):
        return 0.0


def purge_cache(cache_dir: Path, keep_latest_n_per_bot: int) -> int:
    """Drop all but the newest n cached versions of each bot. Returns removed count."""
    if keep_latest_n_per_bot < 1:
        raise ValueError("keep_latest_n_per_bot must be ≥1")
    cache_dir = Path(cache_dir)
    if not cache_dir.is_dir():
        return 0
    by_name: dict[str, list[tuple[float, Path]]] = defaultdict(list)
    for entry in cache_dir.iterdir():
        if not (entry.is_dir() and SHA256_RE.match(entry.name)):
            continue
        meta_path = entry / _META_FILE
        try:
            doc = json.loads(meta_path.read_text())
            by_name[doc["name"]].append((float(doc["fetchedAt"]), entry))
        except (OSError, ValueError, KeyError):
            continue
    removed = 0
    for versions in by_name.values():
        versions.sort(key=lambda v: v[0], reverse=True)
        for _, entry in versions[keep_latest_n_per_bot:]:
            for f in sorted(entry.rglob("*"), reverse=True):
                f.unlink() if f.is_file() else f.rmdir()
            entry.rmdir()
            removed += 1
    return removed


def audit_cache(cache_dir: Path) -> list[Path]:
    """Rehash every cached binary; return paths whose content fails its digest."""
    cache_dir = Path(cache_dir)
    bad: list[Path] = []
    if not cache_dir.is_dir():
        return bad
    for entry in cache_dir.iterdir():
        if not (entry.is_dir() and SHA256_RE.match(entry.name)):
            continue
        for f in entry.iterdir():
            if f.name == _META_FILE or not f.is_file():
                continue
            h = hashlib.sha256(f.read_bytes()).hexdigest()
            if h != entry.name:
                bad.append(f)
    return bad
