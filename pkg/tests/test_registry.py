import hashlib
import json
import threading

import pytest

from arena.config import BotType, Race
from arena.errors import ChecksumMismatchError, NetworkError, ProtocolError
from arena.fakeregistry import FakeRegistry
from arena.registry import (
    BotMetadata,
    RegistryClient,
    audit_cache,
    purge_cache,
)


@pytest.fixture
def registry():
    with FakeRegistry() as reg:
        yield reg


def _snapshot(cache_dir):
    if not cache_dir.exists():
        return {}
    return {
        str(p.relative_to(cache_dir)): p.read_bytes()
        for p in cache_dir.rglob("*")
        if p.is_file()
    }


def test_list_bots(registry):
    for name in ("Alpha", "Beta", "Gamma"):
        registry.add_bot(name, name.encode())
    bots = RegistryClient(registry.url).list_bots()
    assert [b.name for b in bots] == ["Alpha", "Beta", "Gamma"]
    assert all(len(b.sha256) == 64 for b in bots)


def test_list_bots_empty(registry):
    assert RegistryClient(registry.url).list_bots() == []


def test_list_bots_missing_sha256():
    with pytest.raises(ProtocolError):
        BotMetadata("x", Race.TERRAN, BotType.BWAPI_MODULE, "http://x/x.dll", "nothex")


def test_list_bots_unreachable():
    client = RegistryClient("http://127.0.0.1:1")
    with pytest.raises(NetworkError):
        client.list_bots()


def test_fetch_cold_cache(registry, tmp_path):
    payload = b"the-bot-binary"
    meta = registry.add_bot("Alpha", payload)
    pkg = RegistryClient(registry.url).fetch_bot(meta, tmp_path / "cache")
    assert pkg.local_path.read_bytes() == payload
    assert hashlib.sha256(payload).hexdigest() == meta.sha256
    assert pkg.local_path.parent.name == meta.sha256


def test_fetch_warm_cache_no_network(registry, tmp_path):
    meta = registry.add_bot("Alpha", b"payload")
    client = RegistryClient(registry.url)
    first = client.fetch_bot(meta, tmp_path / "cache")
    registry.reset_counter()
    second = client.fetch_bot(meta, tmp_path / "cache")
    assert registry.request_count == 0
    assert second.local_path.read_bytes() == first.local_path.read_bytes()


def test_fetch_corrupted_payload(registry, tmp_path):
    meta = registry.add_bot("Alpha", b"payload")
    registry.corrupt("Alpha")
    cache = tmp_path / "cache"
    with pytest.raises(ChecksumMismatchError):
        RegistryClient(registry.url).fetch_bot(meta, cache)
    assert _snapshot(cache) == {}
    assert audit_cache(cache) == []


def test_fetch_idempotent_bytes(registry, tmp_path):
    meta = registry.add_bot("Alpha", b"same-bytes")
    client = RegistryClient(registry.url)
    p1 = client.fetch_bot(meta, tmp_path / "cache")
    p2 = client.fetch_bot(meta, tmp_path / "cache")
    assert p1.local_path == p2.local_path
    assert p1.local_path.read_bytes() == b"same-bytes"


def test_concurrent_fetch_single_download(registry, tmp_path):
    meta = registry.add_bot("Alpha", b"x" * 4096)
    client = RegistryClient(registry.url)
    results = []

    def worker():
        results.append(client.fetch_bot(meta, tmp_path / "cache"))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len({r.local_path for r in results}) == 1
    # /bots was never hit; only blob downloads, and at most one per digest
    assert registry.request_count == 1


def test_cache_audit_detects_tampering(registry, tmp_path):
    meta = registry.add_bot("Alpha", b"payload")
    pkg = RegistryClient(registry.url).fetch_bot(meta, tmp_path / "cache")
    pkg.local_path.write_bytes(b"tampered")
    assert audit_cache(tmp_path / "cache") == [pkg.local_path]


def _fake_cached_version(cache_dir, name, payload, fetched_at):
    digest = hashlib.sha256(payload).hexdigest()
    d = cache_dir / digest
    d.mkdir(parents=True)
    (d / f"{name}.dll").write_bytes(payload)
    (d / "meta.json").write_text(
        json.dumps({"name": name, "sha256": digest, "fetchedAt": fetched_at})
    )
    return d


def test_purge_keeps_newest(tmp_path):
    cache = tmp_path / "cache"
    dirs = [
        _fake_cached_version(cache, "Alpha", b"v1", 100),
        _fake_cached_version(cache, "Alpha", b"v2", 200),
        _fake_cached_version(cache, "Alpha", b"v3", 300),
    ]
    assert purge_cache(cache, 1) == 2
    assert not dirs[0].exists() and not dirs[1].exists()
    assert dirs[2].exists()


def test_purge_single_version(tmp_path):
    cache = tmp_path / "cache"
    d = _fake_cached_version(cache, "Alpha", b"v1", 100)
    assert purge_cache(cache, 1) == 0
    assert d.exists()


def test_purge_empty_cache(tmp_path):
    assert purge_cache(tmp_path / "cache", 1) == 0
