import os
import random
import string
import time
from pathlib import Path

import pytest

from arena.errors import SlotOutOfRangeError, ValidationError
from arena.registry import BotMetadata, BotPackage
from arena.volumes import (
    CTR_BWAPI_DATA,
    CTR_BWTA_CACHE,
    CTR_BOTS,
    CTR_MAPS,
    CTR_WRITE,
    VolumeLayout,
    available_maps,
    collect_artifacts,
    install_bot_files,
    mounts_for_slot,
    prepare_layout,
)
from arena.config import Race, BotType
from conftest import make_spec

import hashlib


def _pkg(tmp_path, name="botA", content=b"binary-bytes-v1"):
    src = tmp_path / f"{name}.dll"
    src.write_bytes(content)
    digest = hashlib.sha256(content).hexdigest()
    meta = BotMetadata(name, Race.TERRAN, BotType.BWAPI_MODULE, f"http://x/{name}.dll", digest)
    return BotPackage(meta, src, time.time())


def test_prepare_creates_shared_and_write_dirs(tmp_path, spec):
    layout = prepare_layout(tmp_path / "arena", spec)
    for d in (layout.maps_dir, layout.bots_dir, layout.bwapi_data_dir, layout.bwta_cache_dir):
        assert d.is_dir()
    for slot in range(2):
        assert layout.write_dir(spec.game_name, slot).is_dir()


def test_prepare_is_idempotent(tmp_path, spec):
    base = tmp_path / "arena"
    layout1 = prepare_layout(base, spec)
    before = sorted(p for p in base.rglob("*"))
    layout2 = prepare_layout(base, spec)
    assert layout1 == layout2
    assert sorted(p for p in base.rglob("*")) == before


def test_prepare_unwritable_base(tmp_path, spec):
    if os.geteuid() == 0:
        pytest.skip("root ignores directory permissions")
    base = tmp_path / "ro"
    base.mkdir()
    base.chmod(0o500)
    try:
        with pytest.raises(OSError):
            prepare_layout(base, spec)
    finally:
        base.chmod(0o700)


def test_mounts_contract(layout, spec):
    mounts = mounts_for_slot(layout, spec, 0)
    assert len(mounts) == 5
    ro = {m.container_path for m in mounts if m.read_only}
    assert ro == {CTR_MAPS, CTR_BOTS, CTR_BWAPI_DATA}
    assert {m.container_path for m in mounts} == {
        CTR_MAPS, CTR_BOTS, CTR_BWAPI_DATA, CTR_BWTA_CACHE, CTR_WRITE,
    }


def test_bwta_cache_shared_write_dirs_private(layout, spec):
    by_slot = [
        {m.container_path: m.host_path for m in mounts_for_slot(layout, spec, s)}
        for s in range(2)
    ]
    assert by_slot[0][CTR_BWTA_CACHE] == by_slot[1][CTR_BWTA_CACHE]
    assert by_slot[0][CTR_WRITE] != by_slot[1][CTR_WRITE]


def test_slot_out_of_range(layout):
    spec = make_spec(num_players=4)
    with pytest.raises(SlotOutOfRangeError):
        mounts_for_slot(layout, spec, 9)


def test_path_safety_randomized(tmp_path):
    # Names pass the upstream identifier regex; no generated path may escape.
    rng = random.Random(7)
    alphabet = string.ascii_letters + string.digits + "_-"
    base = tmp_path / "arena"
    for _ in range(200):
        name = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 64)))
        spec = make_spec(game_name=name, num_players=rng.randint(2, 8))
        layout = prepare_layout(base, spec)
        for slot in range(len(spec.players)):
            for m in mounts_for_slot(layout, spec, slot):
                host = os.path.abspath(m.host_path)
                assert os.path.commonpath([os.path.abspath(base), host]) == os.path.abspath(base)


def test_path_safety_rejects_traversal(tmp_path):
    layout = VolumeLayout(tmp_path / "arena")
    with pytest.raises(ValidationError):
        layout.bot_dir("../evil")
    with pytest.raises(ValidationError):
        layout.write_dir("../../etc", 0)


def test_install_new_bot(tmp_path, layout):
    pkg = _pkg(tmp_path)
    dest = install_bot_files(layout, pkg)
    assert dest.read_bytes() == b"binary-bytes-v1"
    assert dest.parent == layout.bots_dir / "botA"


def test_install_same_checksum_no_write(tmp_path, layout):
    pkg = _pkg(tmp_path)
    dest = install_bot_files(layout, pkg)
    os.utime(dest, (100.0, 100.0))
    install_bot_files(layout, pkg)
    assert os.stat(dest).st_mtime == 100.0


def test_install_new_checksum_replaces(tmp_path, layout):
    install_bot_files(layout, _pkg(tmp_path))
    dest = install_bot_files(layout, _pkg(tmp_path, content=b"binary-bytes-v2"))
    assert dest.read_bytes() == b"binary-bytes-v2"


def test_collect_artifacts(layout, spec):
    for slot in range(2):
        wd = layout.write_dir(spec.game_name, slot)
        (wd / f"{spec.game_name}_result.json").write_text("{}")
    found = collect_artifacts(layout, spec.game_name)
    assert [slot for slot, _ in found] == [0, 1]


def test_collect_artifacts_missing_dir(layout):
    assert collect_artifacts(layout, "never_ran") == []


def test_collect_artifacts_nested(layout, spec):
    wd = layout.write_dir(spec.game_name, 0)
    nested = wd / "replays" / "r1.rep"
    nested.parent.mkdir()
    nested.write_bytes(b"rep")
    assert (0, nested) in collect_artifacts(layout, spec.game_name)


def test_available_maps(layout):
    (layout.maps_dir / "sub").mkdir()
    (layout.maps_dir / "a.scx").write_bytes(b"")
    (layout.maps_dir / "sub" / "b.scm").write_bytes(b"")
    assert available_maps(layout) == {"a.scx", str(Path("sub") / "b.scm")}
