import pytest

from arena.config import MatchSpec, PlayerSlot, Race, ResourceLimits
from arena.volumes import prepare_layout


def make_spec(
    game_name="g1",
    num_players=2,
    headful=False,
    timeout_s=3600,
    cpus=1.0,
    memory_mib=2048,
    map_path="maps/fighting_spirit.scx",
    bot_ext="dll",
):
    players = tuple(
        PlayerSlot(i, f"bot{i}", Race.TERRAN, f"bot{i}.{bot_ext}")
        for i in range(num_players)
    )
    return MatchSpec(
        game_name=game_name,
        map=map_path,
        players=players,
        headful=headful,
        timeout_s=timeout_s,
        limits=ResourceLimits(cpus=cpus, memory_mib=memory_mib),
    )


@pytest.fixture
def spec():
    return make_spec()


@pytest.fixture
def layout(tmp_path, spec):
    return prepare_layout(tmp_path / "arena", spec)
