"""Per-player result files and match-level aggregation.

Each container only has its own private write directory mounted read-write,
so outcomes arrive as one small JSON file per player; `aggregate` folds them
(plus crash and timeout knowledge from the lifecycle) into one GameResult.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .config import MatchSpec
from .errors import ProtocolError

SCORE_FIELDS = ("building_score", "razing_score", "unit_score", "kill_score")


class Outcome(str, Enum):
    DECIDED = "Decided"
    DRAW = "Draw"
    ALL_CRASHED = "AllCrashed"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True)
class PlayerResult:
    slot: int
    is_winner: bool
    is_crashed: bool
    frame_count: int
    building_score: int = 0
    razing_score: int = 0
    unit_score: int = 0
    kill_score: int = 0


@dataclass(frozen=True)
class GameResult:
    game_name: str
    outcome: Outcome
    winner_slot: int | None
    players: tuple[PlayerResult, ...]
    bot_names: tuple[str, ...]
    wall_seconds: float = 0.0

    @property
    def winner_bot(self) -> str | None:
        if self.winner_slot is None:
            return None
        return self.bot_names[self.winner_slot]

    @property
    def frames(self) -> int:
        return max((p.frame_count for p in self.players), default=0)

    def to_dict(self) -> dict:
        return {
            "game_name": self.game_name,
            "outcome": self.outcome.value,
            "winner_slot": self.winner_slot,
            "winner_bot": self.winner_bot,
            "wall_seconds": self.wall_seconds,
            "players": [
                {
                    "slot": p.slot,
                    "bot_name": self.bot_names[p.slot],
                    "is_winner": p.is_winner,
                    "is_crashed": p.is_crashed,
                    "frame_count": p.frame_count,
                    **{f: getattr(p, f) for f in SCORE_FIELDS},
                }
                for p in self.players
            ],
        }


def parse_result_file(text: str) -> PlayerResult:
    """Parse one player's result JSON; missing score fields default to 0."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"result file: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("result file: expected a JSON object")
    try:
        result = PlayerResult(
            slot=int(doc["slot"]),
            is_winner=bool(doc["is_winner"]),
            is_crashed=bool(doc["is_crashed"]),
            frame_count=int(doc["frame_count"]),
            **{f: int(doc.get(f, 0)) for f in SCORE_FIELDS},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"result file: {exc}") from exc
    if result.is_winner and result.is_crashed:
        raise ProtocolError("result file: is_winner and is_crashed both set")
    if result.frame_count < 0 or any(getattr(result, f) < 0 for f in SCORE_FIELDS):
        raise ProtocolError("result file: negative counter")
    return result


def aggregate(
    spec: MatchSpec,
    per_slot: dict[int, PlayerResult | None],
    crashed_slots: set[int],
    timed_out: bool,
    wall_seconds: float = 0.0,
) -> GameResult:
    """Fold per-player files plus crash/timeout knowledge into one GameResult.

    Decision order: timeout trumps everything; then the crash rule (sole
    survivor wins by default, everyone crashed is AllCrashed); then the
    winner claim in the result files; no claims at all is a draw.
    """
    n = len(spec.players)
    if any(s < 0 or s >= n for s in per_slot) or any(
        s < 0 or s >= n for s in crashed_slots
    ):
        raise ProtocolError("slot outside match range")
    crashed = set(crashed_slots)
    # A crashed slot's file (if any) may carry scores, but its winner claim
    # is void: a crashed player cannot win.
    claims = {
        s
        for s, r in per_slot.items()
        if r is not None and r.is_winner and s not in crashed
    }

    winner: int | None = None
    if timed_out:
        outcome = Outcome.TIMED_OUT
    elif len(crashed) == n:
        outcome = Outcome.ALL_CRASHED
    elif len(crashed) == n - 1:
        outcome = Outcome.DECIDED
        winner = next(s for s in range(n) if s not in crashed)
    elif len(claims) == 1:
        outcome = Outcome.DECIDED
        winner = next(iter(claims))
    elif not claims:
        outcome = Outcome.DRAW
    else:
        raise ProtocolError(f"conflicting winner claims from slots {sorted(claims)}")

    players = []
    for s in range(n):
        base = per_slot.get(s)
        players.append(
            PlayerResult(
                slot=s,
                is_winner=(s == winner),
                is_crashed=s in crashed,
                frame_count=base.frame_count if base else 0,
                **{f: getattr(base, f) if base else 0 for f in SCORE_FIELDS},
            )
        )
    return GameResult(
        game_name=spec.game_name,
        outcome=outcome,
        winner_slot=winner,
        players=tuple(players),
        bot_names=tuple(p.bot_name for p in spec.players),
        wall_seconds=wall_seconds,
    )


CSV_COLUMNS = ("game_name", "outcome", "winner_slot", "winner_bot", "wall_seconds", "frames")


def render_report(results: list[GameResult], format: str) -> str:
    """Deterministic report text: results sorted by game_name."""
    ordered = sorted(results, key=lambda r: r.game_name)
    if format == "json":
        return json.dumps([r.to_dict() for r in ordered], indent=2) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in ordered:
            writer.writerow(
                [
                    r.game_name,
                    r.outcome.value,
                    "" if r.winner_slot is None else r.winner_slot,
                    r.winner_bot or "",
                    r.wall_seconds,
                    r.frames,
                ]
            )
        return buf.getvalue()
    raise ValueError(f"unknown report format: {format!r}")


def write_report(results: list[GameResult], format: str, out: Path) -> None:
    Path(out).write_text(render_report(results, format))
