"""Replay a SimRuntime event trace to check concurrency and budget bounds."""

from arena.runtime import LABEL_GAME


def analyze_trace(rt, match_of=None):
    """Walk the event list in order; return (max_concurrent_matches, max_running_cpus).

    match_of maps a game label to the planned match identity (collapsing retry
    attempts); defaults to the label itself.
    """
    match_of = match_of or (lambda game: game)
    running_cpus = {}  # container name -> cpus
    live = {}  # container name -> match key
    max_cpus = 0.0
    max_matches = 0
    for ev in rt.events:
        if ev.kind == "network":
            continue
        cfg = rt.configs.get(ev.name)
        if cfg is None:
            continue
        key = match_of(cfg.labels[LABEL_GAME])
        if ev.kind == "create":
            live[ev.name] = key
        elif ev.kind == "start":
            running_cpus[ev.name] = cfg.cpus
        elif ev.kind in ("exit", "stop"):
            running_cpus.pop(ev.name, None)
        elif ev.kind == "remove":
            live.pop(ev.name, None)
            running_cpus.pop(ev.name, None)
        max_cpus = max(max_cpus, sum(running_cpus.values()))
        max_matches = max(max_matches, len(set(live.values())))
    return max_matches, max_cpus
