"""Arena: run AI-bot game matches as isolated containers.

Prepares shared host directories, launches host/joiner containers on a
private per-match network, enforces resource limits, collects results, and
scales to mass parallel deployments.  Fully testable against a built-in
deterministic simulated container runtime.
"""

__version__ = "0.1.0"
