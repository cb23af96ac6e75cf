"""In-process fake bot registry implementing the documented HTTP protocol.

Serves GET /bots and GET /blobs/<name> from memory, counts every request,
and can be told to serve corrupted bytes for specific bots (fault injection
for checksum tests).  Used by the test suite and by `arena bots` dry runs.
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import BotType, Race
from .registry import BotMetadata


class FakeRegistry:
    def __init__(self) -> None:
        self._bots: dict[str, tuple[dict, bytes]] = {}
        self._corrupt: set[str] = set()
        self.request_count = 0
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- content management -------------------------------------------------

    def add_bot(
        self,
        name: str,
        payload: bytes,
        race: Race = Race.TERRAN,
        bot_type: BotType = BotType.BWAPI_MODULE,
    ) -> BotMetadata:
        digest = hashlib.sha256(payload).hexdigest()
        obj = {
            "name": name,
            "race": race.value,
            "botType": bot_type.value,
            "binaryUrl": f"{self.url}/blobs/{name}.{bot_type.value}",
            "sha256": digest,
        }
        with self._lock:
            self._bots[f"{name}.{bot_type.value}"] = (obj, payload)
        return BotMetadata(name, race, bot_type, obj["binaryUrl"], digest)

    def corrupt(self, name: str) -> None:
        """Serve flipped bytes for this bot's blob from now on."""
        self._corrupt.add(name)

    def reset_counter(self) -> None:
        self.request_count = 0

    # -- server lifecycle ----------------------------------------------------

    def __enter__(self) -> "FakeRegistry":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def start(self) -> None:
        registry = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args) -> None:
                pass

            def do_GET(self) -> None:
                with registry._lock:
                    registry.request_count += 1
                if self.path == "/bots":
                    body = json.dumps(
                        [obj for obj, _ in registry._bots.values()]
                    ).encode()
                    self._reply(200, body, "application/json")
                elif self.path.startswith("/blobs/"):
                    blob_name = self.path.removeprefix("/blobs/")
                    entry = registry._bots.get(blob_name)
                    if entry is None:
                        self._reply(404, b"no such bot", "text/plain")
                        return
                    obj, payload = entry
                    if obj["name"] in registry._corrupt:
                        payload = bytes(b ^ 0xFF for b in payload)
                    self._reply(200, payload, "application/octet-stream")
                else:
                    self._reply(404, b"not found", "text/plain")

            def _reply(self, code: int, body: bytes, ctype: str) -> None:
                self.send_response(code)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def url(self) -> str:
        if self._server is None:
            raise RuntimeError("fake registry not started")
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"
