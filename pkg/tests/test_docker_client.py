import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote

import pytest

from arena.config import ImageRef
from arena.docker import DockerRuntime
from arena.errors import (
    ImageMissingError,
    NameConflictError,
    RuntimeUnavailableError,
    StillRunningError,
)
from arena.runtime import ContainerConfig, ContainerHandle, ContainerState
from arena.volumes import Mount


class StubDaemon:
    """Canned Docker-Engine HTTP endpoint that records every request."""

    def __init__(self):
        self.requests = []  # (method, path, json body or None)
        self.responses = {}  # (method, path prefix) -> (status, json payload)
        self._server = None
        self._thread = None

    def respond(self, method, prefix, status, payload=None):
        self.responses[(method, prefix)] = (status, payload)

    def __enter__(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _handle(self, method):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b""
                body = json.loads(raw) if raw else None
                stub.requests.append((method, self.path, body))
                for (m, prefix), (status, payload) in stub.responses.items():
                    if m == method and self.path.startswith(prefix):
                        data = json.dumps(payload).encode() if payload is not None else b""
                        self.send_response(status)
                        self.send_header("Content-Type", "application/json")
                        self.send_header("Content-Length", str(len(data)))
                        self.end_headers()
                        self.wfile.write(data)
                        return
                self.send_response(500)
                self.send_header("Content-Length", "0")
                self.end_headers()

            def do_GET(self):
                self._handle("GET")

            def do_POST(self):
                self._handle("POST")

            def do_DELETE(self):
                self._handle("DELETE")

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()

    @property
    def endpoint(self):
        host, port = self._server.server_address[:2]
        return f"tcp://{host}:{port}"


@pytest.fixture
def stub():
    with StubDaemon() as s:
        yield s


def _cfg():
    return ContainerConfig(
        name="arena_g1_0",
        image=ImageRef("starcraft", "game"),
        env=("GAME_NAME=g1", "PLAYER_SLOT=0"),
        mounts=(
            Mount(Path("/base/maps"), "/app/sc/maps", read_only=True),
            Mount(Path("/base/games/g1/write_0"), "/app/sc/write", read_only=False),
        ),
        network="arena_g1",
        cpus=1.5,
        memory_mib=2048,
        port_bindings=((5900, 5901),),
        labels={"arena.game": "g1", "arena.slot": "0"},
    )


def test_create_translates_bit_exact(stub):
    stub.respond("POST", "/v1.41/containers/create", 201, {"Id": "abc123"})
    rt = DockerRuntime(stub.endpoint)
    handle = rt.create(_cfg())
    assert handle == ContainerHandle(id="abc123", name="arena_g1_0")
    method, path, body = stub.requests[0]
    assert method == "POST"
    assert unquote(path) == "/v1.41/containers/create?name=arena_g1_0"
    assert body["Image"] == "starcraft:game"
    hc = body["HostConfig"]
    assert hc["NanoCpus"] == 1_500_000_000
    assert hc["Memory"] == 2_147_483_648
    assert hc["Binds"] == [
        "/base/maps:/app/sc/maps:ro",
        "/base/games/g1/write_0:/app/sc/write",
    ]
    assert hc["NetworkMode"] == "arena_g1"
    assert hc["PortBindings"] == {"5900/tcp": [{"HostPort": "5901"}]}
    assert body["Labels"] == {"arena.game": "g1", "arena.slot": "0"}
    assert body["Env"] == ["GAME_NAME=g1", "PLAYER_SLOT=0"]


def test_create_name_conflict(stub):
    stub.respond("POST", "/v1.41/containers/create", 409, {"message": "in use"})
    with pytest.raises(NameConflictError):
        DockerRuntime(stub.endpoint).create(_cfg())


def test_create_image_missing(stub):
    stub.respond("POST", "/v1.41/containers/create", 404, {"message": "no image"})
    with pytest.raises(ImageMissingError):
        DockerRuntime(stub.endpoint).create(_cfg())


def test_start_stop_remove_paths(stub):
    stub.respond("POST", "/v1.41/containers/abc123/start", 204)
    stub.respond("POST", "/v1.41/containers/abc123/stop", 204)
    stub.respond("DELETE", "/v1.41/containers/abc123", 204)
    rt = DockerRuntime(stub.endpoint)
    h = ContainerHandle("abc123", "arena_g1_0")
    rt.start(h)
    rt.stop(h, grace_s=10)
    rt.remove(h)
    paths = [p for _, p, _ in stub.requests]
    assert paths == [
        "/v1.41/containers/abc123/start",
        "/v1.41/containers/abc123/stop?t=10",
        "/v1.41/containers/abc123?force=false",
    ]


def test_remove_still_running(stub):
    stub.respond("DELETE", "/v1.41/containers/abc123", 409)
    with pytest.raises(StillRunningError):
        DockerRuntime(stub.endpoint).remove(ContainerHandle("abc123", "x"))


def test_inspect_states(stub):
    rt = DockerRuntime(stub.endpoint)
    h = ContainerHandle("abc123", "x")
    stub.respond("GET", "/v1.41/containers/abc123/json", 200, {"State": {"Status": "running"}})
    assert rt.inspect(h).state is ContainerState.RUNNING
    stub.respond(
        "GET", "/v1.41/containers/abc123/json", 200,
        {"State": {"Status": "exited", "ExitCode": 137}},
    )
    status = rt.inspect(h)
    assert status.state is ContainerState.EXITED and status.exit_code == 137
    stub.respond("GET", "/v1.41/containers/abc123/json", 404)
    assert rt.inspect(h).state is ContainerState.NOT_FOUND


def test_list_by_label_filter_encoding(stub):
    stub.respond("GET", "/v1.41/containers/json", 200, [{"Id": "abc", "Names": ["/arena_g1_0"]}])
    rt = DockerRuntime(stub.endpoint)
    handles = rt.list_by_label("arena.game", "g1")
    assert handles == [ContainerHandle("abc", "arena_g1_0")]
    _, path, _ = stub.requests[0]
    assert path.startswith("/v1.41/containers/json?all=true&filters=")
    filters = json.loads(unquote(path.split("filters=", 1)[1]))
    assert filters == {"label": ["arena.game=g1"]}


def test_network_create_and_conflict(stub):
    stub.respond("POST", "/v1.41/networks/create", 201, {"Id": "net1"})
    rt = DockerRuntime(stub.endpoint)
    assert rt.ensure_network("arena_g1") == "net1"
    _, _, body = stub.requests[0]
    assert body == {"Name": "arena_g1", "Driver": "bridge"}
    stub.respond("POST", "/v1.41/networks/create", 409)
    stub.respond("GET", "/v1.41/networks/arena_g1", 200, {"Id": "net1"})
    assert rt.ensure_network("arena_g1") == "net1"


def test_daemon_unreachable():
    rt = DockerRuntime("tcp://127.0.0.1:1")
    with pytest.raises(RuntimeUnavailableError):
        rt.ensure_network("n")
