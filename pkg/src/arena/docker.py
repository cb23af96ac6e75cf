"""Wire-protocol client for any Docker-Engine-API-compatible daemon.

Speaks the documented /v1.41 HTTP subset over a unix socket or TCP.  The
endpoint comes from ARENA_DOCKER_HOST (unix:///path, tcp://host:port or
http://host:port); default is the standard local socket.
"""

from __future__ import annotations

import json
import os
from urllib.parse import quote

import httpx

from .errors import (
    ContainerNotFoundError,
    ImageMissingError,
    NameConflictError,
    RuntimeUnavailableError,
    StillRunningError,
)
from .runtime import (
    ContainerConfig,
    ContainerHandle,
    ContainerRuntime,
    ContainerStatus,
)

API_PREFIX = "/v1.41"
DEFAULT_DOCKER_HOST = "unix:///var/run/docker.sock"
ENV_DOCKER_HOST = "ARENA_DOCKER_HOST"

NANO_CPUS_PER_CPU = 1_000_000_000
BYTES_PER_MIB = 1_048_576


def _client_for(endpoint: str) -> tuple[httpx.Client, str]:
    if endpoint.startswith("unix://"):
        transport = httpx.HTTPTransport(uds=endpoint.removeprefix("unix://"))
        return httpx.Client(transport=transport, timeout=60.0), "http://docker"
    if endpoint.startswith("tcp://"):
        return httpx.Client(timeout=60.0), "http://" + endpoint.removeprefix("tcp://")
    if endpoint.startswith(("http://", "https://")):
        return httpx.Client(timeout=60.0), endpoint.rstrip("/")
    raise ValueError(f"unsupported docker endpoint: {endpoint!r}")


class DockerRuntime(ContainerRuntime):
    def __init__(self, endpoint: str | None = None):
        endpoint = endpoint or os.environ.get(ENV_DOCKER_HOST, DEFAULT_DOCKER_HOST)
        self._http, self._base = _client_for(endpoint)

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        url = f"{self._base}{API_PREFIX}{path}"
        try:
            return self._http.request(method, url, **kwargs)
        except httpx.HTTPError as exc:
            raise RuntimeUnavailableError(f"docker daemon: {exc}") from exc

    # -- networks ------------------------------------------------------------

    def ensure_network(self, name: str) -> str:
        resp = self._request(
            "POST", "/networks/create", json={"Name": name, "Driver": "bridge"}
        )
        if resp.status_code in (200, 201):
            return resp.json()["Id"]
        if resp.status_code == 409:  # already exists
            lookup = self._request("GET", f"/networks/{name}")
            if lookup.status_code == 200:
                return lookup.json()["Id"]
        raise RuntimeUnavailableError(f"network create: {resp.status_code} {resp.text}")

    def remove_network(self, name: str) -> None:
        resp = self._request("DELETE", f"/networks/{name}")
        if resp.status_code not in (204, 404):
            raise RuntimeUnavailableError(
                f"network remove: {resp.status_code} {resp.text}"
            )

    # -- containers ----------------------------------------------------------

    def create(self, cfg: ContainerConfig) -> ContainerHandle:
        cfg.validate()
        body = {
            "Image": str(cfg.image),
            "Env": list(cfg.env),
            "Labels": dict(cfg.labels),
            "HostConfig": {
                "Binds": [
                    f"{m.host_path}:{m.container_path}"
                    + (":ro" if m.read_only else "")
                    for m in cfg.mounts
                ],
                "NanoCpus": int(round(cfg.cpus * NANO_CPUS_PER_CPU)),
                "Memory": cfg.memory_mib * BYTES_PER_MIB,
                "NetworkMode": cfg.network,
                "PortBindings": {
                    f"{ctr}/tcp": [{"HostPort": str(host)}]
                    for ctr, host in cfg.port_bindings
                },
            },
        }
        resp = self._request(
            "POST", f"/containers/create?name={quote(cfg.name)}", json=body
        )
        if resp.status_code == 201:
            return ContainerHandle(id=resp.json()["Id"], name=cfg.name)
        if resp.status_code == 409:
            raise NameConflictError(f"container name in use: {cfg.name}")
        if resp.status_code == 404:
            raise ImageMissingError(f"no such image: {cfg.image}")
        raise RuntimeUnavailableError(f"create: {resp.status_code} {resp.text}")

    def start(self, handle: ContainerHandle) -> None:
        resp = self._request("POST", f"/containers/{handle.id}/start")
        if resp.status_code in (204, 304):
            return
        if resp.status_code == 404:
            raise ContainerNotFoundError(f"no such container: {handle.name}")
        raise RuntimeUnavailableError(f"start: {resp.status_code} {resp.text}")

    def stop(self, handle: ContainerHandle, grace_s: int) -> None:
        resp = self._request("POST", f"/containers/{handle.id}/stop?t={grace_s}")
        if resp.status_code in (204, 304):
            return
        if resp.status_code == 404:
            raise ContainerNotFoundError(f"no such container: {handle.name}")
        raise RuntimeUnavailableError(f"stop: {resp.status_code} {resp.text}")

    def remove(self, handle: ContainerHandle) -> None:
        resp = self._request("DELETE", f"/containers/{handle.id}?force=false")
        if resp.status_code == 204:
            return
        if resp.status_code == 404:
            raise ContainerNotFoundError(f"no such container: {handle.name}")
        if resp.status_code == 409:
            raise StillRunningError(f"{handle.name}: still running")
        raise RuntimeUnavailableError(f"remove: {resp.status_code} {resp.text}")

    def inspect(self, handle: ContainerHandle) -> ContainerStatus:
        resp = self._request("GET", f"/containers/{handle.id}/json")
        if resp.status_code == 404:
            return ContainerStatus.not_found()
        if resp.status_code != 200:
            raise RuntimeUnavailableError(f"inspect: {resp.status_code} {resp.text}")
        state = resp.json().get("State", {})
        status = state.get("Status", "")
        if status == "running":
            return ContainerStatus.running(since=0.0)
        if status in ("exited", "dead"):
            return ContainerStatus.exited(int(state.get("ExitCode", -1)))
        return ContainerStatus.created()

    def list_by_label(
        self, key: str, value: str | None = None
    ) -> list[ContainerHandle]:
        label = key if value is None else f"{key}={value}"
        filters = quote(json.dumps({"label": [label]}))
        resp = self._request("GET", f"/containers/json?all=true&filters={filters}")
        if resp.status_code != 200:
            raise RuntimeUnavailableError(f"list: {resp.status_code} {resp.text}")
        out = []
        for obj in resp.json():
            names = obj.get("Names") or ["/unknown"]
            out.append(ContainerHandle(id=obj["Id"], name=names[0].lstrip("/")))
        return out
