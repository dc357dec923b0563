"""Whole-session drivers: one party over a given channel, or both in-process."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..errors import HybridPIError, ProtocolAbort
from ..nn import Model
from ..wire import Channel, Meters, SocketStream, TcpListener, loopback_pair, tcp_connect
from .session import ClientSession, OfflineBundle, ServerSession, SessionConfig, Topology


@dataclass
class ClientOutcome:
    result: np.ndarray
    meters: Meters
    bundle: OfflineBundle
    transcript: bytes


@dataclass
class ServerOutcome:
    meters: Meters
    bundle: OfflineBundle
    transcript: bytes


def run_client(config: SessionConfig, topology: Topology | Model, x, channel: Channel) -> ClientOutcome:
    if isinstance(topology, Model):
        topology = Topology.of(topology)
    try:
        session = ClientSession(config, topology, channel)
        session.handshake()
        bundle = session.offline()
        result = session.online(bundle, x)
    except BaseException:
        channel.close()
        raise
    return ClientOutcome(result, channel.meters, bundle, channel.transcript.digest())


def run_server(config: SessionConfig, model: Model, channel: Channel) -> ServerOutcome:
    try:
        session = ServerSession(config, model, channel)
        session.handshake()
        bundle = session.offline()
        session.online(bundle)
    except BaseException:
        channel.close()
        raise
    return ServerOutcome(channel.meters, bundle, channel.transcript.digest())


@dataclass
class LoopbackOutcome:
    result: np.ndarray
    client: ClientOutcome
    server: ServerOutcome
    socket_bytes_up: int
    socket_bytes_down: int


def _streams(transport: str) -> tuple[SocketStream, SocketStream]:
    """(client stream, server stream) for 'loopback' or 'tcp[:HOST:PORT]'."""
    if transport == "loopback":
        return loopback_pair()
    if transport == "tcp" or transport.startswith("tcp:"):
        parts = transport.split(":")
        host = parts[1] if len(parts) > 1 and parts[1] else "127.0.0.1"
        port = int(parts[2]) if len(parts) > 2 else 0
        listener = TcpListener(host, port)
        holder: dict = {}
        t = threading.Thread(target=lambda: holder.setdefault("s", listener.accept()), daemon=True)
        t.start()
        client = tcp_connect(host, listener.port)
        t.join()
        if "s" not in holder:
            raise ProtocolAbort("TCP accept failed")
        return client, holder["s"]
    raise ProtocolAbort(f"unknown transport {transport!r}")


def run_pair(client_cfg: SessionConfig, server_cfg: SessionConfig, model: Model, x,
             transport: str = "loopback", client_topology: Topology | None = None) -> LoopbackOutcome:
    """Both parties in one process (server in a helper thread)."""
    c_stream, s_stream = _streams(transport)
    c_chan, s_chan = Channel(c_stream, "client"), Channel(s_stream, "server")
    box: dict = {}

    def server():
        try:
            box["server"] = run_server(server_cfg, model, s_chan)
        except BaseException as exc:
            box["error"] = exc

    t = threading.Thread(target=server, name="hybridpi-server", daemon=True)
    t.start()
    try:
        client = run_client(client_cfg, client_topology or Topology.of(model), x, c_chan)
    except BaseException as exc:
        t.join()
        err = box.get("error")
        # prefer the root cause over the peer's "connection closed"
        if isinstance(exc, ProtocolAbort) and isinstance(err, HybridPIError) \
                and not isinstance(err, ProtocolAbort):
            raise err from None
        raise
    t.join()
    c_chan.close()
    s_chan.close()
    if "error" in box:
        raise box["error"]
    return LoopbackOutcome(client.result, client, box["server"],
                           c_stream.bytes_written, s_stream.bytes_written)


def run_loopback(config: SessionConfig, model: Model, x, transport: str = "loopback") -> LoopbackOutcome:
    return run_pair(config, config, model, x, transport)
