"""Socket transport: a full TCP mesh between ranks, one endpoint per rank.

Every pair of ranks shares one connection, established once at startup
from a hosts file.  Each message carries a fixed little-endian header
(magic, communicator id, sequence number, source rank, payload length),
so misaligned collectives are detected as framing errors instead of
hangs or silent mispairing.

The exchange schedule pairs members by XOR distance: at step s, member i
talks to member i ^ s.  Within a pair the lower index sends first, so
the two sides never block on simultaneous sends.  Barrier, reduce, and
gather funnel through member 0.
"""

from __future__ import annotations

import socket
import struct
import time

import numpy as np

from ..errors import ProtocolError, TransportError
from .base import Communicator

WIRE_MAGIC = b"CRFW"
_MSG_HEADER = struct.Struct("<4sIQIQ")  # magic, comm id, seq, source rank, payload len
_HELLO = struct.Struct("<4sI")  # magic, connecting rank

CONNECT_TIMEOUT = 30.0
IO_TIMEOUT = 120.0


def parse_hosts(path) -> list[tuple[str, int]]:
    """Read 'rank host:port' lines; returns endpoints indexed by rank."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or ":" not in parts[1]:
                raise TransportError(f"{path}:{lineno}: expected 'rank host:port', got {raw!r}")
            host, port = parts[1].rsplit(":", 1)
            try:
                rank = int(parts[0])
                port = int(port)
            except ValueError:
                raise TransportError(f"{path}:{lineno}: bad rank or port in {raw!r}") from None
            if rank in entries:
                raise TransportError(f"{path}:{lineno}: duplicate rank {rank}")
            entries[rank] = (host, port)
    n = len(entries)
    if n == 0:
        raise TransportError(f"{path}: no host entries")
    if sorted(entries) != list(range(n)):
        raise TransportError(f"{path}: ranks must be contiguous from 0, got {sorted(entries)}")
    return [entries[r] for r in range(n)]


def _send_all(sock, data: bytes, peer: int) -> None:
    try:
        sock.sendall(data)
    except OSError as exc:
        raise TransportError(f"send to rank {peer} failed: {exc}") from exc


def _recv_exact(sock, n: int, peer: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        try:
            chunk = sock.recv(min(remaining, 1 << 20))
        except socket.timeout:
            raise TransportError(f"timed out waiting for rank {peer}") from None
        except OSError as exc:
            raise TransportError(f"receive from rank {peer} failed: {exc}") from exc
        if not chunk:
            raise TransportError(f"rank {peer} disconnected mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class TcpFabric:
    """This rank's endpoint: listener plus one connected socket per peer.

    Lower ranks accept from higher ranks; a rank connects to every peer
    below it (retrying until the listener is up) and identifies itself
    with a hello message.
    """

    def __init__(self, rank: int, hosts, connect_timeout: float = CONNECT_TIMEOUT,
                 io_timeout: float = IO_TIMEOUT):
        self.rank = rank
        self.nranks = len(hosts)
        if not 0 <= rank < self.nranks:
            raise TransportError(f"rank {rank} outside hosts file of {self.nranks} entries")
        self._io_timeout = io_timeout
        self.sockets: dict[int, socket.socket] = {}
        host, port = hosts[rank]
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host, port))
            self._listener.listen(self.nranks)
            self._connect_mesh(hosts, connect_timeout)
        except BaseException:
            self.close()
            raise

    def _connect_mesh(self, hosts, connect_timeout: float) -> None:
        for peer in range(self.rank):
            deadline = time.monotonic() + connect_timeout
            while True:
                sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
                try:
                    sock.settimeout(1.0)
                    sock.connect(hosts[peer])
                    break
                except OSError:
                    sock.close()
                    if time.monotonic() >= deadline:
                        raise TransportError(
                            f"rank {self.rank} could not reach rank {peer} at "
                            f"{hosts[peer][0]}:{hosts[peer][1]} within {connect_timeout}s"
                        ) from None
                    time.sleep(0.05)
            self._adopt(sock, peer)
            _send_all(sock, _HELLO.pack(WIRE_MAGIC, self.rank), peer)
        self._listener.settimeout(connect_timeout)
        for _ in range(self.rank + 1, self.nranks):
            try:
                sock, _addr = self._listener.accept()
            except socket.timeout:
                missing = sorted(set(range(self.rank + 1, self.nranks)) - set(self.sockets))
                raise TransportError(
                    f"rank {self.rank} timed out waiting for connections from ranks {missing}"
                ) from None
            sock.settimeout(self._io_timeout)
            magic, peer = _HELLO.unpack(_recv_exact(sock, _HELLO.size, -1))
            if magic != WIRE_MAGIC:
                raise ProtocolError(f"bad hello magic {magic!r}")
            if not self.rank < peer < self.nranks or peer in self.sockets:
                raise ProtocolError(f"unexpected hello from rank {peer}")
            self._adopt(sock, peer)

    def _adopt(self, sock, peer: int) -> None:
        sock.settimeout(self._io_timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sockets[peer] = sock

    def context(self) -> "TcpRankContext":
        return TcpRankContext(self)

    def close(self) -> None:
        for sock in self.sockets.values():
            try:
                sock.close()
            except OSError:
                pass
        self.sockets.clear()
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TcpRankContext:
    """Mirror of the in-process RankContext over a TCP fabric."""

    def __init__(self, fabric: TcpFabric):
        self.rank = fabric.rank
        self.nranks = fabric.nranks
        self.fabric = fabric
        self._endpoints: dict = {}

    def world(self) -> "TcpCommunicator":
        return self.subcomm(range(self.nranks), key=0)

    def subcomm(self, members, key: int) -> "TcpCommunicator":
        comm = self._endpoints.get(key)
        if comm is None:
            members = tuple(members)
            if self.rank not in members:
                raise ProtocolError(f"rank {self.rank} not in members {members}")
            comm = TcpCommunicator(self.fabric, members, members.index(self.rank), key)
            self._endpoints[key] = comm
        return comm


class TcpCommunicator(Communicator):
    def __init__(self, fabric: TcpFabric, members, my_index: int, comm_id: int):
        super().__init__(members, my_index)
        self.fabric = fabric
        self.comm_id = comm_id

    def _send_msg(self, peer: int, seq: int, payload: bytes) -> None:
        header = _MSG_HEADER.pack(WIRE_MAGIC, self.comm_id, seq, self.rank, len(payload))
        _send_all(self.fabric.sockets[peer], header + payload, peer)

    def _recv_msg(self, peer: int, seq: int) -> bytes:
        sock = self.fabric.sockets[peer]
        magic, comm_id, got_seq, src, length = _MSG_HEADER.unpack(
            _recv_exact(sock, _MSG_HEADER.size, peer)
        )
        if magic != WIRE_MAGIC:
            raise ProtocolError(f"bad message magic {magic!r} from rank {peer}")
        if comm_id != self.comm_id or got_seq != seq or src != peer:
            raise ProtocolError(
                f"rank {self.rank}: expected comm {self.comm_id} seq {seq} from rank "
                f"{peer}, got comm {comm_id} seq {got_seq} from rank {src}"
            )
        return _recv_exact(sock, length, peer)

    def _exchange(self, segments, seq):
        m = self.size
        if m & (m - 1):
            raise ProtocolError(f"exchange schedule needs a power-of-two member count, got {m}")
        me = self.my_index
        dtype = segments[0].dtype
        received = [None] * m
        for step in range(m):
            peer_idx = me ^ step
            if peer_idx == me:
                received[me] = segments[me].copy()
                continue
            peer = self.members[peer_idx]
            payload = np.ascontiguousarray(segments[peer_idx]).tobytes()
            if me < peer_idx:
                self._send_msg(peer, seq, payload)
                data = self._recv_msg(peer, seq)
            else:
                data = self._recv_msg(peer, seq)
                self._send_msg(peer, seq, payload)
            if len(data) != len(payload):
                raise ProtocolError(
                    f"rank {self.rank}: segment from rank {peer} is {len(data)} bytes, "
                    f"expected {len(payload)}"
                )
            received[peer_idx] = np.frombuffer(data, dtype=dtype).copy()
        return received

    def _barrier(self, seq):
        if self.my_index == 0:
            for idx in range(1, self.size):
                self._recv_msg(self.members[idx], seq)
            for idx in range(1, self.size):
                self._send_msg(self.members[idx], seq, b"")
        else:
            root = self.members[0]
            self._send_msg(root, seq, b"")
            self._recv_msg(root, seq)

    def _reduce_minmax(self, value, seq):
        if self.my_index == 0:
            values = [value]
            for idx in range(1, self.size):
                data = self._recv_msg(self.members[idx], seq)
                values.append(struct.unpack("<d", data)[0])
            return (min(values), max(values))
        self._send_msg(self.members[0], seq, struct.pack("<d", value))
        return None

    def _gather(self, block, seq):
        if self.my_index == 0:
            blocks = [block.copy()]
            for idx in range(1, self.size):
                data = self._recv_msg(self.members[idx], seq)
                blocks.append(np.frombuffer(data, dtype=block.dtype).copy())
            return blocks
        self._send_msg(self.members[0], seq, block.tobytes())
        return None
