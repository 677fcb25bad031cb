"""In-process transport: ranks are threads, messages are queue hand-offs.

Every (communicator, source, destination) pair gets its own FIFO queue,
and every payload is copied on send, so a rank can never observe a
peer's later writes to a buffer it already handed over.  Sequence
numbers ride along with each payload; a mismatch means the members
issued collectives in different orders and raises ProtocolError instead
of silently mispairing messages.
"""

from __future__ import annotations

import queue
import threading

from ..errors import ProtocolError, TransportError
from .base import Communicator

DEFAULT_TIMEOUT = 60.0


class _CommGroup:
    """Shared state of one communicator: pairwise queues and a barrier."""

    def __init__(self, key, members):
        self.key = key
        self.members = tuple(members)
        m = len(self.members)
        self.queues = {
            (src, dst): queue.SimpleQueue() for src in range(m) for dst in range(m)
        }
        self.barrier = threading.Barrier(m)


class InprocFabric:
    """Owns the communicator groups shared by all rank threads of one job."""

    def __init__(self, nranks: int, timeout: float = DEFAULT_TIMEOUT):
        if nranks < 1:
            raise TransportError(f"need at least one rank, got {nranks}")
        self.nranks = nranks
        self.timeout = timeout
        self._groups: dict = {}
        self._lock = threading.Lock()

    def group(self, key, members) -> _CommGroup:
        with self._lock:
            grp = self._groups.get(key)
            if grp is None:
                grp = _CommGroup(key, members)
                self._groups[key] = grp
            elif grp.members != tuple(members):
                raise ProtocolError(
                    f"communicator {key!r} already exists with members {grp.members}, "
                    f"requested {tuple(members)}"
                )
            return grp

    def run(self, worker):
        """Run worker(ctx) on one thread per rank; return results in rank order.

        If any worker raises, the first non-transport exception (by rank)
        is re-raised; transport timeouts caused by a crashed peer lose to
        the root cause.
        """
        results = [None] * self.nranks
        failures = [None] * self.nranks

        def body(rank):
            try:
                results[rank] = worker(RankContext(rank, self))
            except BaseException as exc:  # noqa: BLE001 - repropagated below
                failures[rank] = exc

        threads = [
            threading.Thread(target=body, args=(r,), name=f"rank-{r}", daemon=True)
            for r in range(self.nranks)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        primary = None
        for exc in failures:
            if exc is not None and not isinstance(exc, TransportError):
                primary = exc
                break
        if primary is None:
            for exc in failures:
                if exc is not None:
                    primary = exc
                    break
        if primary is not None:
            raise primary
        return results


class RankContext:
    """One rank's handle to the fabric; creates and caches its endpoints."""

    def __init__(self, rank: int, fabric: InprocFabric):
        self.rank = rank
        self.nranks = fabric.nranks
        self.fabric = fabric
        self._endpoints: dict = {}

    def world(self) -> "InprocCommunicator":
        return self.subcomm(range(self.nranks), key=0)

    def subcomm(self, members, key) -> "InprocCommunicator":
        """Endpoint for the communicator `key` over `members` global ranks.

        All member ranks must request the same key with the same member
        list; one endpoint per key is cached per rank, so collective
        sequence counters stay aligned across repeated use.
        """
        comm = self._endpoints.get(key)
        if comm is None:
            members = tuple(members)
            if self.rank not in members:
                raise ProtocolError(f"rank {self.rank} not in members {members}")
            grp = self.fabric.group(key, members)
            comm = InprocCommunicator(grp, members.index(self.rank), self.fabric.timeout)
            self._endpoints[key] = comm
        return comm


class InprocCommunicator(Communicator):
    def __init__(self, group: _CommGroup, my_index: int, timeout: float):
        super().__init__(group.members, my_index)
        self._group = group
        self._timeout = timeout

    def _take(self, src_index: int, seq: int, kind: str):
        try:
            got_seq, payload = self._group.queues[(src_index, self.my_index)].get(
                timeout=self._timeout
            )
        except queue.Empty:
            raise TransportError(
                f"rank {self.rank}: no {kind} from rank "
                f"{self.members[src_index]} within {self._timeout}s"
            ) from None
        if got_seq != seq:
            raise ProtocolError(
                f"rank {self.rank}: {kind} from rank {self.members[src_index]} "
                f"carries seq {got_seq}, expected {seq}"
            )
        return payload

    def _exchange(self, segments, seq):
        me = self.my_index
        expected_nbytes = segments[0].nbytes
        for dst, seg in enumerate(segments):
            self._group.queues[(me, dst)].put((seq, seg.copy()))
        received = []
        for src in range(self.size):
            payload = self._take(src, seq, "segment")
            if payload.nbytes != expected_nbytes:
                raise ProtocolError(
                    f"rank {self.rank}: segment from rank {self.members[src]} is "
                    f"{payload.nbytes} bytes, expected {expected_nbytes}"
                )
            received.append(payload)
        return received

    def _barrier(self, seq):
        try:
            self._group.barrier.wait(timeout=self._timeout)
        except threading.BrokenBarrierError:
            raise TransportError(
                f"rank {self.rank}: barrier broken (a member died or timed out)"
            ) from None

    def _reduce_minmax(self, value, seq):
        self._group.queues[(self.my_index, 0)].put((seq, value))
        if self.my_index != 0:
            return None
        values = [self._take(src, seq, "reduce value") for src in range(self.size)]
        return (min(values), max(values))

    def _gather(self, block, seq):
        self._group.queues[(self.my_index, 0)].put((seq, block.copy()))
        if self.my_index != 0:
            return None
        return [self._take(src, seq, "gather block") for src in range(self.size)]
