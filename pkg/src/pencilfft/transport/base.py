"""Collective-communication abstraction shared by all transports.

A Communicator covers an ordered member list of global rank ids.  Each
rank holds its own endpoint object per communicator; collectives are
called by every member with matching arguments, in the same order.  A
single endpoint is never used from two threads at once, but different
communicators of one rank may live on different threads.

Counters on the endpoint record traffic from this rank's point of view:
all_to_all calls, bytes handed to all_to_all, and barrier entries.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolError


@dataclass
class CollectiveStats:
    """Per-endpoint traffic counters; monotonically non-decreasing."""

    alltoall_calls: int = 0
    bytes_sent: int = 0
    barrier_calls: int = 0

    def merged_with(self, other: "CollectiveStats") -> "CollectiveStats":
        return CollectiveStats(
            self.alltoall_calls + other.alltoall_calls,
            self.bytes_sent + other.bytes_sent,
            self.barrier_calls + other.barrier_calls,
        )


def merge_stats(stats) -> CollectiveStats:
    total = CollectiveStats()
    for s in stats:
        total = total.merged_with(s)
    return total


class Communicator(ABC):
    """One rank's endpoint in a communicator over `members` global ranks."""

    def __init__(self, members, my_index: int):
        self.members = tuple(members)
        self.my_index = my_index
        self.stats = CollectiveStats()
        self._seq = 0

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def rank(self) -> int:
        """This endpoint's global rank id."""
        return self.members[self.my_index]

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def all_to_all(self, send: np.ndarray) -> np.ndarray:
        """Exchange equal segments with every member, self included.

        `send` is a flat array of size m * s; segment j goes to member j.
        Returns a new flat array of the same size and dtype whose segment
        i came from member i.  Counted once per call, with the whole send
        buffer size charged to bytes_sent.
        """
        if send.ndim != 1:
            raise ProtocolError("all_to_all needs a flat buffer")
        m = self.size
        if send.size % m:
            raise ProtocolError(
                f"all_to_all buffer of {send.size} elements does not split over {m} members"
            )
        seq = self._next_seq()
        self.stats.alltoall_calls += 1
        self.stats.bytes_sent += send.nbytes
        seg = send.size // m
        segments = [send[j * seg : (j + 1) * seg] for j in range(m)]
        received = self._exchange(segments, seq)
        return np.concatenate(received) if m > 1 else received[0].copy()

    def barrier(self) -> None:
        seq = self._next_seq()
        self.stats.barrier_calls += 1
        self._barrier(seq)

    def reduce_minmax(self, value: float):
        """Member 0 returns (min, max) over all members' values; others None."""
        return self._reduce_minmax(float(value), self._next_seq())

    def gather(self, block: np.ndarray):
        """Member 0 returns [member 0's block, member 1's, ...]; others None.

        Plumbing for verification and output collection; not part of the
        transform's communication and not counted in stats.
        """
        return self._gather(np.ascontiguousarray(block), self._next_seq())

    @abstractmethod
    def _exchange(self, segments, seq: int):
        """Deliver segment j to member j; return the m received segments in member order."""

    @abstractmethod
    def _barrier(self, seq: int) -> None: ...

    @abstractmethod
    def _reduce_minmax(self, value: float, seq: int): ...

    @abstractmethod
    def _gather(self, block: np.ndarray, seq: int): ...
