"""Wrappers that perturb collectives, for overlap tests and experiments."""

from __future__ import annotations

import time


class DelayingCommunicator:
    """Delegates to a real communicator, sleeping before each all_to_all.

    Stretches every exchange by a fixed wall-clock amount without touching
    payloads, which makes compute/communication overlap observable even at
    sizes where the real exchange is nearly instant.
    """

    def __init__(self, inner, delay: float):
        self.inner = inner
        self.delay = delay

    @property
    def members(self):
        return self.inner.members

    @property
    def my_index(self):
        return self.inner.my_index

    @property
    def size(self):
        return self.inner.size

    @property
    def rank(self):
        return self.inner.rank

    @property
    def stats(self):
        return self.inner.stats

    def all_to_all(self, send):
        time.sleep(self.delay)
        return self.inner.all_to_all(send)

    def barrier(self):
        self.inner.barrier()

    def reduce_minmax(self, value):
        return self.inner.reduce_minmax(value)

    def gather(self, block):
        return self.inner.gather(block)
