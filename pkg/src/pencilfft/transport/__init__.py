"""Pluggable rank-to-rank transports and their shared collective interface."""

from .base import CollectiveStats, Communicator, merge_stats
from .inproc import InprocFabric, InprocCommunicator, RankContext
from .instrument import DelayingCommunicator
from .tcp import TcpCommunicator, TcpFabric, TcpRankContext, parse_hosts

TRANSPORT_INPROC = "inproc"
TRANSPORT_TCP = "tcp"
TRANSPORTS = (TRANSPORT_INPROC, TRANSPORT_TCP)

__all__ = [
    "CollectiveStats",
    "Communicator",
    "DelayingCommunicator",
    "InprocCommunicator",
    "InprocFabric",
    "RankContext",
    "TcpCommunicator",
    "TcpFabric",
    "TcpRankContext",
    "TRANSPORTS",
    "TRANSPORT_INPROC",
    "TRANSPORT_TCP",
    "merge_stats",
    "parse_hosts",
]
