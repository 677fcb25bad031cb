"""Shared helpers for the test suite."""

import socket

import numpy as np


def free_ports(n: int) -> list:
    """Reserve n distinct ephemeral localhost ports and release them."""
    socks = []
    try:
        for _ in range(n):
            s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            s.bind(("127.0.0.1", 0))
            socks.append(s)
        return [s.getsockname()[1] for s in socks]
    finally:
        for s in socks:
            s.close()


def localhost_hosts(n: int) -> list:
    return [("127.0.0.1", port) for port in free_ports(n)]


def bits_equal(a: np.ndarray, b: np.ndarray) -> bool:
    """Bit-level equality of two complex128 arrays (NaN-safe, sign-of-zero strict)."""
    if a.shape != b.shape or a.dtype != b.dtype:
        return False
    return bool(np.array_equal(a.view(np.uint64), b.view(np.uint64)))
