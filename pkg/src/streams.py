"""Reproducible per-index random streams: every index tuple theta gets its own counter-based generator."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import DomainError


@dataclass(frozen=True)
class ThetaKey:
    '''Element of the index set of all finite integer tuples'''
    entries: Tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if len(entries) < 1:
            raise DomainError("theta keys need at least one entry")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def root(cls, value: int = 0) -> ThetaKey:
        return cls((value,))

    def child(self, level: int, index: int) -> ThetaKey:
        '''(theta, level, index); negative levels address the correction branch'''
        return ThetaKey(self.entries + (level, index))

    def encode(self) -> bytes:
        return ",".join(str(e) for e in self.entries).encode("ascii")

    def __str__(self) -> str:
        return "(" + ",".join(str(e) for e in self.entries) + ")"


def stream_key(master_seed: int, theta: ThetaKey) -> int:
    '''128-bit Philox key from SHA-256 of seed and canonical theta'''
    digest = hashlib.sha256(f"{int(master_seed)}:".encode("ascii") + theta.encode()).digest()
    return int.from_bytes(digest[:16], byteorder="little")


def theta_stream(master_seed: int, theta: ThetaKey) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, theta)))
