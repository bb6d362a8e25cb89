"""MDS-coded cache placement, fronthaul loads and packet-count feasibility.

Each file is split into ``n`` fragments and MDS-coded into a pool of ``B*n``
packets, enough for every SBS to hold distinct packets of the same file.
Packet identities are kept as index sets so the multicast packet-count
condition can be checked exactly.  The optimizer only needs the fraction
matrix ``q = m / n`` and the residual loads ``m' = (1 - q) S``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import STREAM_CACHE, Library, stream


@dataclass(frozen=True)
class CacheAllocation:
    packets: tuple[tuple[frozenset, ...], ...]  # [f][b] -> cached packet indices
    fragments: int                             # n
    capacity: float                            # mu
    file_size: float                           # S, bits

    @property
    def num_files(self) -> int:
        return len(self.packets)

    @property
    def num_sbs(self) -> int:
        return len(self.packets[0]) if self.packets else 0

    @property
    def pool_size(self) -> int:
        return self.num_sbs * self.fragments

    @property
    def counts(self) -> np.ndarray:
        """m_{f,b}, shape (F, B)."""
        return np.array([[len(s) for s in row] for row in self.packets], dtype=int).reshape(
            self.num_files, self.num_sbs)

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.fragments

    @property
    def residual(self) -> np.ndarray:
        """m'_{f,b} = (1 - m_{f,b}/n) S, shape (F, B)."""
        return (1.0 - self.counts / self.fragments) * self.file_size

    def budget(self) -> int:
        return packet_budget(self.capacity, self.num_files, self.fragments)

    def check(self) -> None:
        m = self.counts
        if np.any(m > self.fragments):
            raise ValueError("an SBS caches more than n packets of one file")
        if np.any(m.sum(axis=0) > self.budget()):
            raise ValueError("an SBS exceeds its packet budget floor(mu F n)")
        for row in self.packets:
            for s in row:
                if any(not 0 <= p < self.pool_size for p in s):
                    raise ValueError("packet index outside the coded pool")

    def to_json(self) -> dict:
        return {
            "fragments": self.fragments,
            "capacity": self.capacity,
            "file_size": self.file_size,
            "num_files": self.num_files,
            "num_sbs": self.num_sbs,
            # per SBS: file -> sorted packet list, nonempty entries only
            "sbs": [{str(f): sorted(self.packets[f][b]) for f in range(self.num_files) if self.packets[f][b]}
                    for b in range(self.num_sbs)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CacheAllocation":
        F, B = data["num_files"], data["num_sbs"]
        cells = [[frozenset() for _ in range(B)] for _ in range(F)]
        for b, per in enumerate(data["sbs"]):
            for f, pk in per.items():
                cells[int(f)][b] = frozenset(int(p) for p in pk)
        alloc = cls(tuple(tuple(r) for r in cells), int(data["fragments"]), float(data["capacity"]),
                    float(data["file_size"]))
        alloc.check()
        return alloc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "CacheAllocation":
        return cls.from_json(json.loads(Path(path).read_text()))


def packet_budget(mu: float, F: int, n: int) -> int:
    # small epsilon keeps e.g. floor(0.2*100*5) at 100 despite binary rounding
    return int(math.floor(mu * F * n + 1e-9))


def _assign_packets(counts: np.ndarray, n: int, seed) -> tuple:
    F, B = counts.shape
    pool = B * n
    rng = stream(seed, STREAM_CACHE, 1)
    cells = []
    for f in range(F):
        row = []
        for b in range(B):
            m = int(counts[f, b])
            row.append(frozenset(int(p) for p in rng.choice(pool, size=m, replace=False)) if m else frozenset())
        cells.append(tuple(row))
    return tuple(cells)


def fcd_place(library: Library, B: int, mu: float, seed=0) -> CacheAllocation:
    """Fractional cache distinct: every SBS holds floor(mu n) packets of every file."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    n = library.fragments
    per = int(math.floor(mu * n + 1e-9))
    counts = np.full((library.num_files, B), per, dtype=int)
    return CacheAllocation(_assign_packets(counts, n, seed), n, float(mu), library.file_size)


def probc_counts(library: Library, B: int, mu: float, seed=0) -> np.ndarray:
    """Per-(file, SBS) packet counts of the probabilistic caching rule."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    F, n = library.num_files, library.fragments
    budget = packet_budget(mu, F, n)
    p = library.popularity()
    counts = np.zeros((F, B), dtype=int)
    for b in range(B):
        rng = stream(seed, STREAM_CACHE, 0, b)
        col = counts[:, b]
        stored = 0
        while stored < budget:
            if np.all(col >= n):
                raise RuntimeError("every file fully cached before the budget was reached")
            # draw in batches; a draw of a fully cached file is skipped
            for f in rng.choice(F, size=2 * (budget - stored) + 8, p=p):
                if col[f] < n:
                    col[f] += 1
                    stored += 1
                    if stored == budget:
                        break
    return counts


def probc_place(library: Library, B: int, mu: float, seed=0) -> CacheAllocation:
    """Probabilistic caching: per SBS, Zipf-drawn files gain one packet until the budget is spent."""
    counts = probc_counts(library, B, mu, seed)
    return CacheAllocation(_assign_packets(counts, library.fragments, seed), library.fragments,
                           float(mu), library.file_size)


@dataclass(frozen=True)
class FronthaulLoad:
    multicast: np.ndarray  # s_f over F_req
    unicast: np.ndarray    # s_{f,b}, shape (F_req, B)


def fronthaul_load(E, cache: CacheAllocation, files) -> FronthaulLoad:
    E = np.asarray(E, dtype=float)
    mp = cache.residual[list(files)]
    if E.shape != mp.shape:
        raise ValueError(f"E has shape {E.shape}, expected {mp.shape}")
    S = E * mp
    return FronthaulLoad(S.max(axis=1) if S.size else np.zeros(len(files)), S)


def mds_feasible(m: int, n: int, caches) -> bool:
    """Whether ``m`` coded packets suffice for multicast delivery to all SBSs.

    ``caches`` holds, per SBS, the set of packets of the file it already has.
    """
    caches = [set(c) for c in caches]
    if any(len(c) > n for c in caches):
        raise ValueError("an SBS holds more than n packets")
    union = set().union(*caches) if caches else set()
    missing = max((n - len(c) for c in caches), default=0)
    return m >= len(union) + missing
