"""Physical scenario: node placement, MIMO channels, content library, requests.

Every stochastic routine takes an explicit seed.  Streams are derived from
numpy's Philox bit generator keyed by a ``SeedSequence`` spawn key, one key
per (purpose, index), so SBS ``b`` or user ``k`` sees the same draws
whatever the total number of nodes.  That nesting keeps paired comparisons
across a sweep of B or K fair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# stream tags (first spawn-key element)
_SBS, _USER, _FADING, _REQUEST = range(4)
STREAM_CACHE, STREAM_INIT = 4, 5

MAX_PLACEMENT_RETRIES = 10_000


def seed_sequence(seed, *key: int) -> np.random.SeedSequence:
    """Child seed sequence of ``seed`` addressed by ``key``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(key))


def stream(seed, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    num_sbs: int = 3
    num_users: int = 5
    sbs_antennas: int = 5
    user_antennas: int = 3
    edge_bandwidth: float = 10e6          # B0, Hz
    noise_power: float = dbm_to_watt(-102.0)  # per user, W
    sbs_power: tuple[float, ...] | None = None  # P_b, W; None -> 1 W each
    fronthaul_capacity: float = 10e6      # C_F, bit/s
    alpha_e: float = 1.0
    alpha_f: float = 1.0
    tau0: float | None = None             # None -> 1e-6 * C_F

    def __post_init__(self):
        if self.sbs_power is None:
            object.__setattr__(self, "sbs_power", (1.0,) * self.num_sbs)
        else:
            object.__setattr__(self, "sbs_power", tuple(float(p) for p in self.sbs_power))
        if self.tau0 is None:
            object.__setattr__(self, "tau0", 1e-6 * self.fronthaul_capacity)
        if self.num_sbs < 1 or self.num_users < 0 or self.sbs_antennas < 1 or self.user_antennas < 1:
            raise ValueError("need B >= 1, K >= 0, M >= 1, N >= 1")
        if len(self.sbs_power) != self.num_sbs:
            raise ValueError(f"sbs_power has {len(self.sbs_power)} entries for {self.num_sbs} SBSs")
        if self.edge_bandwidth <= 0 or self.noise_power <= 0 or self.fronthaul_capacity <= 0:
            raise ValueError("B0, noise power and C_F must be positive")
        if any(p <= 0 for p in self.sbs_power):
            raise ValueError("every SBS power budget must be positive")
        if self.alpha_e < 0 or self.alpha_f < 0:
            raise ValueError("latency weights must be nonnegative")
        if not (0 < self.tau0 < self.fronthaul_capacity):
            raise ValueError("tau0 must lie in (0, C_F)")

    @property
    def power(self) -> np.ndarray:
        return np.asarray(self.sbs_power)


@dataclass(frozen=True)
class Placement:
    sbs_positions: np.ndarray   # (B, 2) meters
    user_positions: np.ndarray  # (K, 2) meters
    area_half_width: float
    exclusion_radius: float

    def distances(self) -> np.ndarray:
        """(K, B) user-to-SBS Euclidean distances."""
        diff = self.user_positions[:, None, :] - self.sbs_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


def generate_placement(params: RadioParams, area_half_width: float = 1000.0,
                       exclusion_radius: float = 10.0, seed=0,
                       max_retries: int = MAX_PLACEMENT_RETRIES) -> Placement:
    if not area_half_width > exclusion_radius >= 0:
        raise ValueError("need area_half_width > exclusion_radius >= 0")
    w = area_half_width
    sbs = np.array([stream(seed, _SBS, b).uniform(-w, w, 2) for b in range(params.num_sbs)])
    users = np.empty((params.num_users, 2))
    for k in range(params.num_users):
        rng = stream(seed, _USER, k)
        for _ in range(max_retries):
            p = rng.uniform(-w, w, 2)
            if np.all(np.hypot(*(sbs - p).T) >= exclusion_radius):
                users[k] = p
                break
        else:
            raise RuntimeError(f"user {k}: no position outside the {exclusion_radius} m exclusion "
                               f"zones after {max_retries} draws")
    sbs.setflags(write=False)
    users.setflags(write=False)
    return Placement(sbs.reshape(params.num_sbs, 2), users, float(w), float(exclusion_radius))


def path_loss_db(d) -> np.ndarray:
    return 36.8 + 36.7 * np.log10(d)


@dataclass(frozen=True)
class ChannelSet:
    H: np.ndarray  # (K, B, N, M) complex; H[k, b] is H_{kb}

    @property
    def shape(self):
        return self.H.shape

    def aggregate(self, k: int) -> np.ndarray:
        """H_k = [H_k1 ... H_kB], shape (N, M*B)."""
        K, B, N, M = self.H.shape
        return self.H[k].transpose(1, 0, 2).reshape(N, B * M)

    def aggregates(self) -> np.ndarray:
        K, B, N, M = self.H.shape
        return self.H.transpose(0, 2, 1, 3).reshape(K, N, B * M)


def generate_channels(placement: Placement, params: RadioParams, shadowing_db: float = 7.0,
                      antenna_gain_dbi: float = 5.0, seed=0, fading: np.ndarray | None = None
                      ) -> ChannelSet:
    """Path loss times sqrt(kappa*chi) times CN(0,1) small-scale fading.

    ``fading`` overrides the random (K, B, N, M) small-scale matrices.
    """
    d = placement.distances()
    if np.any(d <= 0):
        raise ValueError("user-SBS distance must be positive")
    K, B = d.shape
    N, M = params.user_antennas, params.sbs_antennas
    if fading is None:
        G = np.empty((K, B, N, M), dtype=complex)
        for k in range(K):
            for b in range(B):
                z = stream(seed, _FADING, k, b).standard_normal((2, N, M))
                G[k, b] = (z[0] + 1j * z[1]) / math.sqrt(2.0)
    else:
        G = np.broadcast_to(np.asarray(fading, dtype=complex), (K, B, N, M))
    amp = 10.0 ** (-path_loss_db(d) / 20.0) * math.sqrt(db_to_lin(shadowing_db) * db_to_lin(antenna_gain_dbi))
    H = amp[:, :, None, None] * G
    if not np.all(np.isfinite(H)):
        raise ValueError("non-finite channel entries")
    H.setflags(write=False)
    return ChannelSet(H)


@dataclass(frozen=True)
class Library:
    num_files: int = 100
    file_size: float = 100e6   # S, bits
    zipf_gamma: float = 1.0
    fragments: int = 5         # n

    def __post_init__(self):
        if self.num_files < 1 or self.fragments < 1 or self.file_size <= 0 or self.zipf_gamma < 0:
            raise ValueError("need F >= 1, n >= 1, S > 0, gamma >= 0")

    @property
    def zipf_c(self) -> float:
        return 1.0 / float(np.sum(np.arange(1, self.num_files + 1, dtype=float) ** -self.zipf_gamma))

    def popularity(self) -> np.ndarray:
        """p(f) = c f^-gamma for f = 1..F (index f-1)."""
        w = np.arange(1, self.num_files + 1, dtype=float) ** -self.zipf_gamma
        return w / w.sum()


@dataclass(frozen=True)
class RequestProfile:
    requested: np.ndarray                 # f_k, 0-based file index per user
    files: tuple[int, ...]                # F_req, sorted unique
    groups: dict[int, tuple[int, ...]] = field(hash=False)  # file -> users

    @classmethod
    def from_requests(cls, requested) -> "RequestProfile":
        req = np.asarray(requested, dtype=int)
        files = tuple(int(f) for f in np.unique(req))
        groups = {f: tuple(int(k) for k in np.flatnonzero(req == f)) for f in files}
        return cls(req, files, groups)

    @property
    def num_groups(self) -> int:
        return len(self.files)

    def group_index(self) -> np.ndarray:
        """Per user, the row of its file within F_req."""
        pos = {f: i for i, f in enumerate(self.files)}
        return np.array([pos[int(f)] for f in self.requested], dtype=int)


def sample_requests(library: Library, K: int, seed=0) -> RequestProfile:
    p = library.popularity()
    req = np.array([stream(seed, _REQUEST, k).choice(library.num_files, p=p) for k in range(K)], dtype=int)
    return RequestProfile.from_requests(req)


@dataclass(frozen=True)
class NetworkScenario:
    params: RadioParams
    placement: Placement
    channels: ChannelSet
    library: Library
    requests: RequestProfile

    @property
    def B(self) -> int:
        return self.params.num_sbs

    @property
    def K(self) -> int:
        return self.params.num_users

    @property
    def M(self) -> int:
        return self.params.sbs_antennas

    @property
    def F_req(self) -> int:
        return self.requests.num_groups

    def nearest_sbs(self) -> np.ndarray:
        # argmin returns the first minimum, so ties go to the lower SBS index
        return np.argmin(self.placement.distances(), axis=1)


def make_scenario(params: RadioParams, library: Library, seed=0, area_half_width: float = 1000.0,
                  exclusion_radius: float = 10.0, shadowing_db: float = 7.0,
                  antenna_gain_dbi: float = 5.0) -> NetworkScenario:
    placement = generate_placement(params, area_half_width, exclusion_radius, seed)
    channels = generate_channels(placement, params, shadowing_db, antenna_gain_dbi, seed)
    requests = sample_requests(library, params.num_users, seed)
    return NetworkScenario(params, placement, channels, library, requests)
