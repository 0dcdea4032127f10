"""System-model types shared by every scheme.

Users and files are 1-indexed to match the combinatorial conventions used
throughout (subsets of [K], files in [N]). Memory and load are exact
rationals in file units; floats appear only in display output.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache as _lru_cache

import numpy as np

from .errors import ConfigurationError
from .gf import check_modulus, rref


@dataclass(frozen=True)
class SystemParams:
    """The (K', K, N) hotplug triple plus t, q and the B scale factor."""

    k_active: int
    k_total: int
    n_files: int
    q: int
    t: int | None = None
    b_factor: int = 1

    def __post_init__(self):
        check_modulus(self.q)
        if not 1 <= self.k_active <= self.k_total:
            raise ConfigurationError("need 1 <= k_active <= k_total")
        if self.n_files < 1:
            raise ConfigurationError("need at least one file")
        if self.b_factor < 1:
            raise ConfigurationError("b_factor must be a positive integer")

    def with_t(self, t: int | None) -> "SystemParams":
        return SystemParams(self.k_active, self.k_total, self.n_files, self.q, t, self.b_factor)

    def expanded_for_virtual_users(self) -> "SystemParams":
        n = self.n_files
        return SystemParams(n * self.k_active, n * self.k_total, n, self.q, self.t, self.b_factor)


@_lru_cache(maxsize=4096)
def _subsets_cached(items: tuple, size: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(items, size))


def subsets(ground, size: int) -> list[tuple[int, ...]]:
    """All size-subsets in lexicographic order. ground may be a count or an iterable.

    The result is cached and shared; callers must not mutate it.
    """
    if isinstance(ground, int):
        items = tuple(range(1, ground + 1))
    else:
        items = tuple(sorted(ground))
    if size > len(items):
        return []
    return _subsets_cached(items, size)


def subset_index(subset_list: list[tuple[int, ...]]) -> dict[tuple[int, ...], int]:
    return {s: i for i, s in enumerate(subset_list)}


class FileLibrary:
    """N files of b_symbols uniform GF(q) symbols each."""

    def __init__(self, files: list[np.ndarray], modulus: int):
        check_modulus(modulus)
        if not files:
            raise ConfigurationError("library must contain at least one file")
        length = len(files[0])
        for f in files:
            if len(f) != length:
                raise ConfigurationError("all files must have the same length")
        self.files = [np.mod(np.asarray(f, dtype=np.int64), modulus) for f in files]
        self.modulus = modulus
        self.b_symbols = length

    @classmethod
    def random(cls, n_files: int, b_symbols: int, q: int, seed: int = 0) -> "FileLibrary":
        rng = np.random.default_rng(seed)
        return cls([rng.integers(0, q, size=b_symbols) for _ in range(n_files)], q)

    @classmethod
    def repeated(cls, n_files: int, b_symbols: int, q: int, seed: int = 0) -> "FileLibrary":
        """Adversarial library: every file is the same realization."""
        rng = np.random.default_rng(seed)
        f = rng.integers(0, q, size=b_symbols)
        return cls([f.copy() for _ in range(n_files)], q)

    def blocks(self, subpacketization: int) -> np.ndarray:
        """View the library as an (N, L, B/L) block tensor."""
        if self.b_symbols % subpacketization:
            raise ConfigurationError(
                f"B={self.b_symbols} not divisible by subpacketization {subpacketization}"
            )
        piece = self.b_symbols // subpacketization
        return np.stack([f.reshape(subpacketization, piece) for f in self.files])

    def file(self, index: int) -> np.ndarray:
        return self.files[index - 1]


@dataclass(frozen=True)
class DemandVector:
    """Active user set I plus one demanded file index per active user."""

    active: tuple[int, ...]
    demands: dict[int, int]

    def __post_init__(self):
        object.__setattr__(self, "active", tuple(sorted(self.active)))
        if set(self.demands) != set(self.active):
            raise ConfigurationError("demands must be defined exactly on the active set")

    def demand_list(self) -> list[int]:
        return [self.demands[u] for u in self.active]


@dataclass
class PlacementOutcome:
    """Per-user cache symbols plus the metadata the server retains.

    caches hold the symbol payload counted against M*B; user_meta holds
    O(1)-in-B private material (key vectors, local randomness); meta holds
    the public construction (generator matrices, index maps); server holds
    state only the server may consult during delivery (coded block tables).
    """

    caches: dict[int, np.ndarray]
    user_meta: dict[int, dict]
    meta: dict
    b_symbols: int
    subpacketization: int
    server: dict = field(default_factory=dict)

    def cache_symbols(self, user: int) -> int:
        return int(self.caches[user].size)

    def memory_fraction(self, user: int) -> Fraction:
        return Fraction(self.cache_symbols(user), self.b_symbols)


def _canon(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


@dataclass
class DeliveryTranscript:
    """Broadcast payload (labelled symbol vectors) plus O(1) side information."""

    payload: list[tuple[str, np.ndarray]]
    side_info: dict

    def payload_symbols(self) -> int:
        return int(sum(v.size for _, v in self.payload))

    def load(self, b_symbols: int) -> Fraction:
        return Fraction(self.payload_symbols(), b_symbols)

    def side_info_json(self) -> str:
        return json.dumps(_canon(self.side_info), sort_keys=True, separators=(",", ":"))

    def side_info_bytes(self) -> int:
        return len(self.side_info_json().encode())

    def payload_bytes(self) -> bytes:
        chunks = []
        for label, v in self.payload:
            chunks.append(label.encode())
            chunks.append(v.astype(np.int64).tobytes())
        return b"|".join(chunks)


@dataclass(frozen=True)
class TradeoffPoint:
    m: Fraction
    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "m", Fraction(self.m))
        object.__setattr__(self, "r", Fraction(self.r))
        if self.m < 0 or self.r < 0:
            raise ConfigurationError("memory and load must be non-negative")

    def as_floats(self) -> tuple[float, float]:
        return float(self.m), float(self.r)


def _cross(o: TradeoffPoint, a: TradeoffPoint, b: TradeoffPoint) -> Fraction:
    return (a.m - o.m) * (b.r - o.r) - (a.r - o.r) * (b.m - o.m)


class TradeoffCurve:
    """Lower convex envelope of corner points, made non-increasing in M.

    Memory sharing means any convex combination of achievable points is
    achievable and extra memory never hurts, so the curve evaluates as the
    non-increasing lower hull of its corner points.
    """

    def __init__(self, points: list[TradeoffPoint], name: str = ""):
        if not points:
            raise ConfigurationError("a tradeoff curve needs at least one point")
        self.name = name
        self.points = sorted(set(points), key=lambda p: (p.m, p.r))
        self.vertices = self._lower_hull(self.points)

    @staticmethod
    def _lower_hull(points: list[TradeoffPoint]) -> list[TradeoffPoint]:
        hull: list[TradeoffPoint] = []
        for p in points:
            if hull and hull[-1].m == p.m:
                continue  # points sorted by (m, r): keep the lower one
            while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
                hull.pop()
            hull.append(p)
        # Enforce non-increasing load: truncate after the global minimum.
        best = min(range(len(hull)), key=lambda i: hull[i].r)
        return hull[: best + 1]

    @property
    def min_m(self) -> Fraction:
        return self.vertices[0].m

    @property
    def max_m(self) -> Fraction:
        return self.vertices[-1].m

    def eval(self, m: Fraction) -> Fraction:
        """Envelope value at memory m; defined for m >= min_m."""
        m = Fraction(m)
        if m < self.min_m:
            raise ConfigurationError(f"curve {self.name!r} undefined below M={self.min_m}")
        if m >= self.max_m:
            return self.vertices[-1].r
        verts = self.vertices
        lo, hi = 0, len(verts) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if verts[mid].m <= m:
                lo = mid
            else:
                hi = mid
        a, b = verts[lo], verts[hi]
        return a.r + (b.r - a.r) * (m - a.m) / (b.m - a.m)

    def is_vertex(self, m: Fraction, r: Fraction) -> bool:
        return any(v.m == m and v.r == r for v in self.vertices)


def leader_set(rows: np.ndarray, active: list[int], q: int) -> list[int]:
    """Greedy-lexicographic leader selection.

    Scans users in increasing index order and keeps a user iff its demand or
    query row increases the rank accumulated so far, so rank(rows[L]) equals
    rank(rows) and L is minimal under the scan order.
    """
    rows = np.mod(np.asarray(rows, dtype=np.int64), q)
    if rows.shape[0] != len(active):
        raise ConfigurationError("one row per active user required")
    order = sorted(range(len(active)), key=lambda i: active[i])
    leaders = []
    basis: list[tuple[int, np.ndarray]] = []  # (pivot column, normalized row)
    for i in order:
        v = rows[i].copy()
        for pivot, b in basis:
            if v[pivot]:
                v = (v - v[pivot] * b) % q
        nz = np.nonzero(v)[0]
        if nz.size:
            pivot = int(nz[0])
            v = (v * pow(int(v[pivot]), -1, q)) % q
            basis.append((pivot, v))
            leaders.append(active[i])
    return leaders
