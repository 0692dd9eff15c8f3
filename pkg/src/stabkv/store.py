"""Replicated key-value store core: vector clocks, versions, quorums.

The pieces here are mode-independent: the discrete-event and threaded
clusters in :mod:`stabkv.cluster` both drive the same replica and
resolution logic.  Writes fan out to every replica; a replica keeps only
mutually concurrent versions per key, and reads resolve survivors with
last-write-wins (physical timestamp, then writer id).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import Value


class QuorumError(RuntimeError):
    """Too few replica replies within the retry budget."""


class Ordering(enum.Enum):
    BEFORE = "before"
    AFTER = "after"
    EQUAL = "equal"
    CONCURRENT = "concurrent"


@dataclass(frozen=True)
class VectorClock:
    """Sparse per-writer counters; absent entries are zero."""

    counters: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def of(mapping: Mapping[str, int]) -> "VectorClock":
        return VectorClock(tuple(sorted((w, c) for w, c in mapping.items() if c > 0)))

    def as_dict(self) -> dict[str, int]:
        return dict(self.counters)

    def advanced(self, writer: str, floor: int = 0) -> "VectorClock":
        """Bump the writer's counter past both its current entry and ``floor``."""
        d = self.as_dict()
        d[writer] = max(d.get(writer, 0), floor) + 1
        return VectorClock.of(d)

    def merged(self, other: "VectorClock") -> "VectorClock":
        d = self.as_dict()
        for w, c in other.counters:
            if c > d.get(w, 0):
                d[w] = c
        return VectorClock.of(d)

    def compare(self, other: "VectorClock") -> Ordering:
        a, b = self.as_dict(), other.as_dict()
        le = all(c <= b.get(w, 0) for w, c in a.items())
        ge = all(c <= a.get(w, 0) for w, c in b.items())
        if le and ge:
            return Ordering.EQUAL
        if le:
            return Ordering.BEFORE
        if ge:
            return Ordering.AFTER
        return Ordering.CONCURRENT


def vc_compare(a: VectorClock, b: VectorClock) -> Ordering:
    """Pointwise comparison of two vector clocks."""
    return a.compare(b)


@dataclass(frozen=True)
class VersionedValue:
    clock: VectorClock
    value: Value
    wall_ts: float
    writer: str

    def lww_key(self) -> tuple[float, str]:
        return (self.wall_ts, self.writer)


class Consistency(enum.Enum):
    SEQUENTIAL = "sequential"
    EVENTUAL = "eventual"


@dataclass(frozen=True)
class QuorumConfig:
    """Replication factor plus read/write quorums and the retry policy."""

    n: int = 3
    r: int = 1
    w: int = 1
    timeout_ms: float = 500.0
    attempts: int = 2

    def __post_init__(self):
        if not (1 <= self.r <= self.n and 1 <= self.w <= self.n):
            raise ValueError(f"invalid quorum R{self.r}W{self.w} for N{self.n}")
        if self.timeout_ms <= 0 or self.attempts < 1:
            raise ValueError("timeout_ms must be > 0 and attempts >= 1")

    @property
    def label(self) -> str:
        return f"N{self.n}R{self.r}W{self.w}"

    @staticmethod
    def parse(label: str, timeout_ms: float = 500.0, attempts: int = 2) -> "QuorumConfig":
        """Parse labels like ``N3R1W1`` (or ``R2W2`` with N defaulting to 3)."""
        import re

        m = re.fullmatch(r"(?:N(\d+))?R(\d+)W(\d+)", label.strip())
        if not m:
            raise ValueError(f"cannot parse quorum label {label!r}")
        n = int(m.group(1)) if m.group(1) else 3
        return QuorumConfig(n, int(m.group(2)), int(m.group(3)),
                            timeout_ms=timeout_ms, attempts=attempts)


def classify(q: QuorumConfig) -> Consistency:
    """Sequential iff R + W > N and W > N/2, else eventual."""
    if q.r + q.w > q.n and q.w > q.n / 2:
        return Consistency.SEQUENTIAL
    return Consistency.EVENTUAL


@dataclass(frozen=True)
class ResolutionPolicy:
    """Conflict resolution for mutually concurrent versions.

    Only last-write-wins is provided; the tiebreak (wall_ts, writer) is a
    total order, so resolution always returns a member of its input.
    """

    strategy: str = "last-write-wins"


def resolve(policy: ResolutionPolicy, versions: Iterable[VersionedValue]) -> VersionedValue:
    versions = list(versions)
    if not versions:
        raise ValueError("resolve() requires at least one version")
    return max(versions, key=VersionedValue.lww_key)


def prune_dominated(versions: Iterable[VersionedValue]) -> list[VersionedValue]:
    """Drop versions whose clock is dominated (or duplicated) by another."""
    vs = list(versions)
    keep: list[VersionedValue] = []
    for i, v in enumerate(vs):
        dominated = False
        for j, u in enumerate(vs):
            if i == j:
                continue
            c = v.clock.compare(u.clock)
            if c is Ordering.BEFORE or (c is Ordering.EQUAL and j < i):
                dominated = True
                break
        if not dominated:
            keep.append(v)
    return keep


class ReplicaStore:
    """One replica: per-key lists of mutually concurrent versions."""

    def __init__(self, replica_id: int):
        self.replica_id = replica_id
        self.data: dict[str, list[VersionedValue]] = {}

    def apply_put(self, key: str, version: VersionedValue) -> None:
        existing = self.data.get(key)
        if not existing:
            self.data[key] = [version]
            return
        kept: list[VersionedValue] = []
        for v in existing:
            c = version.clock.compare(v.clock)
            if c is Ordering.BEFORE or c is Ordering.EQUAL:
                return  # obsolete or duplicate write: ignore
            if c is Ordering.CONCURRENT:
                kept.append(v)
            # AFTER: v is dominated, drop it
        kept.append(version)
        self.data[key] = kept
        assert _pairwise_concurrent(kept), "replica kept a dominated version"

    def read(self, key: str) -> tuple[VersionedValue, ...]:
        return tuple(self.data.get(key, ()))


def _pairwise_concurrent(versions: list[VersionedValue]) -> bool:
    for i, v in enumerate(versions):
        for u in versions[i + 1 :]:
            if v.clock.compare(u.clock) is not Ordering.CONCURRENT:
                return False
    return True


def merge_reads(
    responses: Iterable[tuple[VersionedValue, ...]],
) -> list[VersionedValue]:
    """Union replica responses and drop dominated/duplicate versions."""
    seen: dict[tuple, VersionedValue] = {}
    for resp in responses:
        for v in resp:
            ident = (v.clock.counters, v.wall_ts, v.writer)
            seen.setdefault(ident, v)
    return prune_dominated(seen.values())


@dataclass
class LatencyModel:
    """Per-message delay in milliseconds: fixed, or uniform in [lo, hi]."""

    kind: str = "uniform"
    lo: float = 0.5
    hi: float = 1.5

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError("latency bounds must satisfy 0 <= lo <= hi")

    @staticmethod
    def with_mean(mean_ms: float) -> "LatencyModel":
        """Uniform spread of +/-50% around the mean."""
        if mean_ms <= 0:
            return LatencyModel("fixed", 0.0, 0.0)
        return LatencyModel("uniform", 0.5 * mean_ms, 1.5 * mean_ms)

    def sample(self, rng) -> float:
        if self.kind == "fixed":
            return self.lo
        return rng.uniform(self.lo, self.hi)
