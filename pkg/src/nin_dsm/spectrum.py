"""Shared domain types: bands, QoS priorities, demands, and allocations.

Everything is integer MHz on a fixed channel grid; these are pure value
types with no interior mutation, safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

DEFAULT_GUARD_MHZ = 1


class SpectrumError(ValueError):
    """A domain value violates one of its invariants."""


class QosPriority(IntEnum):
    """Total order over service classes; smaller means strictly more important."""

    MISSION_CRITICAL = 0
    NOMADIC = 1
    SENSING = 2


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SpectrumError(msg)


@dataclass(frozen=True)
class Band:
    """A contiguous managed frequency range with a channel grid."""

    lo_mhz: int
    hi_mhz: int
    grid_mhz: int = 1

    def __post_init__(self) -> None:
        _require(self.grid_mhz > 0, "grid_mhz must be positive")
        _require(self.lo_mhz < self.hi_mhz, "band must have lo_mhz < hi_mhz")
        _require(
            (self.hi_mhz - self.lo_mhz) % self.grid_mhz == 0,
            "band width must be divisible by grid_mhz",
        )

    @property
    def width_mhz(self) -> int:
        return self.hi_mhz - self.lo_mhz

    @property
    def channels(self) -> int:
        return self.width_mhz // self.grid_mhz

    @classmethod
    def default_overlayer(cls) -> "Band":
        """The shared 3.7-3.8 GHz overlayer band on a 1 MHz grid."""
        return cls(3700, 3800, 1)

    def to_json(self) -> dict:
        return {"lo_mhz": self.lo_mhz, "hi_mhz": self.hi_mhz, "grid_mhz": self.grid_mhz}

    @classmethod
    def from_json(cls, obj: dict) -> "Band":
        return cls(int(obj["lo_mhz"]), int(obj["hi_mhz"]), int(obj.get("grid_mhz", 1)))


@dataclass(frozen=True)
class DemandProfile:
    """A sub-network's registered frequency requirements."""

    sn_id: str
    priority: QosPriority
    min_bw_mhz: int
    pref_bw_mhz: int
    registered_at: int = 0

    def __post_init__(self) -> None:
        _require(bool(self.sn_id), "sn_id must be non-empty")
        _require(self.min_bw_mhz > 0, "min_bw_mhz must be positive")
        _require(
            self.min_bw_mhz <= self.pref_bw_mhz,
            "min_bw_mhz must not exceed pref_bw_mhz",
        )

    def validate_for(self, band: Band) -> None:
        _require(self.pref_bw_mhz <= band.width_mhz, "pref_bw_mhz exceeds band width")
        _require(
            self.min_bw_mhz % band.grid_mhz == 0
            and self.pref_bw_mhz % band.grid_mhz == 0,
            "bandwidths must be multiples of grid_mhz",
        )

    def to_json(self) -> dict:
        return {
            "sn_id": self.sn_id,
            "priority": int(self.priority),
            "min_bw_mhz": self.min_bw_mhz,
            "pref_bw_mhz": self.pref_bw_mhz,
            "registered_at": self.registered_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DemandProfile":
        return cls(
            sn_id=obj["sn_id"],
            priority=QosPriority(int(obj["priority"])),
            min_bw_mhz=int(obj["min_bw_mhz"]),
            pref_bw_mhz=int(obj["pref_bw_mhz"]),
            registered_at=int(obj.get("registered_at", 0)),
        )


@dataclass(frozen=True)
class SpectrumAllocation:
    """A granted contiguous frequency block."""

    sn_id: str
    start_mhz: int
    width_mhz: int
    priority: QosPriority
    pinned: bool = False
    epoch: int = 0

    def __post_init__(self) -> None:
        _require(bool(self.sn_id), "sn_id must be non-empty")
        _require(self.width_mhz > 0, "width_mhz must be positive")

    @property
    def end_mhz(self) -> int:
        return self.start_mhz + self.width_mhz

    def validate_for(self, band: Band) -> None:
        _require(self.start_mhz >= band.lo_mhz, "allocation starts below band")
        _require(self.end_mhz <= band.hi_mhz, "allocation ends above band")

    def to_json(self) -> dict:
        return {
            "sn_id": self.sn_id,
            "start_mhz": self.start_mhz,
            "width_mhz": self.width_mhz,
            "priority": int(self.priority),
            "pinned": self.pinned,
            "epoch": self.epoch,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectrumAllocation":
        return cls(
            sn_id=obj["sn_id"],
            start_mhz=int(obj["start_mhz"]),
            width_mhz=int(obj["width_mhz"]),
            priority=QosPriority(int(obj["priority"])),
            pinned=bool(obj.get("pinned", False)),
            epoch=int(obj.get("epoch", 0)),
        )


def overlaps(a: SpectrumAllocation, b: SpectrumAllocation, guard_mhz: int = 0) -> bool:
    """True iff the two blocks, each widened by guard_mhz/2, intersect.

    Equivalently: the gap between them is smaller than guard_mhz, or they
    intersect outright. Symmetric; reflexive for guard_mhz >= 0.
    """
    return min(a.end_mhz, b.end_mhz) + guard_mhz > max(a.start_mhz, b.start_mhz)


@dataclass(frozen=True)
class AllocationPlan:
    """One committed (or candidate) assignment of the whole band."""

    epoch: int
    allocations: tuple[SpectrumAllocation, ...] = ()
    rejected: frozenset[str] = field(default_factory=frozenset)

    def validate_for(
        self,
        band: Band,
        guard_mhz: int = DEFAULT_GUARD_MHZ,
        demands: Iterable[DemandProfile] | None = None,
    ) -> None:
        seen: set[str] = set()
        for alloc in self.allocations:
            alloc.validate_for(band)
            _require(alloc.sn_id not in seen, f"duplicate allocation for {alloc.sn_id}")
            seen.add(alloc.sn_id)
        _require(
            not (seen & self.rejected),
            "an sn_id may not be both allocated and rejected",
        )
        allocs = sorted(self.allocations, key=lambda a: a.start_mhz)
        for left, right in zip(allocs, allocs[1:]):
            _require(
                not overlaps(left, right, guard_mhz),
                f"guard violation between {left.sn_id} and {right.sn_id}",
            )
        if demands is not None:
            by_id = {d.sn_id: d for d in demands}
            for alloc in self.allocations:
                demand = by_id.get(alloc.sn_id)
                if demand is None:
                    continue
                _require(
                    demand.min_bw_mhz <= alloc.width_mhz <= demand.pref_bw_mhz,
                    f"width of {alloc.sn_id} outside [min, pref]",
                )

    def allocation_for(self, sn_id: str) -> SpectrumAllocation | None:
        for alloc in self.allocations:
            if alloc.sn_id == sn_id:
                return alloc
        return None

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "allocations": [a.to_json() for a in sorted(self.allocations, key=lambda a: a.start_mhz)],
            "rejected": sorted(self.rejected),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AllocationPlan":
        return cls(
            epoch=int(obj["epoch"]),
            allocations=tuple(SpectrumAllocation.from_json(a) for a in obj["allocations"]),
            rejected=frozenset(obj.get("rejected", [])),
        )


def plan_utilization(plan: AllocationPlan, band: Band) -> float:
    """Fraction of the band covered by granted blocks, in [0, 1]."""
    return sum(a.width_mhz for a in plan.allocations) / band.width_mhz
