"""Deterministic spectrum allocation engine.

Admission is priority-lexicographic, sizing is water-filling in admission
order, and layout packs blocks left-to-right with guard bands while keeping
previously committed mission-critical blocks at their pinned start. Both
admission and sizing consult an exact packing-feasibility check, so a
demand is only admitted (or grown) when a concrete guard-respecting layout
exists for it; without pinned blocks this reduces to a simple capacity sum.

`oracle_plan` is a test-only exhaustive reference for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .spectrum import (
    AllocationPlan,
    Band,
    DemandProfile,
    QosPriority,
    SpectrumAllocation,
    SpectrumError,
)


@dataclass(frozen=True)
class AllocatorInput:
    band: Band
    guard_mhz: int
    demands: tuple[DemandProfile, ...]
    pinned: tuple[SpectrumAllocation, ...] = ()

    def validate(self) -> None:
        ids = [d.sn_id for d in self.demands]
        if len(set(ids)) != len(ids):
            raise SpectrumError("duplicate sn_id in demand list")
        by_id = {d.sn_id: d for d in self.demands}
        for d in self.demands:
            d.validate_for(self.band)
        pins = sorted(self.pinned, key=lambda p: p.start_mhz)
        for p in pins:
            p.validate_for(self.band)
            owner = by_id.get(p.sn_id)
            if owner is None or owner.priority != QosPriority.MISSION_CRITICAL:
                raise SpectrumError(
                    f"pinned block {p.sn_id} has no priority-0 demand"
                )
        for left, right in zip(pins, pins[1:]):
            if right.start_mhz - left.end_mhz < self.guard_mhz:
                raise SpectrumError("pinned blocks violate guard spacing")


def admission_order(demands: list[DemandProfile] | tuple[DemandProfile, ...]) -> list[DemandProfile]:
    """Total, stable order: by priority level, then registration time, then id."""
    ids = [d.sn_id for d in demands]
    if len(set(ids)) != len(ids):
        raise SpectrumError("duplicate sn_id in demand list")
    return sorted(demands, key=lambda d: (int(d.priority), d.registered_at, d.sn_id))


def _effective_min(demand: DemandProfile, pinned_by_sn: dict[str, SpectrumAllocation]) -> int:
    # A pinned block's committed width counts as its owner's floor.
    pin = pinned_by_sn.get(demand.sn_id)
    return pin.width_mhz if pin is not None else demand.min_bw_mhz


def _free_gaps(
    placed: list[SpectrumAllocation], band: Band, guard_mhz: int
) -> list[tuple[int, int]]:
    """Usable (start, width) segments honoring the guard against neighbors."""
    gaps: list[tuple[int, int]] = []
    cursor = band.lo_mhz
    for alloc in sorted(placed, key=lambda a: a.start_mhz):
        hi = alloc.start_mhz - guard_mhz
        if hi > cursor:
            gaps.append((cursor, hi - cursor))
        cursor = max(cursor, alloc.end_mhz + guard_mhz)
    if band.hi_mhz > cursor:
        gaps.append((cursor, band.hi_mhz - cursor))
    return gaps


def _gap_assignment_feasible(
    gap_widths: list[int], items: list[int], guard_mhz: int
) -> bool:
    """Can blocks of the given widths be packed into the free gaps?"""
    if not items:
        return True
    if not gap_widths:
        return False

    def rec(idx: int, loads: tuple[int, ...]) -> bool:
        if idx == len(items):
            return True
        width = items[idx]
        tried: set[int] = set()
        for g, cap in enumerate(gap_widths):
            load = loads[g]
            need = width if load == 0 else load + guard_mhz + width
            if need <= cap and need not in tried:
                tried.add(need)
                if rec(idx + 1, loads[:g] + (need,) + loads[g + 1 :]):
                    return True
        return False

    return rec(0, tuple(0 for _ in gap_widths))


def _pin_growth_limit(
    pin: SpectrumAllocation,
    pinned_by_sn: dict[str, SpectrumAllocation],
    inp: AllocatorInput,
) -> int:
    # Rightward growth only, up to the next pinned block or the band edge.
    nexts = [
        p.start_mhz for p in pinned_by_sn.values() if p.start_mhz > pin.start_mhz
    ]
    return (min(nexts) - inp.guard_mhz) if nexts else inp.band.hi_mhz


def _feasible(
    inp: AllocatorInput,
    pinned_by_sn: dict[str, SpectrumAllocation],
    subset: list[DemandProfile],
    widths: dict[str, int],
) -> bool:
    """True when the size vector admits a guard-respecting layout."""
    total = sum(widths.values()) + inp.guard_mhz * max(0, len(subset) - 1)
    if total > inp.band.width_mhz:
        return False
    if not pinned_by_sn:
        return True
    for d in subset:
        pin = pinned_by_sn.get(d.sn_id)
        if pin is None:
            continue
        if pin.start_mhz + widths[d.sn_id] > _pin_growth_limit(pin, pinned_by_sn, inp):
            return False
    # Gap geometry depends on the trial widths of grown pinned blocks.
    in_subset = {d.sn_id for d in subset}
    obstacles = [
        pin if pin.sn_id not in in_subset
        else SpectrumAllocation(
            sn_id=pin.sn_id,
            start_mhz=pin.start_mhz,
            width_mhz=widths[pin.sn_id],
            priority=pin.priority,
            pinned=True,
        )
        for pin in pinned_by_sn.values()
    ]
    gap_bounds = _free_gaps(obstacles, inp.band, inp.guard_mhz)
    free_items = [widths[d.sn_id] for d in subset if d.sn_id not in pinned_by_sn]
    return _gap_assignment_feasible(
        [w for _, w in gap_bounds], free_items, inp.guard_mhz
    )


def _place(
    inp: AllocatorInput,
    pinned_by_sn: dict[str, SpectrumAllocation],
    subset: list[DemandProfile],
    widths: dict[str, int],
    epoch: int,
) -> list[SpectrumAllocation]:
    """Deterministic lowest-frequency placement of a feasible size vector."""
    placed = [
        SpectrumAllocation(
            sn_id=d.sn_id,
            start_mhz=pinned_by_sn[d.sn_id].start_mhz,
            width_mhz=widths[d.sn_id],
            priority=d.priority,
            pinned=True,
            epoch=epoch,
        )
        for d in subset
        if d.sn_id in pinned_by_sn
    ]
    free = [d for d in subset if d.sn_id not in pinned_by_sn]

    def rec(idx: int, acc: list[SpectrumAllocation]) -> list[SpectrumAllocation] | None:
        if idx == len(free):
            return list(acc)
        demand = free[idx]
        for lo, cap in _free_gaps(placed + acc, inp.band, inp.guard_mhz):
            if cap >= widths[demand.sn_id]:
                acc.append(
                    SpectrumAllocation(
                        sn_id=demand.sn_id,
                        start_mhz=lo,
                        width_mhz=widths[demand.sn_id],
                        priority=demand.priority,
                        epoch=epoch,
                    )
                )
                out = rec(idx + 1, acc)
                if out is not None:
                    return out
                acc.pop()
        return None

    out = rec(0, [])
    if out is None:
        raise SpectrumError("no placement for a feasible size vector")
    return sorted(placed + out, key=lambda a: a.start_mhz)


def _admit(
    order: list[DemandProfile],
    pinned_by_sn: dict[str, SpectrumAllocation],
    inp: AllocatorInput,
) -> tuple[list[DemandProfile], frozenset[str]]:
    admitted: list[DemandProfile] = []
    for demand in order:
        candidate = admitted + [demand]
        mins = {d.sn_id: _effective_min(d, pinned_by_sn) for d in candidate}
        if _feasible(inp, pinned_by_sn, candidate, mins):
            admitted.append(demand)
    rejected = frozenset(d.sn_id for d in order if d not in admitted)
    return admitted, rejected


def _size(
    admitted: list[DemandProfile],
    pinned_by_sn: dict[str, SpectrumAllocation],
    inp: AllocatorInput,
) -> dict[str, int]:
    """Water-fill in admission order; each grant keeps the plan placeable."""
    grid = inp.band.grid_mhz
    widths = {d.sn_id: _effective_min(d, pinned_by_sn) for d in admitted}
    for demand in admitted:
        floor = widths[demand.sn_id]
        for width in range(demand.pref_bw_mhz, floor, -grid):
            trial = dict(widths)
            trial[demand.sn_id] = width
            if _feasible(inp, pinned_by_sn, admitted, trial):
                widths[demand.sn_id] = width
                break
    return widths


def compute_plan(inp: AllocatorInput, prev_epoch: int = 0) -> AllocationPlan:
    """Run admission, water-filling sizing, and guarded layout; pure and total."""
    inp.validate()
    epoch = prev_epoch + 1
    order = admission_order(list(inp.demands))
    pinned_by_sn = {p.sn_id: p for p in inp.pinned}

    admitted, rejected = _admit(order, pinned_by_sn, inp)
    widths = _size(admitted, pinned_by_sn, inp)
    placed = _place(inp, pinned_by_sn, admitted, widths, epoch)
    plan = AllocationPlan(epoch=epoch, allocations=tuple(placed), rejected=rejected)
    plan.validate_for(inp.band, inp.guard_mhz)
    return plan


# --- exhaustive reference (test-only) ---------------------------------------

ORACLE_MAX_DEMANDS = 4
ORACLE_MAX_CHANNELS = 12


def _objective_weight(priority: QosPriority) -> int:
    return 4 ** (2 - int(priority))


def plan_objective(plan: AllocationPlan) -> int:
    """Priority-weighted total width; the oracle's bandwidth score."""
    return sum(_objective_weight(a.priority) * a.width_mhz for a in plan.allocations)


def _best_widths(
    inp: AllocatorInput,
    pinned_by_sn: dict[str, SpectrumAllocation],
    subset: list[DemandProfile],
) -> dict[str, int]:
    """Exhaustively maximize (weighted width, widths lex in admission order)."""
    grid = inp.band.grid_mhz
    mins = {d.sn_id: _effective_min(d, pinned_by_sn) for d in subset}
    best: tuple[int, tuple[int, ...]] | None = None
    best_widths: dict[str, int] = dict(mins)
    ranges = [range(mins[d.sn_id], d.pref_bw_mhz + 1, grid) for d in subset]
    for combo in itertools.product(*ranges):
        widths = {d.sn_id: w for d, w in zip(subset, combo)}
        if not _feasible(inp, pinned_by_sn, subset, widths):
            continue
        score = sum(_objective_weight(d.priority) * widths[d.sn_id] for d in subset)
        key = (score, combo)
        if best is None or key > best:
            best = key
            best_widths = widths
    return best_widths


def oracle_plan(inp: AllocatorInput, prev_epoch: int = 0) -> AllocationPlan:
    """Exhaustive reference allocator for small instances.

    Maximizes, lexicographically: admission by priority order, then
    priority-weighted total width, then earlier demands' widths.
    """
    inp.validate()
    if len(inp.demands) > ORACLE_MAX_DEMANDS:
        raise SpectrumError("oracle_plan refuses instances with more than 4 demands")
    if inp.band.channels > ORACLE_MAX_CHANNELS:
        raise SpectrumError("oracle_plan refuses bands wider than 12 channels")

    order = admission_order(list(inp.demands))
    pinned_by_sn = {p.sn_id: p for p in inp.pinned}

    admitted, rejected = _admit(order, pinned_by_sn, inp)
    widths = _best_widths(inp, pinned_by_sn, admitted)
    epoch = prev_epoch + 1
    allocs = tuple(_place(inp, pinned_by_sn, admitted, widths, epoch))
    plan = AllocationPlan(epoch=epoch, allocations=allocs, rejected=rejected)
    plan.validate_for(inp.band, inp.guard_mhz)
    return plan
