import random
from dataclasses import replace

import pytest

from nin_dsm.allocator import (
    AllocatorInput,
    admission_order,
    compute_plan,
    oracle_plan,
    plan_objective,
)
from nin_dsm.spectrum import (
    Band,
    DemandProfile,
    QosPriority,
    SpectrumAllocation,
    SpectrumError,
)

BAND = Band.default_overlayer()
SMALL = Band(0, 60, 5)


def demand(sn, prio, min_bw, pref_bw, at=0):
    return DemandProfile(sn, QosPriority(prio), min_bw, pref_bw, at)


def make_input(demands, pinned=(), band=BAND, guard=1):
    return AllocatorInput(band=band, guard_mhz=guard, demands=tuple(demands), pinned=tuple(pinned))


class TestAdmissionOrder:
    def test_priority_dominates_time(self):
        d2 = demand("SN-2", 2, 20, 60, at=0)
        d1 = demand("SN-1", 0, 10, 10, at=5)
        assert [d.sn_id for d in admission_order([d2, d1])] == ["SN-1", "SN-2"]

    def test_id_tiebreak(self):
        a = demand("A", 1, 10, 10, at=3)
        b = demand("B", 1, 10, 10, at=3)
        assert [d.sn_id for d in admission_order([b, a])] == ["A", "B"]

    def test_walkthrough_order(self):
        ds = [demand("SN-1", 0, 10, 10), demand("SN-2", 2, 20, 60), demand("SN-3", 1, 15, 30)]
        assert [d.sn_id for d in admission_order(ds)] == ["SN-1", "SN-3", "SN-2"]

    def test_duplicate_id_rejected(self):
        with pytest.raises(SpectrumError):
            admission_order([demand("A", 1, 10, 10), demand("A", 2, 10, 10)])


class TestComputePlan:
    def test_walkthrough_before_agv(self):
        plan = compute_plan(
            make_input([demand("SN-1", 0, 10, 10, 1), demand("SN-2", 2, 20, 60, 2)])
        )
        by_id = {a.sn_id: a for a in plan.allocations}
        assert (by_id["SN-1"].start_mhz, by_id["SN-1"].width_mhz) == (3700, 10)
        assert (by_id["SN-2"].start_mhz, by_id["SN-2"].width_mhz) == (3711, 60)
        assert plan.rejected == frozenset()

    def test_walkthrough_after_agv_call(self):
        pin = SpectrumAllocation("SN-1", 3700, 10, QosPriority.MISSION_CRITICAL, pinned=True)
        plan = compute_plan(
            make_input(
                [
                    demand("SN-1", 0, 10, 10, 1),
                    demand("SN-2", 2, 20, 60, 2),
                    demand("SN-3", 1, 15, 30, 3),
                ],
                pinned=[pin],
            ),
            prev_epoch=1,
        )
        by_id = {a.sn_id: a for a in plan.allocations}
        assert (by_id["SN-1"].start_mhz, by_id["SN-1"].width_mhz) == (3700, 10)
        assert (by_id["SN-3"].start_mhz, by_id["SN-3"].width_mhz) == (3711, 30)
        assert (by_id["SN-2"].start_mhz, by_id["SN-2"].width_mhz) == (3742, 58)
        assert plan.rejected == frozenset()
        assert plan.epoch == 2

    def test_exact_fill_single_demand(self):
        plan = compute_plan(make_input([demand("SN-1", 0, 100, 100)]))
        assert [a.to_json() | {"epoch": 0} for a in plan.allocations] == [
            SpectrumAllocation("SN-1", 3700, 100, QosPriority.MISSION_CRITICAL).to_json()
        ]

    def test_mins_cannot_coexist(self):
        plan = compute_plan(
            make_input([demand("A", 0, 60, 60, 1), demand("B", 1, 60, 60, 2)])
        )
        assert {a.sn_id for a in plan.allocations} == {"A"}
        assert plan.rejected == frozenset({"B"})

    def test_pinned_without_demand_rejected(self):
        pin = SpectrumAllocation("ghost", 3700, 10, QosPriority.MISSION_CRITICAL, pinned=True)
        with pytest.raises(SpectrumError):
            compute_plan(make_input([demand("A", 1, 10, 10)], pinned=[pin]))


def random_input(rng, band=BAND, guard=1, allow_pinned=True):
    n = rng.randint(1, 6)
    demands = []
    for i in range(n):
        prio = rng.randint(0, 2)
        min_bw = rng.randint(1, 60)
        pref_bw = min(band.width_mhz, min_bw + rng.randint(0, 40))
        demands.append(demand(f"SN-{i}", prio, min_bw, pref_bw, at=rng.randint(0, 9)))
    pinned = []
    if allow_pinned:
        cursor = band.lo_mhz
        for d in demands:
            if d.priority == QosPriority.MISSION_CRITICAL and rng.random() < 0.5:
                width = d.min_bw_mhz
                if cursor + width <= band.hi_mhz:
                    pinned.append(
                        SpectrumAllocation(d.sn_id, cursor, width, d.priority, pinned=True)
                    )
                    cursor += width + guard
    return make_input(demands, pinned, band=band, guard=guard)


class TestComputePlanProperties:
    def test_validity_and_determinism(self):
        rng = random.Random(20240301)
        for _ in range(1000):
            inp = random_input(rng)
            plan = compute_plan(inp)
            plan.validate_for(inp.band, inp.guard_mhz, inp.demands)
            again = compute_plan(inp)
            assert again == plan

    def test_admission_monotonicity(self):
        # re-run the admission walk independently of the allocator internals
        rng = random.Random(987)
        for _ in range(1000):
            inp = random_input(rng, allow_pinned=False)
            plan = compute_plan(inp)
            order = sorted(
                inp.demands, key=lambda d: (int(d.priority), d.registered_at, d.sn_id)
            )
            expected, total, count = set(), 0, 0
            for d in order:
                if total + d.min_bw_mhz + inp.guard_mhz * count <= inp.band.width_mhz:
                    expected.add(d.sn_id)
                    total += d.min_bw_mhz
                    count += 1
            assert {a.sn_id for a in plan.allocations} == expected

    def test_stickiness(self):
        rng = random.Random(555)
        checked = 0
        for _ in range(1000):
            inp = random_input(rng)
            if not inp.pinned:
                continue
            plan = compute_plan(inp)
            by_id = {a.sn_id: a for a in plan.allocations}
            mins = {d.sn_id: d.min_bw_mhz for d in inp.demands}
            for pin in inp.pinned:
                got = by_id.get(pin.sn_id)
                if got is None:
                    continue  # pinned owner lost admission to earlier demands
                assert got.start_mhz == pin.start_mhz
                assert got.width_mhz >= mins[pin.sn_id]
                assert got.width_mhz >= pin.width_mhz
                checked += 1
        assert checked > 100

    def test_local_maximality(self):
        rng = random.Random(777)
        for _ in range(1000):
            inp = random_input(rng)
            plan = compute_plan(inp)
            prefs = {d.sn_id: d.pref_bw_mhz for d in inp.demands}
            others = lambda sn: [a for a in plan.allocations if a.sn_id != sn]
            for alloc in plan.allocations:
                if alloc.width_mhz >= prefs[alloc.sn_id]:
                    continue
                # one more grid unit to the right must hit the guard or band edge
                grown_end = alloc.end_mhz + inp.band.grid_mhz
                blocked = grown_end > inp.band.hi_mhz or any(
                    grown_end + inp.guard_mhz > o.start_mhz > alloc.start_mhz
                    for o in others(alloc.sn_id)
                )
                assert blocked, f"{alloc.sn_id} could grow rightward"


def enumerate_small_instances():
    """Deterministic corpus of oracle-checkable instances on a 5 MHz grid."""
    pairs = []
    for min_bw in (5, 10, 15, 25):
        for extra in (0, 10, 20):
            pref = min(min_bw + extra, SMALL.width_mhz)
            pairs.append((min_bw, pref))
    pairs = sorted(set(pairs))
    priorities = {1: (0,), 2: (0, 2), 3: (0, 1, 2), 4: (0, 1, 2, 2)}
    instances = []
    import itertools

    for k in (2, 3, 4):
        for combo in itertools.product(pairs, repeat=k):
            demands = [
                demand(f"SN-{i}", priorities[k][i], mn, pf, at=i)
                for i, (mn, pf) in enumerate(combo)
            ]
            instances.append(make_input(demands, band=SMALL, guard=5))
    return instances


def pinned_small_instances():
    instances = []
    starts = (0, 10, 25)
    for base in enumerate_small_instances():
        if len(base.demands) != 3:
            continue
        d0 = base.demands[0]
        for start in starts:
            if start + d0.min_bw_mhz > SMALL.hi_mhz:
                continue
            pin = SpectrumAllocation(
                d0.sn_id, start, d0.min_bw_mhz, QosPriority.MISSION_CRITICAL, pinned=True
            )
            instances.append(replace(base, pinned=(pin,)))
    return instances[:: max(1, len(instances) // 600)]


class TestOracle:
    def test_unconstrained_optimum_grants_prefs(self):
        inp = make_input(
            [demand("A", 0, 5, 10, 1), demand("B", 2, 5, 15, 2)], band=SMALL, guard=5
        )
        plan = oracle_plan(inp)
        widths = {a.sn_id: a.width_mhz for a in plan.allocations}
        assert widths == {"A": 10, "B": 15}

    def test_empty_demand_list(self):
        plan = oracle_plan(make_input([], band=SMALL, guard=5))
        assert plan.allocations == () and plan.rejected == frozenset()

    def test_matches_compute_plan_on_shrunk_walkthrough(self):
        inp = make_input(
            [
                demand("SN-1", 0, 5, 5, 1),
                demand("SN-2", 2, 10, 30, 2),
                demand("SN-3", 1, 10, 15, 3),
            ],
            band=SMALL,
            guard=5,
        )
        cp, op = compute_plan(inp), oracle_plan(inp)
        assert {a.sn_id for a in cp.allocations} == {a.sn_id for a in op.allocations}
        assert {a.sn_id: a.width_mhz for a in cp.allocations} == {
            a.sn_id: a.width_mhz for a in op.allocations
        }

    def test_refuses_large_instances(self):
        with pytest.raises(SpectrumError):
            oracle_plan(make_input([demand(f"SN-{i}", 1, 5, 5, i) for i in range(5)], band=SMALL, guard=5))
        with pytest.raises(SpectrumError):
            oracle_plan(make_input([demand("A", 1, 10, 10)], band=BAND))

    def test_agreement_sample(self):
        # a fast subset; the full enumeration runs in the acceptance suite
        rng = random.Random(31337)
        instances = enumerate_small_instances()
        for inp in rng.sample(instances, 300):
            cp, op = compute_plan(inp), oracle_plan(inp)
            assert {a.sn_id for a in cp.allocations} == {a.sn_id for a in op.allocations}
            assert {a.sn_id: a.width_mhz for a in cp.allocations} == {
                a.sn_id: a.width_mhz for a in op.allocations
            }

    def test_pinned_agreement_sample(self):
        rng = random.Random(424242)
        instances = pinned_small_instances()
        for inp in rng.sample(instances, min(100, len(instances))):
            cp, op = compute_plan(inp), oracle_plan(inp)
            assert {a.sn_id for a in cp.allocations} == {a.sn_id for a in op.allocations}
            assert plan_objective(cp) >= 0.95 * plan_objective(op)
