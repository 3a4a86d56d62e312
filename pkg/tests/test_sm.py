import json

import pytest

from nin_dsm.sm import (
    CorruptLedger,
    LedgerEvent,
    SessionState,
    SpectrumManager,
    T_APPLY_MS,
    T_INTENT_HOLD_MS,
    T_OFFER_MS,
    canonical_json,
    replay,
)
from nin_dsm.spectrum import Band, DemandProfile, QosPriority

SN1 = DemandProfile("SN-1", QosPriority.MISSION_CRITICAL, 10, 10)
SN2 = DemandProfile("SN-2", QosPriority.SENSING, 20, 60)
SN3 = DemandProfile("SN-3", QosPriority.NOMADIC, 15, 30)


class Harness:
    """Spectrum manager plus a deterministic message log and timer wheel."""

    def __init__(self):
        self.now = 0
        self.sent: list[tuple[str, dict]] = []
        self.drop_notices: set[str] = set()
        self._timers: list[tuple[int, int, object]] = []
        self._seq = 0
        self.sm = SpectrumManager(
            band=Band.default_overlayer(),
            guard_mhz=1,
            known_profiles={d.sn_id: d for d in (SN1, SN2, SN3)},
            send=self._send,
            schedule=self._schedule,
        )

    def _send(self, sn, msg):
        self.sent.append((sn, msg))
        # behave like a responsive client unless a test drops the notice
        if msg["kind"] == "REALLOC_NOTICE" and sn not in self.drop_notices:
            self.sm.handle_realloc_ack(sn, msg["payload"]["epoch"], self.now)

    def _schedule(self, delay, fn):
        self._seq += 1
        self._timers.append((self.now + max(0, int(delay)), self._seq, fn))

    def run_until(self, t):
        while True:
            due = sorted(x for x in self._timers if x[0] <= t)
            if not due:
                break
            at, seq, fn = due[0]
            self._timers.remove((at, seq, fn))
            self.now = at
            fn(at)
        self.now = t

    def kinds(self):
        return [e.kind for e in self.sm.ledger]

    def register_and_accept(self, demand, at):
        self.run_until(at)
        offer = self.sm.handle_register(demand, self.now)
        assert offer["kind"] == "OFFER"
        self.sm.handle_accept(demand.sn_id, offer["payload"]["epoch"], self.now)
        self.run_until(self.now + T_APPLY_MS)
        return offer


class TestRegistration:
    def test_register_emits_offer(self):
        h = Harness()
        out = h.sm.handle_register(SN1, 1000)
        assert out["kind"] == "OFFER"
        assert out["payload"]["allocation"]["start_mhz"] == 3700
        assert out["payload"]["allocation"]["width_mhz"] == 10
        assert out["payload"]["deadline"] == 1000 + T_OFFER_MS
        assert h.kinds() == ["REGISTER", "OFFER"]
        assert h.sent[-1][0] == "SN-1"

    def test_invalid_demand_rejected(self):
        h = Harness()
        bad = DemandProfile("SN-9", QosPriority.SENSING, 10, 200)
        out = h.sm.handle_register(bad, 0)
        assert out["kind"] == "REJECT"
        assert out["payload"]["reason"] == "invalid_demand"
        assert "SN-9" not in h.sm.state.sessions

    def test_duplicate_register_keeps_session(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        out = h.sm.handle_register(SN1, 2000)
        assert out["payload"]["reason"] == "already_registered"
        assert h.sm.state.sessions["SN-1"].state == SessionState.COMMITTED
        assert h.sm.state.plan.allocation_for("SN-1") is not None

    def test_insufficient_spectrum_rejected(self):
        h = Harness()
        h.register_and_accept(DemandProfile("SN-3", QosPriority.NOMADIC, 60, 60), 0)
        out = h.sm.handle_register(DemandProfile("SN-2", QosPriority.SENSING, 60, 60), 100)
        assert out["payload"]["reason"] == "insufficient_spectrum"


class TestNegotiation:
    def test_accept_commits_after_apply_window(self):
        h = Harness()
        offer = h.sm.handle_register(SN1, 1000)
        h.sm.handle_accept("SN-1", offer["payload"]["epoch"], 1002)
        assert h.sm.state.sessions["SN-1"].state == SessionState.COMMITTED
        assert "COMMIT" not in h.kinds()  # not yet activated
        h.run_until(1002 + T_APPLY_MS)
        assert h.kinds()[-1] == "COMMIT"
        assert h.sm.state.plan.allocation_for("SN-1").width_mhz == 10

    def test_accept_without_offer(self):
        h = Harness()
        out = h.sm.handle_accept("SN-1", 1, 0)
        assert out["payload"]["reason"] == "no_pending_offer"

    def test_stale_epoch_keeps_pending_session(self):
        h = Harness()
        offer = h.sm.handle_register(SN1, 1000)
        out = h.sm.handle_accept("SN-1", offer["payload"]["epoch"] + 1, 1001)
        assert out["payload"]["reason"] == "stale_epoch"
        assert out["payload"]["keep_session"] is True
        assert h.sm.state.sessions["SN-1"].state == SessionState.PENDING_OFFER
        # a correct accept still succeeds afterwards
        h.sm.handle_accept("SN-1", offer["payload"]["epoch"], 1002)
        assert h.sm.state.sessions["SN-1"].state == SessionState.COMMITTED

    def test_offer_deadline_expires_session(self):
        h = Harness()
        h.sm.handle_register(SN1, 1000)
        h.run_until(1000 + T_OFFER_MS)
        assert h.kinds()[-1] == "REJECT"
        assert h.sm.ledger[-1].payload["reason"] == "offer_expired"
        assert "SN-1" not in h.sm.state.sessions

    def test_accept_after_deadline(self):
        h = Harness()
        offer = h.sm.handle_register(SN1, 1000)
        h.sm._timers = []  # isolate the explicit late accept
        out = h.sm.handle_accept("SN-1", offer["payload"]["epoch"], 1000 + T_OFFER_MS + 1)
        assert out["payload"]["reason"] == "offer_expired"


class TestReconfiguration:
    def test_second_sn_triggers_no_notice_when_layout_stable(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        before = h.kinds().count("REALLOC_NOTICE")
        h.register_and_accept(SN2, 2000)
        # SN-1 stays at (3700, 10); only the newcomer is notified
        notices = [
            e.payload["sn_id"]
            for e in h.sm.ledger
            if e.kind == "REALLOC_NOTICE"
        ][before:]
        assert notices == ["SN-2"]

    def test_degrade_when_ack_missing(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        demand = DemandProfile("SN-3", QosPriority.NOMADIC, 15, 30)
        offer = h.sm.handle_register(demand, 3000)
        # drop the REALLOC_NOTICE to SN-2 on the floor: no ack arrives
        h.drop_notices.add("SN-2")
        h.sm.handle_accept("SN-3", offer["payload"]["epoch"], 3001)
        h.run_until(3001 + T_APPLY_MS)
        assert h.sm.state.sessions["SN-2"].state == SessionState.DEGRADED
        assert h.kinds()[-1] == "DEGRADE"
        # a later ack restores the session
        h.sm.handle_realloc_ack("SN-2", h.sm.state.plan.epoch, 3200)
        assert h.sm.state.sessions["SN-2"].state == SessionState.COMMITTED

    def test_ack_before_activation_prevents_degrade(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        offer = h.sm.handle_register(SN3, 3000)
        # the harness acks every notice promptly
        h.sm.handle_accept("SN-3", offer["payload"]["epoch"], 3001)
        h.run_until(3001 + T_APPLY_MS)
        assert h.sm.state.sessions["SN-2"].state == SessionState.COMMITTED
        assert "DEGRADE" not in h.kinds()


class TestIntent:
    def test_intent_reserves_and_downsizes(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        h.run_until(10000)
        h.sm.handle_intent("SN-3", eta_ms=12000, now=10000)
        intent = next(e for e in h.sm.ledger if e.kind == "INTENT")
        assert intent.payload["reserved"] is True
        assert intent.payload["expires_at"] == 12000 + T_INTENT_HOLD_MS
        h.run_until(10000 + T_APPLY_MS)
        plan = h.sm.state.plan
        assert plan.allocation_for("SN-3").width_mhz == 30
        assert plan.allocation_for("SN-2").width_mhz == 58
        assert plan.allocation_for("SN-1").start_mhz == 3700

    def test_register_within_hold_gets_reserved_block(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        h.run_until(10000)
        h.sm.handle_intent("SN-3", eta_ms=12000, now=10000)
        h.run_until(12000)
        epoch_before = h.sm.state.plan.epoch
        offer = h.sm.handle_register(SN3, 12000)
        assert offer["kind"] == "OFFER"
        held = h.sm.state.plan.allocation_for("SN-3")
        assert offer["payload"]["allocation"] == held.to_json()
        h.sm.handle_accept("SN-3", offer["payload"]["epoch"], 12002)
        # the reserved block was already in the plan: no further reshuffle
        assert h.sm.state.plan.epoch == epoch_before
        assert h.sm.state.sessions["SN-3"].state == SessionState.COMMITTED
        assert "SN-3" not in h.sm.state.reservations

    def test_unused_hold_expires_and_restores(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        h.run_until(10000)
        h.sm.handle_intent("SN-3", eta_ms=12000, now=10000)
        h.run_until(12000 + T_INTENT_HOLD_MS + T_APPLY_MS)
        plan = h.sm.state.plan
        assert plan.allocation_for("SN-3") is None
        assert plan.allocation_for("SN-2").width_mhz == 60
        assert "SN-3" not in h.sm.state.reservations

    def test_intent_for_unknown_sn_is_ledgered_and_ignored(self):
        h = Harness()
        h.sm.handle_intent("SN-42", eta_ms=500, now=100)
        assert h.kinds() == ["INTENT"]
        assert h.sm.ledger[0].payload["ignored"] == "unknown_sn"

    def test_intent_while_active_is_ignored(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.sm.handle_intent("SN-1", eta_ms=5000, now=2000)
        assert h.sm.ledger[-1].payload["ignored"] == "already_active"


class TestRelease:
    def test_release_frees_spectrum(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        h.register_and_accept(SN3, 3000)
        h.run_until(20000)
        h.sm.handle_release("SN-3", 20000)
        h.run_until(20000 + T_APPLY_MS)
        plan = h.sm.state.plan
        assert plan.allocation_for("SN-3") is None
        assert plan.allocation_for("SN-2").width_mhz == 60
        assert h.sm.state.sessions["SN-3"].state == SessionState.RELEASED

    def test_release_without_session_is_silent(self):
        h = Harness()
        h.sm.handle_release("SN-9", 100)
        assert h.kinds() == []


class TestLedger:
    def make_ledger(self):
        h = Harness()
        h.register_and_accept(SN1, 1000)
        h.register_and_accept(SN2, 2000)
        h.run_until(10000)
        h.sm.handle_intent("SN-3", eta_ms=12000, now=10000)
        h.run_until(12000)
        offer = h.sm.handle_register(SN3, 12000)
        h.sm.handle_accept("SN-3", offer["payload"]["epoch"], 12002)
        h.run_until(19000)
        h.sm.handle_release("SN-3", 19000)
        h.run_until(25000)
        return h

    def test_seq_contiguous_from_one(self):
        h = self.make_ledger()
        assert [e.seq for e in h.sm.ledger] == list(range(1, len(h.sm.ledger) + 1))

    def test_replay_reproduces_live_state(self):
        h = self.make_ledger()
        lines = [canonical_json(e.to_json()) for e in h.sm.ledger]
        events = [LedgerEvent.from_json(json.loads(line)) for line in lines]
        state = replay(events)
        assert state.snapshot() == h.sm.snapshot()
        assert state.plan == h.sm.state.plan

    def test_replay_of_prefix_is_valid(self):
        h = self.make_ledger()
        for cut in range(len(h.sm.ledger) + 1):
            replay(h.sm.ledger[:cut])

    def test_gap_in_seq_is_corrupt(self):
        h = self.make_ledger()
        events = h.sm.ledger[:3] + h.sm.ledger[4:]
        with pytest.raises(CorruptLedger):
            replay(events)

    def test_unknown_kind_is_corrupt(self):
        with pytest.raises(CorruptLedger):
            replay([LedgerEvent(seq=1, time=0, kind="BOGUS", payload={})])

    def test_canonical_json_is_stable(self):
        obj = {"b": 1, "a": {"z": [3, 2], "y": None}}
        assert canonical_json(obj) == '{"a":{"y":null,"z":[3,2]},"b":1}'
