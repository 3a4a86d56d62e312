"""Centralized spectrum manager: registration, negotiation, two-phase
reconfiguration, intent-based pre-reservation, and an event-sourced ledger.

Every state change flows through ``SmState.apply`` so that replaying the
ledger reproduces the live state exactly. Handlers perform validation and
side effects (messages, timers) and record the resulting events; ``apply``
is the single transition function shared by live operation and replay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .allocator import AllocatorInput, compute_plan
from .spectrum import (
    AllocationPlan,
    Band,
    DemandProfile,
    QosPriority,
    SpectrumAllocation,
    SpectrumError,
)

T_OFFER_MS = 5000
T_APPLY_MS = 100
T_INTENT_HOLD_MS = 10000

KINDS = (
    "REGISTER",
    "OFFER",
    "ACCEPT",
    "COMMIT",
    "REJECT",
    "RELEASE",
    "INTENT",
    "REALLOC_NOTICE",
    "REALLOC_ACK",
    "DEGRADE",
)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class CorruptLedger(ValueError):
    """Ledger sequence numbers are not contiguous and increasing."""


class SessionState(str, Enum):
    UNREGISTERED = "UNREGISTERED"
    PENDING_OFFER = "PENDING_OFFER"
    COMMITTED = "COMMITTED"
    DEGRADED = "DEGRADED"
    RELEASED = "RELEASED"


@dataclass
class NegotiationSession:
    sn_id: str
    state: SessionState
    demand: DemandProfile
    current_alloc: SpectrumAllocation | None = None
    offer_deadline: int | None = None
    offered_alloc: SpectrumAllocation | None = None
    offered_epoch: int | None = None

    def to_json(self) -> dict:
        return {
            "sn_id": self.sn_id,
            "state": self.state.value,
            "demand": self.demand.to_json(),
            "current_alloc": self.current_alloc.to_json() if self.current_alloc else None,
            "offer_deadline": self.offer_deadline,
        }


@dataclass(frozen=True)
class LedgerEvent:
    seq: int
    time: int
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "time": self.time, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_json(cls, obj: dict) -> "LedgerEvent":
        return cls(seq=int(obj["seq"]), time=int(obj["time"]), kind=obj["kind"], payload=obj["payload"])


@dataclass
class Reservation:
    demand: DemandProfile
    allocation: SpectrumAllocation
    eta_ms: int
    expires_at: int


@dataclass
class SmState:
    """The replayable core of the spectrum manager."""

    sessions: dict[str, NegotiationSession] = field(default_factory=dict)
    plan: AllocationPlan = field(default_factory=lambda: AllocationPlan(epoch=0))
    reservations: dict[str, Reservation] = field(default_factory=dict)
    pending_acks: dict[int, set[str]] = field(default_factory=dict)

    def apply(self, event: LedgerEvent) -> None:
        p = event.payload
        kind = event.kind
        if kind == "REGISTER":
            demand = DemandProfile.from_json(p["demand"])
            self.sessions[demand.sn_id] = NegotiationSession(
                sn_id=demand.sn_id, state=SessionState.UNREGISTERED, demand=demand
            )
        elif kind == "OFFER":
            session = self.sessions[p["sn_id"]]
            session.state = SessionState.PENDING_OFFER
            session.offered_alloc = SpectrumAllocation.from_json(p["allocation"])
            session.offered_epoch = int(p["epoch"])
            session.offer_deadline = int(p["deadline"])
        elif kind == "REJECT":
            if not p.get("keep_session"):
                session = self.sessions.get(p["sn_id"])
                if session is not None and session.state in (
                    SessionState.UNREGISTERED,
                    SessionState.PENDING_OFFER,
                ):
                    del self.sessions[p["sn_id"]]
        elif kind == "ACCEPT":
            session = self.sessions[p["sn_id"]]
            session.state = SessionState.COMMITTED
            session.current_alloc = SpectrumAllocation.from_json(p["allocation"])
            session.offer_deadline = None
            session.offered_alloc = None
            session.offered_epoch = None
            self.reservations.pop(p["sn_id"], None)
        elif kind == "COMMIT":
            self.plan = AllocationPlan.from_json(p["plan"])
            granted = {a.sn_id: a for a in self.plan.allocations}
            for session in self.sessions.values():
                if session.state in (SessionState.COMMITTED, SessionState.DEGRADED):
                    alloc = granted.get(session.sn_id)
                    if alloc is not None:
                        session.current_alloc = alloc
            self.reservations = {
                sn: r for sn, r in self.reservations.items() if sn in granted
            }
        elif kind == "RELEASE":
            session = self.sessions.get(p["sn_id"])
            if session is not None:
                session.state = SessionState.RELEASED
                session.current_alloc = None
        elif kind == "INTENT":
            if p.get("reserved"):
                self.reservations[p["sn_id"]] = Reservation(
                    demand=DemandProfile.from_json(p["demand"]),
                    allocation=SpectrumAllocation.from_json(p["allocation"]),
                    eta_ms=int(p["eta_ms"]),
                    expires_at=int(p["expires_at"]),
                )
        elif kind == "REALLOC_NOTICE":
            self.pending_acks.setdefault(int(p["epoch"]), set()).add(p["sn_id"])
        elif kind == "REALLOC_ACK":
            waiting = self.pending_acks.get(int(p["epoch"]))
            if waiting is not None:
                waiting.discard(p["sn_id"])
            session = self.sessions.get(p["sn_id"])
            if session is not None and session.state == SessionState.DEGRADED:
                session.state = SessionState.COMMITTED
        elif kind == "DEGRADE":
            session = self.sessions.get(p["sn_id"])
            if session is not None:
                session.state = SessionState.DEGRADED
        else:
            raise CorruptLedger(f"unknown event kind {kind!r}")

    def snapshot(self) -> dict:
        return {
            "epoch": self.plan.epoch,
            "plan": self.plan.to_json(),
            "sessions": {
                sn: session.to_json() for sn, session in sorted(self.sessions.items())
            },
        }


def replay(events: list[LedgerEvent]) -> SmState:
    """Pure fold of the ledger into the spectrum-manager state."""
    state = SmState()
    expected = 1
    for event in events:
        if event.seq != expected:
            raise CorruptLedger(
                f"expected seq {expected}, found {event.seq}"
            )
        state.apply(event)
        expected += 1
    return state


def load_ledger(path) -> list[LedgerEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(LedgerEvent.from_json(json.loads(line)))
    return events


class SpectrumManager:
    """Single logical decision process; handlers run to completion in order."""

    def __init__(
        self,
        band: Band,
        guard_mhz: int = 1,
        known_profiles: dict[str, DemandProfile] | None = None,
        send: Callable[[str, dict], None] | None = None,
        schedule: Callable[[int, Callable[[int], None]], None] | None = None,
        on_event: Callable[[LedgerEvent], None] | None = None,
    ):
        self.band = band
        self.guard_mhz = guard_mhz
        self.known_profiles = dict(known_profiles or {})
        self._send = send or (lambda sn_id, msg: None)
        self._schedule = schedule or (lambda delay, fn: None)
        self._on_event = on_event or (lambda event: None)
        self.state = SmState()
        self.ledger: list[LedgerEvent] = []
        self._activation_epoch: int | None = None
        self.telemetry: dict[str, dict] = {}

    # -- plumbing ------------------------------------------------------------

    def _record(self, now: int, kind: str, payload: dict) -> LedgerEvent:
        event = LedgerEvent(seq=len(self.ledger) + 1, time=now, kind=kind, payload=payload)
        self.ledger.append(event)
        self.state.apply(event)
        self._on_event(event)
        return event

    def _active_sessions(self) -> list[NegotiationSession]:
        return [
            s
            for s in self.state.sessions.values()
            if s.state in (SessionState.COMMITTED, SessionState.DEGRADED)
        ]

    def _plan_input(self, extra: DemandProfile | None = None) -> AllocatorInput:
        demands: dict[str, DemandProfile] = {}
        for session in self._active_sessions():
            demands[session.sn_id] = session.demand
        for sn_id, reservation in self.state.reservations.items():
            if sn_id not in demands:
                demands[sn_id] = reservation.demand
        if extra is not None:
            demands[extra.sn_id] = extra
        pinned = tuple(
            replace(alloc, pinned=True)
            for alloc in self.state.plan.allocations
            if alloc.priority == QosPriority.MISSION_CRITICAL
            and alloc.sn_id in demands
            and self.state.sessions.get(alloc.sn_id) is not None
            and self.state.sessions[alloc.sn_id].state
            in (SessionState.COMMITTED, SessionState.DEGRADED)
        )
        return AllocatorInput(
            band=self.band,
            guard_mhz=self.guard_mhz,
            demands=tuple(sorted(demands.values(), key=lambda d: d.sn_id)),
            pinned=pinned,
        )

    # -- handlers ------------------------------------------------------------

    def handle_register(self, demand: DemandProfile, now: int) -> dict:
        session = self.state.sessions.get(demand.sn_id)
        if session is not None and session.state in (
            SessionState.PENDING_OFFER,
            SessionState.COMMITTED,
            SessionState.DEGRADED,
        ):
            return self._reject(demand.sn_id, "already_registered", now)
        try:
            demand.validate_for(self.band)
        except SpectrumError:
            return self._reject(demand.sn_id, "invalid_demand", now)
        demand = replace(demand, registered_at=now)
        self._record(now, "REGISTER", {"demand": demand.to_json()})

        reservation = self.state.reservations.get(demand.sn_id)
        if reservation is not None and now <= reservation.expires_at:
            # Pre-reserved via intent: offer the held block without reshuffling.
            held = self.state.plan.allocation_for(demand.sn_id)
            alloc = held if held is not None else reservation.allocation
            epoch = self.state.plan.epoch
        else:
            candidate = compute_plan(self._plan_input(extra=demand), self.state.plan.epoch)
            if demand.sn_id in candidate.rejected:
                return self._reject(demand.sn_id, "insufficient_spectrum", now)
            alloc = candidate.allocation_for(demand.sn_id)
            epoch = candidate.epoch
        deadline = now + T_OFFER_MS
        event = self._record(
            now,
            "OFFER",
            {
                "sn_id": demand.sn_id,
                "allocation": alloc.to_json(),
                "epoch": epoch,
                "deadline": deadline,
            },
        )
        self._schedule(T_OFFER_MS, lambda t, sn=demand.sn_id, d=deadline: self._on_offer_deadline(sn, d, t))
        self._send(demand.sn_id, {"kind": "OFFER", "payload": event.payload})
        return {"kind": "OFFER", "payload": event.payload}

    def _reject(self, sn_id: str, reason: str, now: int, keep_session: bool = False) -> dict:
        payload = {"sn_id": sn_id, "reason": reason}
        if keep_session:
            payload["keep_session"] = True
        event = self._record(now, "REJECT", payload)
        self._send(sn_id, {"kind": "REJECT", "payload": event.payload})
        return {"kind": "REJECT", "payload": event.payload}

    def _on_offer_deadline(self, sn_id: str, deadline: int, now: int) -> None:
        session = self.state.sessions.get(sn_id)
        if (
            session is not None
            and session.state == SessionState.PENDING_OFFER
            and session.offer_deadline == deadline
        ):
            self._reject(sn_id, "offer_expired", now)

    def handle_accept(self, sn_id: str, epoch: int, now: int) -> dict:
        session = self.state.sessions.get(sn_id)
        if session is None or session.state != SessionState.PENDING_OFFER:
            return self._reject(sn_id, "no_pending_offer", now)
        if epoch != session.offered_epoch:
            return self._reject(sn_id, "stale_epoch", now, keep_session=True)
        if session.offer_deadline is not None and now > session.offer_deadline:
            return self._reject(sn_id, "offer_expired", now)

        demand = session.demand
        reservation = self.state.reservations.get(sn_id)
        self._record(
            now,
            "ACCEPT",
            {"sn_id": sn_id, "epoch": epoch, "allocation": session.offered_alloc.to_json()},
        )
        if reservation is not None:
            alloc = self.state.plan.allocation_for(sn_id)
            if alloc is not None:
                # The plan already carries the reserved block; nothing to move.
                self._send(sn_id, {"kind": "COMMIT", "payload": {
                    "sn_id": sn_id, "allocation": alloc.to_json(), "epoch": self.state.plan.epoch,
                }})
                return {"kind": "COMMIT", "payload": {"sn_id": sn_id}}
            # The reserved block was displaced (or its commit has not
            # activated yet): fall through to a fresh negotiation round.
        candidate = compute_plan(self._plan_input(extra=demand), self.state.plan.epoch)
        self.commit_plan(candidate, now)
        alloc = candidate.allocation_for(sn_id)
        self._send(sn_id, {"kind": "COMMIT", "payload": {
            "sn_id": sn_id,
            "allocation": alloc.to_json() if alloc else None,
            "epoch": candidate.epoch,
        }})
        return {"kind": "COMMIT", "payload": {"sn_id": sn_id}}

    def handle_intent(self, sn_id: str, eta_ms: int, now: int) -> None:
        demand = self.known_profiles.get(sn_id)
        if demand is None:
            session = self.state.sessions.get(sn_id)
            demand = session.demand if session is not None else None
        if demand is None:
            self._record(now, "INTENT", {"sn_id": sn_id, "eta_ms": eta_ms, "ignored": "unknown_sn"})
            return
        session = self.state.sessions.get(sn_id)
        if session is not None and session.state in (
            SessionState.PENDING_OFFER,
            SessionState.COMMITTED,
            SessionState.DEGRADED,
        ):
            self._record(now, "INTENT", {"sn_id": sn_id, "eta_ms": eta_ms, "ignored": "already_active"})
            return
        demand = replace(demand, registered_at=now)
        candidate = compute_plan(self._plan_input(extra=demand), self.state.plan.epoch)
        alloc = candidate.allocation_for(sn_id)
        if alloc is None:
            self._record(now, "INTENT", {"sn_id": sn_id, "eta_ms": eta_ms, "ignored": "insufficient_spectrum"})
            return
        expires_at = eta_ms + T_INTENT_HOLD_MS
        self._record(
            now,
            "INTENT",
            {
                "sn_id": sn_id,
                "eta_ms": eta_ms,
                "reserved": True,
                "demand": demand.to_json(),
                "allocation": alloc.to_json(),
                "expires_at": expires_at,
            },
        )
        self.commit_plan(candidate, now)
        self._schedule(
            max(0, expires_at - now),
            lambda t, sn=sn_id, exp=expires_at: self._on_hold_expired(sn, exp, t),
        )

    def _on_hold_expired(self, sn_id: str, expires_at: int, now: int) -> None:
        reservation = self.state.reservations.get(sn_id)
        if reservation is None or reservation.expires_at != expires_at:
            return
        del self.state.reservations[sn_id]
        candidate = compute_plan(self._plan_input(), self.state.plan.epoch)
        self.commit_plan(candidate, now)

    def handle_release(self, sn_id: str, now: int) -> None:
        session = self.state.sessions.get(sn_id)
        if session is None or session.state not in (
            SessionState.COMMITTED,
            SessionState.DEGRADED,
        ):
            return
        self._record(now, "RELEASE", {"sn_id": sn_id})
        candidate = compute_plan(self._plan_input(), self.state.plan.epoch)
        self.commit_plan(candidate, now)

    def handle_realloc_ack(self, sn_id: str, epoch: int, now: int) -> None:
        self._record(now, "REALLOC_ACK", {"sn_id": sn_id, "epoch": epoch})

    def handle_telemetry(self, sn_id: str, payload: dict, now: int) -> None:
        self.telemetry[sn_id] = {"time": now, **payload}

    # -- two-phase reconfiguration -------------------------------------------

    def commit_plan(self, new_plan: AllocationPlan, now: int) -> None:
        old = {a.sn_id: a for a in self.state.plan.allocations}
        new = {a.sn_id: a for a in new_plan.allocations}
        if {k: (v.start_mhz, v.width_mhz) for k, v in old.items()} == {
            k: (v.start_mhz, v.width_mhz) for k, v in new.items()
        }:
            return  # identical layout: zero notices, no epoch bump
        activate_at = now + T_APPLY_MS
        notified: list[str] = []
        for sn_id, alloc in sorted(new.items()):
            session = self.state.sessions.get(sn_id)
            if session is None or session.state not in (
                SessionState.COMMITTED,
                SessionState.DEGRADED,
            ):
                continue
            prev = old.get(sn_id)
            changed = prev is None or (prev.start_mhz, prev.width_mhz) != (
                alloc.start_mhz,
                alloc.width_mhz,
            )
            if changed or session.state == SessionState.DEGRADED:
                notified.append(sn_id)
        for sn_id in notified:
            event = self._record(
                now,
                "REALLOC_NOTICE",
                {
                    "sn_id": sn_id,
                    "allocation": new[sn_id].to_json(),
                    "epoch": new_plan.epoch,
                    "activate_at": activate_at,
                },
            )
            self._send(sn_id, {"kind": "REALLOC_NOTICE", "payload": event.payload})
        self._activation_epoch = new_plan.epoch
        self._schedule(
            T_APPLY_MS,
            lambda t, plan=new_plan: self._on_activate(plan, t),
        )

    def _on_activate(self, plan: AllocationPlan, now: int) -> None:
        if self._activation_epoch != plan.epoch:
            return  # superseded by a later reconfiguration
        self._record(now, "COMMIT", {"plan": plan.to_json()})
        for sn_id in sorted(self.state.pending_acks.get(plan.epoch, set())):
            session = self.state.sessions.get(sn_id)
            if session is not None and session.state == SessionState.COMMITTED:
                self._record(now, "DEGRADE", {"sn_id": sn_id, "epoch": plan.epoch})
        self.state.pending_acks.pop(plan.epoch, None)
        self.state.plan.validate_for(self.band, self.guard_mhz)

    # -- views ---------------------------------------------------------------

    def snapshot(self) -> dict:
        return self.state.snapshot()

    def ledger_json(self, from_seq: int = 1) -> list[dict]:
        return [e.to_json() for e in self.ledger if e.seq >= from_seq]
