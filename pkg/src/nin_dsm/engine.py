"""Deterministic discrete-event simulation engine.

Single logical thread, one priority queue keyed by (time, insertion seq),
one seeded RNG. Messages between agents and the spectrum manager travel
over control-plane routes with a per-hop delay; the wire form is the
newline-delimited canonical-JSON protocol from `wire`.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Callable

from . import wire
from .agents import Archetype, SncAgent, TELEMETRY_INTERVAL_MS
from .kira import ControlPlane
from .scenario import Scenario, ScenarioEvent
from .sm import LedgerEvent, SpectrumManager, canonical_json
from .spectrum import plan_utilization

METRICS_COLUMNS = (
    "time_ms",
    "kind",
    "sn_id",
    "epoch",
    "start_mhz",
    "width_mhz",
    "utilization",
)


class InvariantViolation(AssertionError):
    """A global simulation invariant was broken; the run is invalid."""


class _AgentEnv:
    """Per-agent facade onto the engine."""

    def __init__(self, engine: "Engine", node_getter: Callable[[], str]):
        self._engine = engine
        self._node = node_getter

    @property
    def now(self) -> int:
        return self._engine.now

    def schedule(self, delay_ms: int, fn: Callable[[int], None]) -> None:
        self._engine.schedule(delay_ms, fn)

    def send_to_sm(self, agent: SncAgent, message: dict) -> None:
        self._engine.agent_to_sm(agent, message)

    def discover_sm(self, node_name: str) -> str | None:
        return self._engine.cp.dht_get(node_name, "spectrum-manager")

    def relocate(self, mobile: str, new_anchor: str) -> None:
        self._engine.relocate(mobile, new_anchor)


class Engine:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.now = 0
        self._queue: list[tuple[int, int, Callable[[int], None]]] = []
        self._insertion = 0
        self._ended = False
        self.rng = random.Random(scenario.seed)
        self._wire_seq = 0

        self.cp = ControlPlane(scenario.topology)
        self.cp.converge()

        profiles = {a.sn_id: a.demand() for a in scenario.agents}
        self.metrics_rows: list[dict] = []
        self.ledger_lines: list[str] = []
        self.event_listeners: list[Callable[[LedgerEvent], None]] = []
        self.sm = SpectrumManager(
            band=scenario.band,
            guard_mhz=scenario.guard_mhz,
            known_profiles=profiles,
            send=self._sm_to_agent,
            schedule=self.schedule,
            on_event=self._on_ledger_event,
        )
        self.cp.dht_put(scenario.sm_node, "spectrum-manager", scenario.sm_node)

        self.agents: dict[str, SncAgent] = {}
        for config in scenario.agents:
            agent = SncAgent(config=config, env=_AgentEnv(self, lambda: config.node_name))
            self.agents[config.sn_id] = agent

        for event in scenario.events:
            self.schedule_at(event.at_ms, lambda t, e=event: self._run_scenario_event(e))
        self.schedule(0, self._telemetry_tick)

    # -- queue ---------------------------------------------------------------

    def schedule(self, delay_ms: int | float, fn: Callable[[int], None]) -> None:
        if isinstance(delay_ms, float):
            delay_ms = math.ceil(delay_ms)
        self.schedule_at(self.now + max(0, int(delay_ms)), fn)

    def schedule_at(self, at_ms: int, fn: Callable[[int], None]) -> None:
        self._insertion += 1
        heapq.heappush(self._queue, (at_ms, self._insertion, fn))

    def run(self, until_ms: int | None = None) -> None:
        while self._queue and not self._ended:
            at, _, fn = self._queue[0]
            if until_ms is not None and at > until_ms:
                break
            heapq.heappop(self._queue)
            if at < self.now:
                raise InvariantViolation("event loop time moved backwards")
            self.now = at
            fn(self.now)

    def step_until(self, sim_ms: int) -> None:
        """Advance to a wall-clock-paced target time (serve mode)."""
        self.run(until_ms=sim_ms)
        if not self._ended and self.now < sim_ms:
            self.now = sim_ms

    # -- transport -----------------------------------------------------------

    def _delay_for(self, src: str, dst: str) -> int | None:
        path = self.cp.route(src, self.cp.ids[dst])
        if path is None:
            return None
        if len(set(path)) != len(path):
            raise InvariantViolation(f"routing loop in path {path}")
        hops = len(path) - 1
        return math.ceil(self.scenario.per_hop_ms * hops)

    def _transmit(self, message: dict) -> dict:
        # Round-trip through the canonical wire form keeps the on-the-wire
        # schema honest even in pure simulation.
        self._wire_seq += 1
        line = wire.encode(message["kind"], self._wire_seq, self.now, message.get("payload", {}))
        decoded = wire.decode(line)
        return {"kind": decoded.kind, "payload": decoded.payload}

    def agent_to_sm(self, agent: SncAgent, message: dict) -> None:
        delay = self._delay_for(agent.node, self.scenario.sm_node)
        if delay is None:
            return  # partitioned: the message is lost
        msg = self._transmit(message)
        self.schedule(delay, lambda t, m=msg: self._deliver_to_sm(m))

    def _deliver_to_sm(self, message: dict) -> None:
        kind = message["kind"]
        payload = message["payload"]
        if kind == "REGISTER":
            from .spectrum import DemandProfile

            self.sm.handle_register(DemandProfile.from_json(payload["demand"]), self.now)
        elif kind == "ACCEPT":
            self.sm.handle_accept(payload["sn_id"], int(payload["epoch"]), self.now)
        elif kind == "INTENT":
            self.sm.handle_intent(payload["sn_id"], int(payload["eta_ms"]), self.now)
        elif kind == "RELEASE":
            self.sm.handle_release(payload["sn_id"], self.now)
        elif kind == "REALLOC_ACK":
            self.sm.handle_realloc_ack(payload["sn_id"], int(payload["epoch"]), self.now)
        elif kind == "TELEMETRY":
            self.sm.handle_telemetry(payload["sn_id"], payload, self.now)

    def _sm_to_agent(self, sn_id: str, message: dict) -> None:
        agent = self.agents.get(sn_id)
        if agent is None:
            return
        delay = self._delay_for(self.scenario.sm_node, agent.node)
        if delay is None:
            return
        msg = self._transmit(message)
        self.schedule(delay, lambda t, a=agent, m=msg: a.on_message(m))

    # -- mobility ------------------------------------------------------------

    def relocate(self, mobile: str, new_anchor: str) -> None:
        self.cp.relocate(mobile, new_anchor)
        # Desk-scale abstraction: the convergence window completes within
        # the same simulated millisecond.
        self.cp.converge()

    # -- scenario actions ----------------------------------------------------

    def _run_scenario_event(self, event: ScenarioEvent) -> None:
        if event.action == "REGISTER_SN":
            self.agents[event.args["sn_id"]].bootstrap()
        elif event.action == "CALL_AGV":
            self.call_agv(event.args.get("sn_id"))
        elif event.action == "TOGGLE_SN2":
            self.toggle_sensing(event.args.get("sn_id"), bool(event.args["on"]))
        elif event.action == "MOVE_NODE":
            self.relocate(event.args["node"], event.args["anchor"])
        elif event.action == "END":
            self._ended = True

    def _default_agent(self, archetype: Archetype) -> SncAgent | None:
        for agent in self.agents.values():
            if agent.config.archetype == archetype:
                return agent
        return None

    def call_agv(self, sn_id: str | None = None) -> bool:
        agent = self.agents.get(sn_id) if sn_id else self._default_agent(Archetype.NOMADIC)
        if agent is None:
            return False
        return agent.call()

    def toggle_sensing(self, sn_id: str | None, on: bool) -> bool:
        agent = self.agents.get(sn_id) if sn_id else self._default_agent(Archetype.SENSING)
        if agent is None:
            return False
        return agent.toggle_sensing(on)

    # -- telemetry -----------------------------------------------------------

    def _telemetry_tick(self, now: int) -> None:
        if self._ended:
            return
        for agent in self.agents.values():
            payload = agent.telemetry(self.rng)
            self.agent_to_sm(agent, {"kind": "TELEMETRY", "payload": payload})
            if agent.tuned is not None:
                alloc = agent.tuned
                if not (
                    self.scenario.band.lo_mhz
                    <= alloc.start_mhz
                    <= alloc.end_mhz
                    <= self.scenario.band.hi_mhz
                ):
                    raise InvariantViolation(
                        f"{agent.config.sn_id} tuned outside the managed band"
                    )
        self.schedule(TELEMETRY_INTERVAL_MS, self._telemetry_tick)

    # -- outputs -------------------------------------------------------------

    def _on_ledger_event(self, event: LedgerEvent) -> None:
        self.ledger_lines.append(canonical_json(event.to_json()))
        payload = event.payload
        alloc = payload.get("allocation")
        row_extra = {}
        if event.kind == "COMMIT":
            # carried for figure rendering only; not a CSV column
            row_extra["plan_allocations"] = payload["plan"]["allocations"]
        self.metrics_rows.append(
            {
                **row_extra,
                "time_ms": event.time,
                "kind": event.kind,
                "sn_id": payload.get("sn_id", payload.get("demand", {}).get("sn_id", "")),
                "epoch": self.sm.state.plan.epoch,
                "start_mhz": alloc["start_mhz"] if alloc else "",
                "width_mhz": alloc["width_mhz"] if alloc else "",
                "utilization": round(
                    plan_utilization(self.sm.state.plan, self.scenario.band), 6
                ),
            }
        )
        # Global safety: the active plan must stay valid after every event.
        self.sm.state.plan.validate_for(self.scenario.band, self.scenario.guard_mhz)
        for listener in self.event_listeners:
            listener(event)

    def snapshot(self) -> dict:
        return self.sm.snapshot()

    def state_view(self) -> dict:
        """Rich state for the HTTP API and dashboard."""
        agv = self._default_agent(Archetype.NOMADIC)
        return {
            "time_ms": self.now,
            "band": self.scenario.band.to_json(),
            "guard_mhz": self.scenario.guard_mhz,
            "snapshot": self.snapshot(),
            "utilization": plan_utilization(self.sm.state.plan, self.scenario.band),
            "agv_phase": agv.phase.value if agv else None,
            "telemetry": self.sm.telemetry,
            "kira": self.cp.routing_dump(),
            "sm_node": self.scenario.sm_node,
        }
