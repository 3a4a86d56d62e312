"""Sub-network controller agents: discovery, registration, allocation
application, telemetry, and the AGV mission state machine.

Each agent is an independent actor with private state; it talks to the
spectrum manager only through messages routed over the control plane.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from .spectrum import DemandProfile, QosPriority, SpectrumAllocation, SpectrumError

BACKOFF_BASE_MS = 500
BACKOFF_FACTOR = 2
BACKOFF_CAP_MS = 8000
REJECT_RETRY_MS = 10000
TELEMETRY_INTERVAL_MS = 1000
DEFAULT_HOP_INTERVAL_MS = 1000
DEFAULT_DWELL_MS = 5000


class Archetype(str, Enum):
    CONTROL = "CONTROL"
    SENSING = "SENSING"
    NOMADIC = "NOMADIC"


ARCHETYPE_PRIORITY = {
    Archetype.CONTROL: QosPriority.MISSION_CRITICAL,
    Archetype.SENSING: QosPriority.SENSING,
    Archetype.NOMADIC: QosPriority.NOMADIC,
}


class AgvPhase(str, Enum):
    DOCKED = "DOCKED"
    SUMMONED = "SUMMONED"
    TRAVERSING = "TRAVERSING"
    AT_MACHINE = "AT_MACHINE"
    RETURNING = "RETURNING"


_PHASE_ORDER = [
    AgvPhase.DOCKED,
    AgvPhase.SUMMONED,
    AgvPhase.TRAVERSING,
    AgvPhase.AT_MACHINE,
    AgvPhase.RETURNING,
]


def next_phase(phase: AgvPhase) -> AgvPhase:
    idx = _PHASE_ORDER.index(phase)
    return _PHASE_ORDER[(idx + 1) % len(_PHASE_ORDER)]


@dataclass(frozen=True)
class SncConfig:
    sn_id: str
    archetype: Archetype
    min_bw_mhz: int
    pref_bw_mhz: int
    home_node: str
    node: str = ""  # the agent's own underlay node; defaults to home_node
    latency_base_ms: float = 2.0
    latency_jitter_ms: float = 1.0
    degrade_factor: float = 5.0
    waypoints: tuple[str, ...] = ()
    dwell_ms: int = DEFAULT_DWELL_MS
    hop_interval_ms: int = DEFAULT_HOP_INTERVAL_MS

    def __post_init__(self) -> None:
        if self.archetype == Archetype.NOMADIC and not self.waypoints:
            raise SpectrumError("a nomadic agent needs waypoints")

    @property
    def priority(self) -> QosPriority:
        return ARCHETYPE_PRIORITY[self.archetype]

    @property
    def node_name(self) -> str:
        return self.node or self.home_node

    def demand(self, registered_at: int = 0) -> DemandProfile:
        return DemandProfile(
            sn_id=self.sn_id,
            priority=self.priority,
            min_bw_mhz=self.min_bw_mhz,
            pref_bw_mhz=self.pref_bw_mhz,
            registered_at=registered_at,
        )

    def to_json(self) -> dict:
        return {
            "sn_id": self.sn_id,
            "archetype": self.archetype.value,
            "min_bw_mhz": self.min_bw_mhz,
            "pref_bw_mhz": self.pref_bw_mhz,
            "home_node": self.home_node,
            "node": self.node,
            "latency_base_ms": self.latency_base_ms,
            "latency_jitter_ms": self.latency_jitter_ms,
            "degrade_factor": self.degrade_factor,
            "waypoints": list(self.waypoints),
            "dwell_ms": self.dwell_ms,
            "hop_interval_ms": self.hop_interval_ms,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SncConfig":
        return cls(
            sn_id=obj["sn_id"],
            archetype=Archetype(obj["archetype"]),
            min_bw_mhz=int(obj["min_bw_mhz"]),
            pref_bw_mhz=int(obj["pref_bw_mhz"]),
            home_node=obj["home_node"],
            node=obj.get("node", ""),
            latency_base_ms=float(obj.get("latency_base_ms", 2.0)),
            latency_jitter_ms=float(obj.get("latency_jitter_ms", 1.0)),
            degrade_factor=float(obj.get("degrade_factor", 5.0)),
            waypoints=tuple(obj.get("waypoints", [])),
            dwell_ms=int(obj.get("dwell_ms", DEFAULT_DWELL_MS)),
            hop_interval_ms=int(obj.get("hop_interval_ms", DEFAULT_HOP_INTERVAL_MS)),
        )


def control_loop_sample(
    config: SncConfig,
    granted_width_mhz: int,
    rng: random.Random,
) -> float:
    """One modeled closed-loop latency sample in milliseconds.

    Nominal samples (granted width >= demand min) lie in
    [base, base + jitter]; a degraded grant multiplies the sample by
    degrade_factor. This is a calibrated model, not a measurement.
    """
    sample = config.latency_base_ms + rng.uniform(0.0, config.latency_jitter_ms)
    if granted_width_mhz < config.min_bw_mhz:
        sample *= config.degrade_factor
    return sample


class AgentEnv(Protocol):
    """Engine-provided facade through which an agent touches the world."""

    @property
    def now(self) -> int: ...

    def schedule(self, delay_ms: int, fn: Callable[[int], None]) -> None: ...

    def send_to_sm(self, agent: "SncAgent", message: dict) -> None: ...

    def discover_sm(self, node_name: str) -> str | None: ...

    def relocate(self, mobile: str, new_anchor: str) -> None: ...


@dataclass
class SncAgent:
    config: SncConfig
    env: AgentEnv
    node: str = ""
    registered: bool = False
    tuned: SpectrumAllocation | None = None
    epoch: int = 0
    phase: AgvPhase = AgvPhase.DOCKED
    enabled: bool = True
    permanently_idle: bool = False
    _backoff_ms: int = BACKOFF_BASE_MS
    _mission_home: str = ""
    latency_samples: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.node:
            self.node = self.config.node_name
        self._mission_home = self.config.home_node

    # -- bootstrap -----------------------------------------------------------

    def start(self) -> None:
        if self.config.archetype == Archetype.NOMADIC:
            return  # registers only on arrival at the machine
        self.bootstrap()

    def bootstrap(self) -> None:
        if not self.enabled or self.permanently_idle or self.registered:
            return
        sm_addr = self.env.discover_sm(self.node)
        if sm_addr is None:
            delay = self._backoff_ms
            self._backoff_ms = min(self._backoff_ms * BACKOFF_FACTOR, BACKOFF_CAP_MS)
            self.env.schedule(delay, lambda t: self.bootstrap())
            return
        self._backoff_ms = BACKOFF_BASE_MS
        self.env.send_to_sm(
            self,
            {"kind": "REGISTER", "payload": {"demand": self.config.demand(self.env.now).to_json()}},
        )

    # -- inbound messages ----------------------------------------------------

    def on_message(self, message: dict) -> None:
        kind = message["kind"]
        payload = message.get("payload", {})
        if kind == "OFFER":
            self.env.send_to_sm(
                self,
                {
                    "kind": "ACCEPT",
                    "payload": {"sn_id": self.config.sn_id, "epoch": payload["epoch"]},
                },
            )
        elif kind == "COMMIT":
            alloc = payload.get("allocation")
            if alloc is not None:
                self._apply(SpectrumAllocation.from_json(alloc), int(payload["epoch"]))
            self.registered = True
        elif kind == "REALLOC_NOTICE":
            epoch = int(payload["epoch"])
            self.env.send_to_sm(
                self,
                {
                    "kind": "REALLOC_ACK",
                    "payload": {"sn_id": self.config.sn_id, "epoch": epoch},
                },
            )
            alloc = SpectrumAllocation.from_json(payload["allocation"])
            delay = max(0, int(payload["activate_at"]) - self.env.now)
            self.env.schedule(delay, lambda t, a=alloc, e=epoch: self._apply(a, e))
        elif kind == "REJECT":
            reason = payload.get("reason")
            if reason == "invalid_demand":
                self.permanently_idle = True
            elif self.enabled and not self.registered:
                self.env.schedule(REJECT_RETRY_MS, lambda t: self.bootstrap())

    def _apply(self, alloc: SpectrumAllocation, epoch: int) -> None:
        if epoch <= self.epoch:
            return  # stale epoch: never applied
        self.tuned = alloc
        self.epoch = epoch

    # -- sensing toggle ------------------------------------------------------

    def toggle_sensing(self, on: bool) -> bool:
        """Returns True when the toggle caused an action."""
        if self.config.archetype != Archetype.SENSING:
            raise SpectrumError("toggle applies to sensing agents only")
        if on == self.enabled:
            return False
        self.enabled = on
        if not on:
            if self.registered:
                self.env.send_to_sm(
                    self,
                    {"kind": "RELEASE", "payload": {"sn_id": self.config.sn_id}},
                )
                self.registered = False
                self.tuned = None
            return True
        self.bootstrap()
        return True

    # -- AGV mission ---------------------------------------------------------

    def call(self) -> bool:
        """Summon the AGV; only one mission at a time."""
        if self.config.archetype != Archetype.NOMADIC:
            raise SpectrumError("only the nomadic agent answers a call")
        if self.phase != AgvPhase.DOCKED:
            return False
        self.phase = AgvPhase.SUMMONED
        travel_ms = len(self.config.waypoints) * self.config.hop_interval_ms
        eta = self.env.now + travel_ms
        self.env.send_to_sm(
            self,
            {"kind": "INTENT", "payload": {"sn_id": self.config.sn_id, "eta_ms": eta}},
        )
        self.env.schedule(self.config.hop_interval_ms, lambda t: self._hop_out(0))
        return True

    def _hop_out(self, index: int) -> None:
        if self.phase == AgvPhase.SUMMONED:
            self.phase = AgvPhase.TRAVERSING
        self.env.relocate(self.node, self.config.waypoints[index])
        if index + 1 < len(self.config.waypoints):
            self.env.schedule(
                self.config.hop_interval_ms, lambda t: self._hop_out(index + 1)
            )
        else:
            self._arrive()

    def _arrive(self) -> None:
        self.phase = AgvPhase.AT_MACHINE
        self.env.send_to_sm(
            self,
            {"kind": "REGISTER", "payload": {"demand": self.config.demand(self.env.now).to_json()}},
        )
        self.env.schedule(self.config.dwell_ms, lambda t: self._depart())

    def _depart(self) -> None:
        self.phase = AgvPhase.RETURNING
        back = tuple(reversed(self.config.waypoints[:-1])) + (self._mission_home,)
        self.env.schedule(self.config.hop_interval_ms, lambda t: self._hop_back(back, 0))

    def _hop_back(self, path: tuple[str, ...], index: int) -> None:
        self.env.relocate(self.node, path[index])
        if index + 1 < len(path):
            self.env.schedule(
                self.config.hop_interval_ms, lambda t: self._hop_back(path, index + 1)
            )
        else:
            self._dock()

    def _dock(self) -> None:
        self.phase = AgvPhase.DOCKED
        if self.registered:
            self.env.send_to_sm(
                self, {"kind": "RELEASE", "payload": {"sn_id": self.config.sn_id}}
            )
            self.registered = False
            self.tuned = None

    # -- telemetry -----------------------------------------------------------

    def telemetry(self, rng: random.Random) -> dict:
        payload: dict = {
            "sn_id": self.config.sn_id,
            "archetype": self.config.archetype.value,
            "phase": self.phase.value,
            "tuned": self.tuned.to_json() if self.tuned else None,
            "epoch": self.epoch,
        }
        if self.config.archetype == Archetype.CONTROL and self.tuned is not None:
            sample = control_loop_sample(self.config, self.tuned.width_mhz, rng)
            self.latency_samples.append(sample)
            payload["latency_ms"] = sample
        return payload
