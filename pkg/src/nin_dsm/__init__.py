"""Dynamic spectrum management for networks-in-network, desk scale.

A centralized spectrum manager negotiates and reallocates a shared
3.7-3.8 GHz overlayer band among static and nomadic sub-networks, over a
zero-touch ID-routing control plane with DHT discovery, driven by a
deterministic discrete-event scenario engine.
"""

from .spectrum import (
    AllocationPlan,
    Band,
    DemandProfile,
    QosPriority,
    SpectrumAllocation,
    SpectrumError,
    overlaps,
    plan_utilization,
)
from .allocator import AllocatorInput, admission_order, compute_plan, oracle_plan
from .kira import ControlPlane, Topology, fnv1a64, xor_distance
from .sm import LedgerEvent, SessionState, SpectrumManager, replay
from .agents import Archetype, AgvPhase, SncAgent, SncConfig, control_loop_sample
from .scenario import Scenario, load_scenario, parse_scenario
from .engine import Engine

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "AllocatorInput",
    "Archetype",
    "AgvPhase",
    "Band",
    "ControlPlane",
    "DemandProfile",
    "Engine",
    "LedgerEvent",
    "QosPriority",
    "Scenario",
    "SessionState",
    "SncAgent",
    "SncConfig",
    "SpectrumAllocation",
    "SpectrumError",
    "SpectrumManager",
    "Topology",
    "admission_order",
    "compute_plan",
    "control_loop_sample",
    "fnv1a64",
    "load_scenario",
    "oracle_plan",
    "overlaps",
    "parse_scenario",
    "plan_utilization",
    "replay",
    "xor_distance",
]
