"""Scenario files: schema validation, loading, and the event list."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .agents import Archetype, SncConfig
from .kira import Topology
from .spectrum import Band

ACTIONS = ("REGISTER_SN", "CALL_AGV", "TOGGLE_SN2", "MOVE_NODE", "END")
DEFAULT_PER_HOP_MS = 0.2


class ScenarioError(ValueError):
    """The scenario file violates the schema or its cross-references."""


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    action: str
    args: dict = field(default_factory=dict)


@dataclass
class Scenario:
    seed: int
    band: Band
    guard_mhz: int
    sm_node: str
    topology: Topology
    agents: list[SncConfig]
    events: list[ScenarioEvent]
    per_hop_ms: float = DEFAULT_PER_HOP_MS


def _schema() -> dict:
    text = resources.files("nin_dsm").joinpath("schemas/scenario.schema.json").read_text()
    return json.loads(text)


def parse_scenario(obj: dict, source: str = "<scenario>") -> Scenario:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "(root)"
        raise ScenarioError(f"{source}: at {where}: {first.message}")

    band_obj = obj.get("band", {"lo_mhz": 3700, "hi_mhz": 3800, "grid_mhz": 1})
    band = Band.from_json(band_obj)
    topo_obj = obj["topology"]
    topology = Topology(
        nodes=set(topo_obj["nodes"]),
        links={frozenset(pair) for pair in topo_obj["links"]},
        attachments=dict(topo_obj.get("attachments", {})),
    )
    topology.validate()
    if obj["sm_node"] not in topology.nodes:
        raise ScenarioError(f"{source}: sm_node {obj['sm_node']!r} is not in the topology")

    agents = [SncConfig.from_json(a) for a in obj["agents"]]
    ids = [a.sn_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"{source}: duplicate sn_id in agents")
    for agent in agents:
        for node in (agent.home_node, agent.node_name, *agent.waypoints):
            if node not in topology.nodes:
                raise ScenarioError(
                    f"{source}: agent {agent.sn_id} references unknown node {node!r}"
                )
        if agent.archetype == Archetype.NOMADIC and agent.node_name not in topology.attachments:
            raise ScenarioError(
                f"{source}: nomadic agent {agent.sn_id} node {agent.node_name!r} has no attachment"
            )

    events = [
        ScenarioEvent(at_ms=e["at_ms"], action=e["action"], args=e.get("args", {}))
        for e in obj["events"]
    ]
    if sum(1 for e in events if e.action == "END") != 1:
        raise ScenarioError(f"{source}: scenario must contain exactly one END event")
    for event in events:
        sn = event.args.get("sn_id")
        if sn is not None and sn not in ids:
            raise ScenarioError(f"{source}: event references unknown sn_id {sn!r}")
        if event.action == "MOVE_NODE":
            for key in ("node", "anchor"):
                if event.args.get(key) not in topology.nodes:
                    raise ScenarioError(
                        f"{source}: MOVE_NODE references unknown node {event.args.get(key)!r}"
                    )
    # stable order: time, then file order
    events = [e for _, _, e in sorted((e.at_ms, i, e) for i, e in enumerate(events))]

    delays = obj.get("delays", {})
    return Scenario(
        seed=int(obj["seed"]),
        band=band,
        guard_mhz=int(obj.get("guard_mhz", 1)),
        sm_node=obj["sm_node"],
        topology=topology,
        agents=agents,
        events=events,
        per_hop_ms=float(delays.get("per_hop_ms", DEFAULT_PER_HOP_MS)),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return parse_scenario(obj, source=str(path))


def bundled_scenario_path(name: str = "walkthrough") -> Path:
    return Path(str(resources.files("nin_dsm").joinpath(f"scenarios/{name}.json")))
