"""Zero-touch control plane: ID routing, k-closest contacts, and DHT discovery.

A deliberately small stand-in for a full self-organizing routing
architecture: synchronous-round distance-vector routing over a simulated
underlay, XOR-metric contacts for greedy fallback, and a DHT that homes
records at the reachable node closest to the key hash. Node IDs derive
deterministically from node names, so nothing is ever hand-assigned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

K_CONTACTS = 8
DHT_REPLICAS = 2

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid topology or node configuration."""


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a hash; the deterministic node-ID and DHT-key function."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def xor_distance(a: int, b: int) -> int:
    return a ^ b


@dataclass
class Topology:
    """Underlay graph plus the current anchor of each mobile node."""

    nodes: set[str]
    links: set[frozenset[str]]
    attachments: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        for link in self.links:
            if len(link) != 2 or not link <= self.nodes:
                raise ConfigError(f"link {sorted(link)} references unknown nodes")
        for mobile, anchor in self.attachments.items():
            if mobile not in self.nodes or anchor not in self.nodes:
                raise ConfigError(f"attachment {mobile}->{anchor} references unknown nodes")
            if mobile == anchor:
                raise ConfigError(f"mobile node {mobile} cannot anchor to itself")

    def effective_links(self) -> set[frozenset[str]]:
        return self.links | {
            frozenset((m, a)) for m, a in self.attachments.items()
        }

    def neighbors(self, name: str) -> list[str]:
        out = []
        for link in self.effective_links():
            if name in link:
                (other,) = link - {name}
                out.append(other)
        return sorted(out)

    def bfs_hops(self, src: str) -> dict[str, int]:
        dist = {src: 0}
        queue = deque([src])
        adjacency = self._adjacency()
        while queue:
            cur = queue.popleft()
            for nxt in adjacency[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return dist

    def _adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for link in self.effective_links():
            a, b = sorted(link)
            adj[a].append(b)
            adj[b].append(a)
        for lst in adj.values():
            lst.sort()
        return adj

    def diameter(self) -> int:
        best = 0
        for node in self.nodes:
            hops = self.bfs_hops(node)
            best = max(best, max(hops.values(), default=0))
        return best


@dataclass
class DhtRecord:
    key: str
    value: str
    origin: str
    stored_at: int = 0
    replicas: list[int] = field(default_factory=list)


class ControlPlane:
    """One simulated control-plane instance; single-threaded per instance."""

    def __init__(self, topology: Topology, k_contacts: int = K_CONTACTS, replicas: int = DHT_REPLICAS):
        topology.validate()
        self.topology = topology
        self.k_contacts = k_contacts
        self.replicas = replicas
        self.ids: dict[str, int] = {}
        self.names: dict[int, str] = {}
        for name in sorted(topology.nodes):
            node_id = fnv1a64(name)
            if node_id in self.names:
                raise ConfigError(
                    f"node-ID collision between {self.names[node_id]!r} and {name!r}"
                )
            self.ids[name] = node_id
            self.names[node_id] = name
        # name -> {dst_id: (hop_count, next_hop_name)}
        self.tables: dict[str, dict[int, tuple[int, str]]] = {
            n: {} for n in topology.nodes
        }
        self.converged = False
        self._records: dict[int, DhtRecord] = {}
        # per-node local key-value stores; re-homed after each convergence
        self._stores: dict[str, dict[int, str]] = {n: {} for n in topology.nodes}

    # -- routing -------------------------------------------------------------

    def converge(self, rounds: int | None = None) -> None:
        """Run synchronous neighbor-exchange rounds until tables are stable.

        diameter+1 rounds from scratch suffice; extra rounds are no-ops.
        """
        if rounds is None:
            rounds = self.topology.diameter() + 1
        if rounds < 1:
            raise ConfigError("rounds must be >= 1")
        tables: dict[str, dict[int, tuple[int, str]]] = {
            n: {} for n in self.topology.nodes
        }
        adjacency = self.topology._adjacency()
        for _ in range(rounds):
            new_tables = {}
            for node in sorted(self.topology.nodes):
                table = dict(tables[node])
                for neighbor in adjacency[node]:
                    offers = [(self.ids[neighbor], 1, neighbor)]
                    for dst, (hops, next_hop) in tables[neighbor].items():
                        if next_hop == node:  # split horizon
                            continue
                        offers.append((dst, hops + 1, neighbor))
                    for dst, hops, via in offers:
                        if dst == self.ids[node]:
                            continue
                        current = table.get(dst)
                        if (
                            current is None
                            or hops < current[0]
                            or (hops == current[0] and via < current[1])
                        ):
                            table[dst] = (hops, via)
                new_tables[node] = table
            tables = new_tables
        self.tables = tables
        self.converged = True
        self._rehome_records()

    def contacts(self, name: str) -> list[int]:
        """The k reachable node IDs XOR-closest to this node's own ID."""
        own = self.ids[name]
        reachable = list(self.tables[name].keys())
        reachable.sort(key=lambda other: xor_distance(own, other))
        return reachable[: self.k_contacts]

    def route(self, src: str, dst: int) -> list[str] | None:
        """Loop-free path of node names from src to the node with ID dst."""
        if src not in self.ids:
            raise ConfigError(f"unknown node {src!r}")
        path = [src]
        visited = {src}
        current = src
        while self.ids[current] != dst:
            entry = self.tables[current].get(dst)
            if entry is not None:
                next_hop = entry[1]
            else:
                # Greedy XOR fallback: step toward the strictly closest contact.
                here = xor_distance(self.ids[current], dst)
                candidates = [
                    c
                    for c in self.contacts(current)
                    if xor_distance(c, dst) < here
                ]
                if not candidates:
                    return None
                target = min(candidates, key=lambda c: xor_distance(c, dst))
                next_hop = self.tables[current][target][1]
            if next_hop in visited:
                return None
            path.append(next_hop)
            visited.add(next_hop)
            current = next_hop
        return path

    def reachable_from(self, name: str) -> list[str]:
        return sorted({name} | {self.names[i] for i in self.tables[name]})

    # -- DHT -----------------------------------------------------------------

    def _closest_nodes(self, origin: str, key_hash: int) -> list[int]:
        component = [self.ids[n] for n in self.reachable_from(origin)]
        component.sort(key=lambda node_id: xor_distance(node_id, key_hash))
        return component

    def dht_put(self, origin: str, key: str, value: str) -> None:
        if origin not in self.ids:
            raise ConfigError(f"unknown node {origin!r}")
        key_hash = fnv1a64(key)
        record = DhtRecord(key=key, value=value, origin=origin)
        self._records[key_hash] = record
        self._home(record)

    def _home(self, record: DhtRecord) -> None:
        key_hash = fnv1a64(record.key)
        closest = self._closest_nodes(record.origin, key_hash)
        record.stored_at = closest[0]
        record.replicas = closest[1 : 1 + self.replicas]
        for holder in [record.stored_at, *record.replicas]:
            self._stores[self.names[holder]][key_hash] = record.value

    def _rehome_records(self) -> None:
        for store in self._stores.values():
            store.clear()
        for record in self._records.values():
            self._home(record)

    def dht_get(self, origin: str, key: str) -> str | None:
        if origin not in self.ids:
            raise ConfigError(f"unknown node {origin!r}")
        key_hash = fnv1a64(key)
        closest = self._closest_nodes(origin, key_hash)
        if not closest:
            return None
        return self._stores[self.names[closest[0]]].get(key_hash)

    # -- mobility ------------------------------------------------------------

    def relocate(self, mobile: str, new_anchor: str) -> None:
        """Re-attach a mobile node; tables are stale until the next converge."""
        if mobile not in self.topology.nodes:
            raise ConfigError(f"unknown mobile node {mobile!r}")
        if new_anchor not in self.topology.nodes:
            raise ConfigError(f"unknown anchor node {new_anchor!r}")
        if mobile == new_anchor:
            raise ConfigError("a node cannot anchor to itself")
        if mobile not in self.topology.attachments:
            raise ConfigError(f"node {mobile!r} is not mobile")
        if self.topology.attachments[mobile] == new_anchor:
            return
        self.topology.attachments[mobile] = new_anchor
        self.converged = False

    # -- introspection -------------------------------------------------------

    def routing_dump(self) -> dict:
        """Debug snapshot of routing state for the dashboard."""
        return {
            "converged": self.converged,
            "nodes": {
                name: {
                    "id": f"{self.ids[name]:016x}",
                    "neighbors": self.topology.neighbors(name),
                    "entries": len(self.tables[name]),
                    "contacts": [f"{c:016x}" for c in self.contacts(name)],
                }
                for name in sorted(self.topology.nodes)
            },
            "attachments": dict(sorted(self.topology.attachments.items())),
            "links": sorted(sorted(link) for link in self.topology.effective_links()),
        }
