"""Domain types and capacity accounting."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

from .errors import AgentLimitExceeded, AlreadyHosted, CapacityExceeded, Disconnected

# megabits per gigabyte, used when agent memory state crosses the network
MB_PER_GB = 8000.0
# absorbs float noise in capacity sums
EPS = 1e-9

RESOURCES = ("cpu", "memory", "storage", "bandwidth")


@dataclass(frozen=True)
class ResourceVector:
    cpu: float = 0.0
    memory: float = 0.0
    storage: float = 0.0
    bandwidth: float = 0.0

    def __post_init__(self):
        for name in RESOURCES:
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"resource {name} must be >= 0, got {value}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cpu, self.memory, self.storage, self.bandwidth)

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def __sub__(self, other: ResourceVector) -> ResourceVector:
        out = []
        for name, a, b in zip(RESOURCES, self.as_tuple(), other.as_tuple()):
            d = a - b
            if d < -EPS:
                raise CapacityExceeded(name)
            out.append(max(d, 0.0))
        return ResourceVector(*out)

    def fits_in(self, other: ResourceVector) -> bool:
        return all(a <= b + EPS for a, b in zip(self.as_tuple(), other.as_tuple()))

    @classmethod
    def total(cls, vectors: Iterable[ResourceVector]) -> ResourceVector:
        acc = [0.0, 0.0, 0.0, 0.0]
        for v in vectors:
            for i, x in enumerate(v.as_tuple()):
                acc[i] += x
        return cls(*acc)


@dataclass(frozen=True)
class Agent:
    id: str
    requirements: ResourceVector
    memory_state_gb: float = 0.0
    dependencies: frozenset[str] = frozenset()
    colocate_with: frozenset[str] = frozenset()
    host: str | None = None
    # per-peer message size overrides (Mb); peers not listed use the system default
    message_sizes: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dependencies", frozenset(self.dependencies))
        object.__setattr__(self, "colocate_with", frozenset(self.colocate_with))
        if self.memory_state_gb < 0:
            raise ValueError("memory_state_gb must be >= 0")
        if self.id in self.dependencies:
            raise ValueError(f"agent {self.id} depends on itself")
        if not self.colocate_with <= self.dependencies:
            raise ValueError(f"agent {self.id}: colocate_with must be a subset of dependencies")


@dataclass
class EdgeServer:
    id: str
    capacity: ResourceVector
    export_time_s: float = 1.0
    load_time_s: float = 1.0
    init_base_s: float = 1.0
    init_per_agent_s: float = 0.5
    max_agents: int = 10
    position: tuple[float, float] = (0.0, 0.0)
    hosted: dict[str, ResourceVector] = field(default_factory=dict)
    remaining: ResourceVector = field(init=False)

    def __post_init__(self):
        self.position = tuple(self.position)
        self.hosted = dict(self.hosted)
        self.remaining = self._recompute(self.hosted)

    def _recompute(self, hosted: Mapping[str, ResourceVector]) -> ResourceVector:
        # canonical summation order keeps apply/release exactly reversible
        used = ResourceVector.total(hosted[k] for k in sorted(hosted))
        return self.capacity - used

    def init_time(self, count: int) -> float:
        """Agent start-up time when ``count`` agents (including the new one) run here."""
        return self.init_base_s + self.init_per_agent_s * count

    def can_host(self, requirements: ResourceVector) -> bool:
        return len(self.hosted) < self.max_agents and requirements.fits_in(self.remaining)

    def apply(self, agent: Agent) -> None:
        if agent.id in self.hosted:
            raise AlreadyHosted(f"{agent.id} already hosted on {self.id}")
        if len(self.hosted) + 1 > self.max_agents:
            raise AgentLimitExceeded(f"{self.id} already hosts {self.max_agents} agents")
        try:
            self.remaining - agent.requirements
        except CapacityExceeded as exc:
            raise CapacityExceeded(exc.resource, self.id) from None
        hosted = dict(self.hosted)
        hosted[agent.id] = agent.requirements
        self.remaining = self._recompute(hosted)
        self.hosted = hosted

    def release(self, agent_id: str) -> None:
        hosted = dict(self.hosted)
        del hosted[agent_id]
        self.remaining = self._recompute(hosted)
        self.hosted = hosted

    def headroom(self) -> float:
        """Smallest remaining/capacity ratio over resources with non-zero capacity."""
        ratios = [
            r / c
            for r, c in zip(self.remaining.as_tuple(), self.capacity.as_tuple())
            if c > 0
        ]
        return min(ratios) if ratios else 1.0


def apply_assignment(server: EdgeServer, agent: Agent) -> EdgeServer:
    server.apply(agent)
    return server


def release_assignment(server: EdgeServer, agent_id: str) -> EdgeServer:
    server.release(agent_id)
    return server


@dataclass
class NetworkModel:
    """Undirected server graph with pairwise bandwidth (Mbps).

    ``bandwidth`` must hold an entry for every adjacent pair; missing
    non-adjacent pairs are filled with the widest-path bottleneck.
    """

    adjacency: dict[str, set[str]]
    bandwidth: dict[str, dict[str, float]] = field(default_factory=dict)
    per_hop_latency_s: float = 0.01
    client_bandwidth: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        adj = {n: set(nbrs) for n, nbrs in self.adjacency.items()}
        for n, nbrs in list(adj.items()):
            for m in nbrs:
                adj.setdefault(m, set()).add(n)
        self.adjacency = adj
        self.nodes = tuple(adj)
        bw = {n: {m: float(v) for m, v in self.bandwidth.get(n, {}).items() if m != n} for n in self.nodes}
        for n in self.nodes:
            for m, v in list(bw[n].items()):
                bw.setdefault(m, {}).setdefault(n, v)
        self.bandwidth = bw
        self._fill_widest_paths()
        self._hops: dict[str, dict[str, int]] = {}

    def _fill_widest_paths(self) -> None:
        for src in self.nodes:
            missing = [n for n in self.nodes if n != src and n not in self.bandwidth[src]]
            if not missing:
                continue
            best = {src: math.inf}
            frontier = [src]
            # modified Dijkstra on bottleneck capacity; graphs are small
            done: set[str] = set()
            while frontier:
                u = max(frontier, key=lambda n: best[n])
                frontier.remove(u)
                done.add(u)
                for v in self.adjacency[u]:
                    link = self.bandwidth[u].get(v)
                    if link is None or v in done:
                        continue
                    cand = min(best[u], link)
                    if cand > best.get(v, 0.0):
                        if v not in best:
                            frontier.append(v)
                        best[v] = cand
            for n in missing:
                if n in best:
                    self.bandwidth[src][n] = best[n]

    def bw(self, e1: str, e2: str) -> float:
        if e1 == e2:
            return math.inf
        return self.bandwidth[e1][e2]

    def _bfs(self, src: str) -> dict[str, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def hop(self, e1: str, e2: str) -> int:
        if e1 not in self.adjacency or e2 not in self.adjacency:
            raise KeyError(f"unknown server {e1 if e1 not in self.adjacency else e2}")
        if e1 not in self._hops:
            self._hops[e1] = self._bfs(e1)
        try:
            return self._hops[e1][e2]
        except KeyError:
            raise Disconnected(f"{e1} cannot reach {e2}") from None

    def within(self, origin: str, radius: int) -> list[str]:
        """Servers at most ``radius`` hops from ``origin``, in node order."""
        if origin not in self._hops:
            self._hops[origin] = self._bfs(origin)
        dist = self._hops[origin]
        return [n for n in self.nodes if dist.get(n, math.inf) <= radius]

    def comm_time(self, e1: str, e2: str, size_mb: float) -> float:
        """Hop latency plus serialization time of ``size_mb`` between two servers."""
        if e1 == e2:
            return 0.0
        return self.hop(e1, e2) * self.per_hop_latency_s + size_mb / self.bw(e1, e2)

    def is_connected(self) -> bool:
        return not self.nodes or len(self._bfs(self.nodes[0])) == len(self.nodes)


def hop_count(net: NetworkModel, e1: str, e2: str) -> int:
    return net.hop(e1, e2)


@dataclass(frozen=True)
class CommEvent:
    from_agent: str
    to_agent: str
    size_mb: float

    def __post_init__(self):
        if self.size_mb < 0:
            raise ValueError("comm event size must be >= 0")
        if self.from_agent == self.to_agent:
            raise ValueError("comm event endpoints must differ")


@dataclass(frozen=True)
class Task:
    id: str
    origin_server: str
    required_agents: tuple[str, ...]
    file_size_mb: float = 0.0
    prompt_time_s: float = 0.0
    storage_gb: float = 0.0
    file_processing_time_s: float = 0.0
    llm_time_s: float = 0.0
    comm_events: tuple[CommEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "required_agents", tuple(self.required_agents))
        object.__setattr__(self, "comm_events", tuple(self.comm_events))
        if not self.required_agents:
            raise ValueError(f"task {self.id} requires no agents")
        for name in ("file_size_mb", "prompt_time_s", "storage_gb", "file_processing_time_s", "llm_time_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"task {self.id}: {name} must be >= 0")


@dataclass
class Placement:
    assignments: dict[str, str]
    feasible: bool = True
    score: float | None = None


@dataclass(frozen=True)
class ObjectiveWeights:
    theta: float = 1.0
    gamma: float = 0.1
    theta_dep: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"weight {f.name} must be >= 0")


@dataclass
class EdgeSystem:
    """Mutable world state: servers, topology, the agent catalogue and where agents run."""

    servers: dict[str, EdgeServer]
    network: NetworkModel
    agents: dict[str, Agent]
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    candidate_radius: int = 2
    message_size_mb: float = 1.0
    location: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for server in self.servers.values():
            for agent_id in server.hosted:
                self.location[agent_id] = server.id

    def deploy_initial_hosts(self) -> None:
        """Start every agent whose catalogue entry names a host and that is not running yet."""
        for agent in self.agents.values():
            if agent.host is not None and agent.id not in self.location:
                self.deploy(agent.id, agent.host)

    @property
    def server_ids(self) -> list[str]:
        return list(self.servers)

    def host_of(self, agent_id: str) -> str | None:
        return self.location.get(agent_id)

    def deploy(self, agent_id: str, server_id: str) -> None:
        if agent_id in self.location:
            raise AlreadyHosted(f"{agent_id} already runs on {self.location[agent_id]}")
        self.servers[server_id].apply(self.agents[agent_id])
        self.location[agent_id] = server_id

    def undeploy(self, agent_id: str) -> str:
        server_id = self.location.pop(agent_id)
        self.servers[server_id].release(agent_id)
        return server_id

    def move(self, agent_id: str, target: str) -> None:
        """Relocate a running agent; state is unchanged if the target rejects it."""
        source = self.location[agent_id]
        if source == target:
            return
        self.servers[target].apply(self.agents[agent_id])
        self.servers[source].release(agent_id)
        self.location[agent_id] = target

    def candidates(self, origin: str, radius: int | None = None) -> list[str]:
        r = self.candidate_radius if radius is None else radius
        return self.network.within(origin, r)

    def message_size(self, agent_id: str, peer_id: str) -> float:
        sizes = self.agents[agent_id].message_sizes
        return sizes.get(peer_id, self.message_size_mb)

    def copy(self) -> EdgeSystem:
        servers = {sid: replace(s, hosted=dict(s.hosted)) for sid, s in self.servers.items()}
        return EdgeSystem(
            servers=servers,
            network=self.network,
            agents=self.agents,
            weights=self.weights,
            candidate_radius=self.candidate_radius,
            message_size_mb=self.message_size_mb,
            location=dict(self.location),
        )
