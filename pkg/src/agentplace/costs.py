"""Latency and resource-cost formulas plus the placement and migration objectives.

All functions are pure: they read server/network state and never mutate it.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import InfeasiblePlacement, NegativeCost, TargetInfeasible, UnassignedAgent
from .model import (
    EPS,
    MB_PER_GB,
    Agent,
    CommEvent,
    EdgeServer,
    EdgeSystem,
    NetworkModel,
    ObjectiveWeights,
    Placement,
    ResourceVector,
    Task,
)


@dataclass(frozen=True)
class CostBreakdown:
    transmit_s: float = 0.0
    migration_s: float = 0.0
    initiation_s: float = 0.0
    processing_s: float = 0.0
    cpu_cost: float = 0.0
    storage_cost_gb: float = 0.0
    comm_cost_mb: float = 0.0
    # pure transfer parts, needed to derive cpu_cost
    file_transfer_s: float = 0.0
    memory_transfer_s: float = 0.0

    @property
    def total_s(self) -> float:
        return self.transmit_s + self.migration_s + self.initiation_s + self.processing_s

    @property
    def total_cost(self) -> float:
        return self.cpu_cost + self.storage_cost_gb + self.comm_cost_mb


@dataclass(frozen=True)
class NetGain:
    latency_gain_s: float
    migration_cost_s: float
    dependency_cost_s: float
    migration_time_s: float = 0.0

    @property
    def net_s(self) -> float:
        return self.latency_gain_s - self.migration_cost_s - self.dependency_cost_s

    @classmethod
    def compose(
        cls,
        latency_gain_s: float,
        migration_time_s: float,
        overhead: float,
        dependency_delta_s: float,
        weights: ObjectiveWeights,
    ) -> NetGain:
        return cls(
            latency_gain_s=latency_gain_s,
            migration_cost_s=migration_time_s + weights.gamma * overhead,
            dependency_cost_s=weights.theta_dep * dependency_delta_s,
            migration_time_s=migration_time_s,
        )


# ---------------------------------------------------------------- latency


def effective_bandwidth(server_id: str, net: NetworkModel, client: str | None = None) -> float:
    """Bandwidth a user at ``client`` sees when uploading to ``server_id``.

    With the client attached to the server itself this is the server's own
    access bandwidth; otherwise the slowest of the client's access link, the
    inter-server path and the server's access link.
    """
    own = net.client_bandwidth[server_id]
    if client is None or client == server_id:
        return own
    return min(own, net.client_bandwidth[client], net.bw(client, server_id))


def file_transfer_time(task: Task, server_id: str, net: NetworkModel, client: str | None = None) -> float:
    return task.file_size_mb / effective_bandwidth(server_id, net, client)


def transmit_latency(task: Task, server_id: str, net: NetworkModel, client: str | None = None) -> float:
    return file_transfer_time(task, server_id, net, client) + task.prompt_time_s


def memory_transfer_time(agent: Agent, source_id: str, target_id: str, net: NetworkModel) -> float:
    if source_id == target_id:
        return 0.0
    return agent.memory_state_gb * MB_PER_GB / net.bw(source_id, target_id)


def migration_latency(agent: Agent, source: EdgeServer, target: EdgeServer, net: NetworkModel) -> float:
    """Export, ship, start and load an agent's memory on ``target``."""
    arriving = 0 if agent.id in target.hosted else 1
    return (
        source.export_time_s
        + memory_transfer_time(agent, source.id, target.id, net)
        + target.init_time(len(target.hosted) + arriving)
        + target.load_time_s
    )


def initiation_latency(
    task: Task,
    placement: Placement,
    servers: Mapping[str, EdgeServer],
    running: Iterable[str] = (),
) -> float:
    """Start-up time of the task's newly started agents.

    ``servers`` must reflect the state after the placement was applied, so
    each server's hosted count already includes the new agents.
    """
    warm = set(running)
    total = 0.0
    for agent_id in task.required_agents:
        if agent_id in warm:
            continue
        server_id = placement.assignments.get(agent_id)
        if server_id is None:
            raise UnassignedAgent(agent_id)
        server = servers[server_id]
        total += server.init_time(len(server.hosted))
    return total


def processing_latency(task: Task) -> float:
    return task.file_processing_time_s + task.llm_time_s


def total_latency(
    transmit_s: float, migration_s: float, initiation_s: float, processing_s: float
) -> CostBreakdown:
    return CostBreakdown(
        transmit_s=transmit_s,
        migration_s=migration_s,
        initiation_s=initiation_s,
        processing_s=processing_s,
    )


def task_latency(
    task: Task,
    placement: Placement,
    system: EdgeSystem,
    client: str | None = None,
    migration_s: float = 0.0,
    memory_transfer_s: float = 0.0,
    running: Iterable[str] = (),
) -> CostBreakdown:
    """Latency breakdown of one task execution against the post-placement ``system``.

    The task's file is received by the server hosting its first required agent.
    """
    lead = task.required_agents[0]
    lead_server = placement.assignments.get(lead) or system.host_of(lead)
    if lead_server is None:
        raise UnassignedAgent(lead)
    file_s = file_transfer_time(task, lead_server, system.network, client)
    return CostBreakdown(
        transmit_s=file_s + task.prompt_time_s,
        migration_s=migration_s,
        initiation_s=initiation_latency(task, placement, system.servers, running),
        processing_s=processing_latency(task),
        file_transfer_s=file_s,
        memory_transfer_s=memory_transfer_s,
    )


# ---------------------------------------------------------------- resource cost


def cpu_cost(total_s: float, file_transfer_s: float, memory_transfer_s: float = 0.0) -> float:
    value = total_s - (file_transfer_s + memory_transfer_s)
    if value < -EPS:
        raise NegativeCost(f"transfer time {file_transfer_s + memory_transfer_s} exceeds total {total_s}")
    return max(value, 0.0)


def storage_cost(tasks: Iterable[Task], agents: Iterable[Agent]) -> float:
    return sum(t.storage_gb for t in tasks) + sum(a.memory_state_gb for a in agents)


def comm_cost(events: Iterable[CommEvent], location: Mapping[str, str]) -> float:
    """Megabits exchanged between agents on different servers."""
    total = 0.0
    for ev in events:
        src = location.get(ev.from_agent)
        dst = location.get(ev.to_agent)
        if src is not None and dst is not None and src != dst:
            total += ev.size_mb
    return total


# ---------------------------------------------------------------- objectives


def check_placement(
    task: Task,
    placement: Placement,
    system: EdgeSystem,
    candidates: Iterable[str] | None = None,
) -> list[str]:
    """Constraint violations of ``placement`` against the current (pre-placement) state."""
    problems = []
    allowed = set(candidates) if candidates is not None else None
    for agent_id in task.required_agents:
        if system.host_of(agent_id) is None and agent_id not in placement.assignments:
            problems.append(f"agent {agent_id} unassigned")
    for agent_id, server_id in placement.assignments.items():
        if agent_id not in system.agents:
            problems.append(f"unknown agent {agent_id}")
        elif system.host_of(agent_id) is not None:
            problems.append(f"agent {agent_id} already running")
        if server_id not in system.servers:
            problems.append(f"unknown server {server_id}")
        elif allowed is not None and server_id not in allowed:
            problems.append(f"server {server_id} outside candidate set")
    if problems:
        return problems

    per_server: dict[str, list[str]] = {}
    for agent_id, server_id in placement.assignments.items():
        per_server.setdefault(server_id, []).append(agent_id)
    for server_id, agent_ids in per_server.items():
        server = system.servers[server_id]
        if len(server.hosted) + len(agent_ids) > server.max_agents:
            problems.append(f"server {server_id} exceeds max_agents")
        need = ResourceVector.total(system.agents[a].requirements for a in sorted(agent_ids))
        if not need.fits_in(server.remaining):
            problems.append(f"server {server_id} lacks capacity")

    where = dict(system.location)
    where.update(placement.assignments)
    for agent_id in placement.assignments:
        for peer in system.agents[agent_id].colocate_with:
            if peer in where and where[peer] != where[agent_id]:
                problems.append(f"agents {agent_id} and {peer} must share a server")
    return problems


def ead_objective(
    task: Task,
    placement: Placement,
    system: EdgeSystem,
    weights: ObjectiveWeights | None = None,
    client: str | None = None,
    candidates: Iterable[str] | None = None,
) -> float:
    """Initial deployment cost of placing the task's agents; lower is better.

    Sums memory shipping from the client's server plus start-up time, the
    cpu load each used server takes relative to its remaining cpu, and the
    theta-weighted communication time to every located dependency peer.
    """
    w = weights or system.weights
    problems = check_placement(task, placement, system, candidates)
    if problems:
        raise InfeasiblePlacement("; ".join(problems))
    origin = client if client is not None else task.origin_server
    net = system.network
    counts = Counter(placement.assignments.values())
    where = dict(system.location)
    where.update(placement.assignments)

    startup = 0.0
    for agent_id, server_id in placement.assignments.items():
        agent = system.agents[agent_id]
        server = system.servers[server_id]
        startup += memory_transfer_time(agent, origin, server_id, net)
        startup += server.init_time(len(server.hosted) + counts[server_id])

    load = 0.0
    for server_id in counts:
        cpu = sum(system.agents[a].requirements.cpu for a, s in placement.assignments.items() if s == server_id)
        if cpu > 0:
            load += cpu / system.servers[server_id].remaining.cpu

    dep = 0.0
    for agent_id, server_id in placement.assignments.items():
        for peer in sorted(system.agents[agent_id].dependencies):
            peer_server = where.get(peer)
            if peer_server is None:
                continue
            dep += net.comm_time(server_id, peer_server, system.message_size(agent_id, peer))

    return startup + load + w.theta * dep


def expected_comm_time(
    client: str | Mapping[str, float], server_id: str, net: NetworkModel, size_mb: float
) -> float:
    if isinstance(client, str):
        return net.comm_time(client, server_id, size_mb)
    mass = sum(client.values())
    return sum(p * net.comm_time(c, server_id, size_mb) for c, p in client.items()) / mass


def net_gain(
    agent_id: str,
    target: str,
    system: EdgeSystem,
    client: str | Mapping[str, float],
    weights: ObjectiveWeights | None = None,
    client_message_mb: float | None = None,
) -> NetGain:
    """Benefit of moving a running agent to ``target`` for a user at ``client``.

    ``client`` is either the user's current server or a probability mass
    over next positions.
    """
    w = weights or system.weights
    agent = system.agents[agent_id]
    source_id = system.host_of(agent_id)
    if source_id is None:
        raise UnassignedAgent(agent_id)
    net = system.network
    source = system.servers[source_id]
    dest = system.servers[target]
    if target != source_id and not dest.can_host(agent.requirements):
        raise TargetInfeasible(f"{target} cannot host {agent_id}")

    t_mig = migration_latency(agent, source, dest, net)
    overhead = agent.memory_state_gb
    if target == source_id:
        return NetGain.compose(0.0, t_mig, overhead, 0.0, w)

    size = system.message_size_mb if client_message_mb is None else client_message_mb
    latency_gain = expected_comm_time(client, source_id, net, size) - expected_comm_time(client, target, net, size)
    dep_delta = 0.0
    for peer in sorted(agent.dependencies):
        peer_server = system.host_of(peer)
        if peer_server is None:
            continue
        msg = system.message_size(agent_id, peer)
        dep_delta += net.comm_time(target, peer_server, msg) - net.comm_time(source_id, peer_server, msg)
    return NetGain.compose(latency_gain, t_mig, overhead, dep_delta, w)


def logistic(x: float, scale: float = 1.0) -> float:
    z = x / scale
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)
