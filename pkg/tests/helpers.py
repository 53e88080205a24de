"""Small random worlds shared by the test modules."""

from __future__ import annotations

import numpy as np

from agentplace.model import (
    Agent,
    CommEvent,
    EdgeServer,
    EdgeSystem,
    NetworkModel,
    ResourceVector,
    Task,
)


def line_network(ids, bw=50.0, client_bw=20.0, per_hop=0.01) -> NetworkModel:
    adj = {s: set() for s in ids}
    bandwidth = {s: {} for s in ids}
    for a, b in zip(ids, ids[1:]):
        adj[a].add(b)
        adj[b].add(a)
        bandwidth[a][b] = bandwidth[b][a] = bw
    return NetworkModel(adj, bandwidth, per_hop, {s: client_bw for s in ids})


def random_network(rng: np.random.Generator, ids) -> NetworkModel:
    n = len(ids)
    adj = {s: set() for s in ids}
    bandwidth = {s: {} for s in ids}

    def link(a, b):
        adj[a].add(b)
        adj[b].add(a)
        bandwidth[a][b] = bandwidth[b][a] = float(rng.uniform(5, 100))

    for i in range(1, n):
        link(ids[int(rng.integers(i))], ids[i])
    for _ in range(int(rng.integers(0, n + 1))):
        i, j = rng.choice(n, 2, replace=False) if n > 1 else (0, 0)
        if i != j and ids[j] not in adj[ids[i]]:
            link(ids[i], ids[j])
    return NetworkModel(
        adj,
        bandwidth,
        float(rng.uniform(0.001, 0.05)),
        {s: float(rng.uniform(5, 50)) for s in ids},
    )


def random_instance(rng: np.random.Generator, max_servers=4, max_agents=4, preload=True):
    """A task over up to ``max_agents`` fresh agents on up to ``max_servers`` servers.

    Some servers already host dependency peers so the communication and
    start-up terms are exercised.
    """
    n_s = int(rng.integers(1, max_servers + 1))
    ids = [f"s{i}" for i in range(n_s)]
    servers = {
        s: EdgeServer(
            s,
            ResourceVector(
                cpu=float(rng.uniform(0.5, 4)),
                memory=float(rng.uniform(0.5, 4)),
                storage=float(rng.uniform(5, 60)),
                bandwidth=float(rng.uniform(5, 40)),
            ),
            export_time_s=float(rng.uniform(0.1, 1)),
            load_time_s=float(rng.uniform(0.1, 1)),
            init_base_s=float(rng.uniform(0.1, 1.5)),
            init_per_agent_s=float(rng.uniform(0.0, 0.8)),
            max_agents=int(rng.integers(2, 6)),
        )
        for s in ids
    }
    net = random_network(rng, ids)

    def req():
        return ResourceVector(
            cpu=float(rng.uniform(0.1, 1.0)),
            memory=float(rng.uniform(0.1, 1.0)),
            storage=float(rng.uniform(1, 10)),
            bandwidth=float(rng.uniform(1, 6)),
        )

    agents = {}
    peers = []
    if preload:
        for j in range(int(rng.integers(0, 3))):
            pid = f"p{j}"
            agents[pid] = Agent(pid, ResourceVector(0.1, 0.1, 1, 1), memory_state_gb=0.01, host=ids[int(rng.integers(n_s))])
            peers.append(pid)
    k = int(rng.integers(1, max_agents + 1))
    names = [f"a{j}" for j in range(k)]
    for j, name in enumerate(names):
        pool = names[:j] + peers
        deps = frozenset(x for x in pool if rng.random() < 0.5)
        agents[name] = Agent(
            name,
            req(),
            memory_state_gb=float(rng.uniform(0.001, 0.05)),
            dependencies=deps,
            message_sizes={d: float(rng.uniform(0.5, 20)) for d in deps if rng.random() < 0.5},
        )
    events = tuple(CommEvent(names[j - 1], names[j], float(rng.uniform(1, 10))) for j in range(1, k))
    task = Task(
        "t",
        ids[int(rng.integers(n_s))],
        tuple(names),
        file_size_mb=float(rng.uniform(1, 50)),
        prompt_time_s=0.2,
        storage_gb=1.0,
        file_processing_time_s=0.5,
        llm_time_s=1.0,
        comm_events=events,
    )
    system = EdgeSystem(servers, net, agents, message_size_mb=float(rng.uniform(0.5, 5)))
    system.deploy_initial_hosts()
    return task, system


def random_migration_instance(rng: np.random.Generator, max_servers=7):
    """A running agent, its running peers and a user somewhere on a random graph."""
    n_s = int(rng.integers(2, max_servers + 1))
    ids = [f"s{i}" for i in range(n_s)]
    net = random_network(rng, ids)
    servers = {
        s: EdgeServer(
            s,
            ResourceVector(
                cpu=float(rng.uniform(0.5, 3)),
                memory=float(rng.uniform(0.5, 3)),
                storage=float(rng.uniform(5, 40)),
                bandwidth=float(rng.uniform(5, 40)),
            ),
            export_time_s=float(rng.uniform(0.0, 0.5)),
            load_time_s=float(rng.uniform(0.0, 0.5)),
            init_base_s=float(rng.uniform(0.0, 0.8)),
            init_per_agent_s=float(rng.uniform(0.0, 0.3)),
        )
        for s in ids
    }
    peers = [f"p{j}" for j in range(int(rng.integers(0, 3)))]
    agents = {
        p: Agent(p, ResourceVector(0.2, 0.2, 1, 1), memory_state_gb=0.01, host=ids[int(rng.integers(n_s))])
        for p in peers
    }
    agents["x"] = Agent(
        "x",
        ResourceVector(
            cpu=float(rng.uniform(0.1, 1.5)),
            memory=float(rng.uniform(0.1, 1.5)),
            storage=float(rng.uniform(1, 10)),
            bandwidth=float(rng.uniform(1, 8)),
        ),
        memory_state_gb=float(rng.uniform(0.0005, 0.01)),
        dependencies=frozenset(p for p in peers if rng.random() < 0.7),
        host=ids[int(rng.integers(n_s))],
    )
    system = EdgeSystem(servers, net, agents, message_size_mb=float(rng.uniform(0.5, 10)))
    try:
        system.deploy_initial_hosts()
    except Exception:
        return None
    client = ids[int(rng.integers(n_s))]
    message = float(rng.uniform(1, 200))
    return system, client, message
