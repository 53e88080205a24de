"""Scenario files: JSON schema, strict loading, saving and synthetic generation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .aco import AcoParams
from .errors import ParseError, ValidationError
from .model import (
    Agent,
    CommEvent,
    EdgeServer,
    EdgeSystem,
    NetworkModel,
    ObjectiveWeights,
    ResourceVector,
    Task,
)
from .policies import derived_seed
from .sim import SimConfig

GENERATION_STREAM = 0

_NUM = {"type": "number", "minimum": 0}
_RES = {
    "type": "object",
    "additionalProperties": False,
    "properties": {k: _NUM for k in ("cpu", "memory", "storage", "bandwidth")},
}
_IDS = {"type": "array", "items": {"type": "string"}}

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "agentplace scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["servers", "network", "agents", "tasks"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "candidate_radius": {"type": "integer", "minimum": 0},
        "message_size_mb": _NUM,
        "servers": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "capacity"],
                "properties": {
                    "id": {"type": "string"},
                    "capacity": _RES,
                    "export_time_s": _NUM,
                    "load_time_s": _NUM,
                    "init_base_s": _NUM,
                    "init_per_agent_s": _NUM,
                    "max_agents": {"type": "integer", "minimum": 1},
                    "position": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["links"],
            "properties": {
                "links": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [{"type": "string"}, {"type": "string"}, {"type": "number", "exclusiveMinimum": 0}],
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "bandwidth": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "per_hop_latency_s": _NUM,
                "client_bandwidth": {
                    "type": "object",
                    "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "agents": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "requirements"],
                "properties": {
                    "id": {"type": "string"},
                    "requirements": _RES,
                    "memory_state_gb": _NUM,
                    "dependencies": _IDS,
                    "colocate_with": _IDS,
                    "host": {"type": ["string", "null"]},
                    "message_sizes": {"type": "object", "additionalProperties": _NUM},
                },
            },
        },
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "origin_server", "required_agents"],
                "properties": {
                    "id": {"type": "string"},
                    "origin_server": {"type": "string"},
                    "required_agents": {**_IDS, "minItems": 1},
                    "file_size_mb": _NUM,
                    "prompt_time_s": _NUM,
                    "storage_gb": _NUM,
                    "file_processing_time_s": _NUM,
                    "llm_time_s": _NUM,
                    "comm_events": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["from_agent", "to_agent", "size_mb"],
                            "properties": {
                                "from_agent": {"type": "string"},
                                "to_agent": {"type": "string"},
                                "size_mb": _NUM,
                            },
                        },
                    },
                },
            },
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"theta": _NUM, "gamma": _NUM, "theta_dep": _NUM},
        },
        "aco": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _NUM,
                "beta": _NUM,
                "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "q": _NUM,
                "num_ants": {"type": "integer", "minimum": 1},
                "iterations": {"type": "integer", "minimum": 1},
                "tau_init": {"type": "number", "exclusiveMinimum": 0},
                "tau_min": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 0},
                "tasks_per_epoch": {"type": "integer", "minimum": 1},
                "arrivals": {"type": ["object", "null"], "additionalProperties": {"type": "integer", "minimum": 0}},
                "move_probability": {"type": "number", "minimum": 0, "maximum": 1},
                "h_th": {"type": "integer", "minimum": 1},
                "resource_security_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "task_duration_epochs": {"type": ["integer", "null"], "minimum": 1},
                "trajectories": {"type": ["object", "null"], "additionalProperties": _IDS},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}


@dataclass
class Scenario:
    servers: list[EdgeServer]
    network: NetworkModel
    agents: list[Agent]
    tasks: list[Task]
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    aco: AcoParams = field(default_factory=AcoParams)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    candidate_radius: int = 2
    message_size_mb: float = 1.0

    def build_system(self) -> EdgeSystem:
        """Fresh mutable world with every agent that names a host already running."""
        system = EdgeSystem(
            servers={s.id: replace(s, hosted={}) for s in self.servers},
            network=self.network,
            agents={a.id: a for a in self.agents},
            weights=self.weights,
            candidate_radius=self.candidate_radius,
            message_size_mb=self.message_size_mb,
        )
        system.deploy_initial_hosts()
        return system

    def with_seed(self, seed: int) -> Scenario:
        return replace(self, seed=seed, aco=replace(self.aco, seed=seed), sim=replace(self.sim, seed=seed))


# ---------------------------------------------------------------- (de)serialisation


def to_dict(scn: Scenario) -> dict[str, Any]:
    net = scn.network
    ids = [s.id for s in scn.servers]
    links = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if b in net.adjacency.get(a, ()):
                links.append([a, b, net.bandwidth[a][b]])
    linked = {(a, b) for a, b, _ in links} | {(b, a) for a, b, _ in links}
    bandwidth = {
        a: {b: net.bandwidth[a][b] for b in ids if b != a and (a, b) not in linked and b in net.bandwidth[a]}
        for a in ids
    }
    bandwidth = {a: row for a, row in bandwidth.items() if row}
    return {
        "seed": scn.seed,
        "candidate_radius": scn.candidate_radius,
        "message_size_mb": scn.message_size_mb,
        "servers": [
            {
                "id": s.id,
                "capacity": asdict(s.capacity),
                "export_time_s": s.export_time_s,
                "load_time_s": s.load_time_s,
                "init_base_s": s.init_base_s,
                "init_per_agent_s": s.init_per_agent_s,
                "max_agents": s.max_agents,
                "position": list(s.position),
            }
            for s in scn.servers
        ],
        "network": {
            "links": links,
            "bandwidth": bandwidth,
            "per_hop_latency_s": net.per_hop_latency_s,
            "client_bandwidth": {k: net.client_bandwidth[k] for k in ids if k in net.client_bandwidth},
        },
        "agents": [
            {
                "id": a.id,
                "requirements": asdict(a.requirements),
                "memory_state_gb": a.memory_state_gb,
                "dependencies": sorted(a.dependencies),
                "colocate_with": sorted(a.colocate_with),
                "host": a.host,
                "message_sizes": dict(a.message_sizes),
            }
            for a in scn.agents
        ],
        "tasks": [
            {
                "id": t.id,
                "origin_server": t.origin_server,
                "required_agents": list(t.required_agents),
                "file_size_mb": t.file_size_mb,
                "prompt_time_s": t.prompt_time_s,
                "storage_gb": t.storage_gb,
                "file_processing_time_s": t.file_processing_time_s,
                "llm_time_s": t.llm_time_s,
                "comm_events": [asdict(e) for e in t.comm_events],
            }
            for t in scn.tasks
        ],
        "weights": asdict(scn.weights),
        "aco": asdict(scn.aco),
        "sim": asdict(scn.sim),
    }


def _semantic_problems(data: dict[str, Any]) -> list[str]:
    problems = []
    servers = data["servers"]
    server_ids = [s["id"] for s in servers]
    sset = set(server_ids)
    if len(sset) != len(server_ids):
        problems.append("servers: duplicate server ids")
    agent_ids = [a["id"] for a in data["agents"]]
    aset = set(agent_ids)
    if len(aset) != len(agent_ids):
        problems.append("agents: duplicate agent ids")
    task_ids = [t["id"] for t in data["tasks"]]
    if len(set(task_ids)) != len(task_ids):
        problems.append("tasks: duplicate task ids")

    net = data["network"]
    for i, (a, b, _) in enumerate(net["links"]):
        for end in (a, b):
            if end not in sset:
                problems.append(f"network.links[{i}]: unknown server {end!r}")
        if a == b:
            problems.append(f"network.links[{i}]: self-link on {a!r}")
    for a, row in net.get("bandwidth", {}).items():
        if a not in sset:
            problems.append(f"network.bandwidth: unknown server {a!r}")
        for b, v in row.items():
            if b not in sset:
                problems.append(f"network.bandwidth.{a}: unknown server {b!r}")
            other = net.get("bandwidth", {}).get(b, {}).get(a)
            if other is not None and other != v:
                problems.append(f"network.bandwidth: {a}-{b} is not symmetric")
    for sid in server_ids:
        if sid not in net.get("client_bandwidth", {}):
            problems.append(f"network.client_bandwidth: missing entry for {sid!r}")
    for sid in net.get("client_bandwidth", {}):
        if sid not in sset:
            problems.append(f"network.client_bandwidth: unknown server {sid!r}")
    if not problems and server_ids:
        adj = {s: set() for s in server_ids}
        for a, b, _ in net["links"]:
            adj[a].add(b)
            adj[b].add(a)
        seen, stack = {server_ids[0]}, [server_ids[0]]
        while stack:
            for v in adj[stack.pop()]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(server_ids):
            problems.append("network: server graph is not connected")

    for i, a in enumerate(data["agents"]):
        deps = set(a.get("dependencies", []))
        for d in deps:
            if d not in aset:
                problems.append(f"agents[{i}].dependencies: unknown agent {d!r}")
        if a["id"] in deps:
            problems.append(f"agents[{i}]: depends on itself")
        if not set(a.get("colocate_with", [])) <= deps:
            problems.append(f"agents[{i}].colocate_with: must be a subset of dependencies")
        host = a.get("host")
        if host is not None and host not in sset:
            problems.append(f"agents[{i}].host: unknown server {host!r}")
    for i, t in enumerate(data["tasks"]):
        if t["origin_server"] not in sset:
            problems.append(f"tasks[{i}].origin_server: unknown server {t['origin_server']!r}")
        for a in t["required_agents"]:
            if a not in aset:
                problems.append(f"tasks[{i}].required_agents: unknown agent {a!r}")
        for j, ev in enumerate(t.get("comm_events", [])):
            for end in (ev["from_agent"], ev["to_agent"]):
                if end not in aset:
                    problems.append(f"tasks[{i}].comm_events[{j}]: unknown agent {end!r}")
            if ev["from_agent"] == ev["to_agent"]:
                problems.append(f"tasks[{i}].comm_events[{j}]: endpoints must differ")
    sim = data.get("sim", {})
    for tid, path in (sim.get("trajectories") or {}).items():
        if tid not in task_ids:
            problems.append(f"sim.trajectories: unknown task {tid!r}")
        for s in path:
            if s not in sset:
                problems.append(f"sim.trajectories.{tid}: unknown server {s!r}")
    for tid in sim.get("arrivals") or {}:
        if tid not in task_ids:
            problems.append(f"sim.arrivals: unknown task {tid!r}")
    return problems


def from_dict(data: dict[str, Any]) -> Scenario:
    """Validate and build a Scenario; every problem found is reported at once."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    problems = [
        f"{'.'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
        for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if problems:
        raise ValidationError(problems)
    problems = _semantic_problems(data)
    if problems:
        raise ValidationError(problems)

    servers = [
        EdgeServer(
            id=s["id"],
            capacity=ResourceVector(**s["capacity"]),
            **{k: s[k] for k in ("export_time_s", "load_time_s", "init_base_s", "init_per_agent_s", "max_agents") if k in s},
            position=tuple(s.get("position", (0.0, 0.0))),
        )
        for s in data["servers"]
    ]
    net = data["network"]
    adjacency: dict[str, set[str]] = {s.id: set() for s in servers}
    bandwidth: dict[str, dict[str, float]] = {s.id: {} for s in servers}
    for a, b, bw in net["links"]:
        adjacency[a].add(b)
        adjacency[b].add(a)
        bandwidth[a][b] = bandwidth[b][a] = float(bw)
    for a, row in net.get("bandwidth", {}).items():
        for b, v in row.items():
            bandwidth[a][b] = float(v)
    network = NetworkModel(
        adjacency=adjacency,
        bandwidth=bandwidth,
        per_hop_latency_s=net.get("per_hop_latency_s", 0.01),
        client_bandwidth={k: float(v) for k, v in net["client_bandwidth"].items()},
    )
    agents = [
        Agent(
            id=a["id"],
            requirements=ResourceVector(**a["requirements"]),
            memory_state_gb=a.get("memory_state_gb", 0.0),
            dependencies=frozenset(a.get("dependencies", [])),
            colocate_with=frozenset(a.get("colocate_with", [])),
            host=a.get("host"),
            message_sizes=dict(a.get("message_sizes", {})),
        )
        for a in data["agents"]
    ]
    tasks = [
        Task(
            id=t["id"],
            origin_server=t["origin_server"],
            required_agents=tuple(t["required_agents"]),
            **{k: t[k] for k in ("file_size_mb", "prompt_time_s", "storage_gb", "file_processing_time_s", "llm_time_s") if k in t},
            comm_events=tuple(CommEvent(**e) for e in t.get("comm_events", [])),
        )
        for t in data["tasks"]
    ]
    seed = data.get("seed", 0)
    scn = Scenario(
        servers=servers,
        network=network,
        agents=agents,
        tasks=tasks,
        weights=ObjectiveWeights(**data.get("weights", {})),
        aco=AcoParams(**{"seed": seed, **data.get("aco", {})}),
        sim=SimConfig(**{"seed": seed, **data.get("sim", {})}),
        seed=seed,
        candidate_radius=data.get("candidate_radius", 2),
        message_size_mb=data.get("message_size_mb", 1.0),
    )
    # capacity invariants of pre-hosted agents
    try:
        scn.build_system()
    except Exception as exc:  # noqa: BLE001 - surfaced as a validation problem
        raise ValidationError([f"agents.host: {exc}"]) from None
    return scn


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object", line=1)
    return from_dict(data)


def load_scenario(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())


def dumps(scn: Scenario) -> str:
    return json.dumps(to_dict(scn), indent=2) + "\n"


def save_scenario(scn: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(scn))


def bundled_path(name: str = "testbed.json") -> Path:
    return Path(str(resources.files("agentplace") / "data" / name))


def default_testbed() -> Scenario:
    return load_scenario(bundled_path())


# ---------------------------------------------------------------- generation

# (cpu cores, memory GB, disk GB, peak Mbps) of the two testbed server classes
TESTBED_CLASSES = ((2.0, 2.0, 40.0, 20.0), (2.0, 2.0, 70.0, 30.0))


def bandwidth_from_distance(d: float) -> float:
    """Inter-server Mbps decaying with Euclidean distance."""
    return round(60.0 / (1.0 + d / 10.0), 3)


def generate_scenario(n_servers: int, n_tasks: int, seed: int) -> Scenario:
    """Random world around the testbed's server specs; identical output for identical seeds."""
    if n_servers < 1:
        raise ValueError("need at least one server")
    rng = np.random.default_rng(derived_seed(seed, GENERATION_STREAM))

    def u(lo, hi):
        return round(float(rng.uniform(lo, hi)), 4)

    servers = []
    for i in range(n_servers):
        cpu, mem, disk, peak = TESTBED_CLASSES[int(rng.integers(len(TESTBED_CLASSES)))]
        servers.append(
            EdgeServer(
                id=f"e{i}",
                capacity=ResourceVector(
                    cpu=round(cpu * u(0.5, 1.5), 3),
                    memory=round(mem * u(0.5, 1.5), 3),
                    storage=round(disk * u(0.5, 1.5), 3),
                    bandwidth=round(peak * u(0.5, 1.5), 3),
                ),
                export_time_s=u(0.2, 0.6),
                load_time_s=u(0.2, 0.6),
                init_base_s=u(0.3, 0.8),
                init_per_agent_s=u(0.1, 0.3),
                max_agents=10,
                position=(u(0, 100), u(0, 100)),
            )
        )
    ids = [s.id for s in servers]
    edges = set()
    for i in range(1, n_servers):
        j = int(rng.integers(i))
        edges.add((ids[j], ids[i]))
    extra = n_servers // 2
    attempts = 0
    while extra > 0 and attempts < 100 and n_servers > 2:
        attempts += 1
        i, j = sorted(int(x) for x in rng.choice(n_servers, 2, replace=False))
        if (ids[i], ids[j]) not in edges:
            edges.add((ids[i], ids[j]))
            extra -= 1
    adjacency = {s: set() for s in ids}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    bandwidth = {
        a.id: {b.id: bandwidth_from_distance(math.dist(a.position, b.position)) for b in servers if b.id != a.id}
        for a in servers
    }
    network = NetworkModel(
        adjacency=adjacency,
        bandwidth=bandwidth,
        per_hop_latency_s=0.02,
        client_bandwidth={s.id: s.capacity.bandwidth for s in servers},
    )

    agents, tasks = [], []
    for t in range(n_tasks):
        k = int(rng.integers(1, 4))
        names = [f"t{t}a{j}" for j in range(k)]
        for j, name in enumerate(names):
            agents.append(
                Agent(
                    id=name,
                    requirements=ResourceVector(
                        cpu=u(0.1, 0.5), memory=u(0.1, 0.4), storage=u(1.0, 5.0), bandwidth=u(1.0, 5.0)
                    ),
                    memory_state_gb=u(0.001, 0.005),
                    dependencies=frozenset(names[j - 1 : j]) if j else frozenset(),
                )
            )
        events = tuple(CommEvent(names[j - 1], names[j], u(1.0, 10.0)) for j in range(1, k))
        tasks.append(
            Task(
                id=f"t{t}",
                origin_server=ids[int(rng.integers(n_servers))],
                required_agents=tuple(names),
                file_size_mb=u(20.0, 80.0),
                prompt_time_s=u(0.1, 0.5),
                storage_gb=u(0.5, 3.0),
                file_processing_time_s=u(0.2, 1.0),
                llm_time_s=u(1.0, 3.0),
                comm_events=events,
            )
        )
    per_epoch, duration = 2, 4
    sim = SimConfig(
        epochs=math.ceil(n_tasks / per_epoch) + duration,
        tasks_per_epoch=per_epoch,
        move_probability=0.3,
        h_th=1,
        resource_security_fraction=0.10,
        task_duration_epochs=duration,
        seed=seed,
    )
    return Scenario(
        servers=servers,
        network=network,
        agents=agents,
        tasks=tasks,
        aco=AcoParams(num_ants=20, iterations=50, seed=seed),
        sim=sim,
        seed=seed,
    )


def clone(scn: Scenario) -> Scenario:
    return copy.deepcopy(scn)
