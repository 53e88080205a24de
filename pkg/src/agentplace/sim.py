"""Epoch-driven simulation of task arrivals, user movement, triggers and migrations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields

import numpy as np

from .aco import MigrationPlan
from .costs import (
    comm_cost,
    cpu_cost,
    file_transfer_time,
    initiation_latency,
    memory_transfer_time,
    processing_latency,
    total_latency,
)
from .errors import Infeasible
from .model import CommEvent, EdgeSystem, Placement, Task
from .policies import Policy, derived_seed

MOBILITY_STREAM = 2
# pseudo agent id standing for the user's access server in comm events
CLIENT_ENDPOINT = "@client"

METRIC_COLUMNS = (
    "initial_time_s",
    "migration_time_s",
    "process_time_s",
    "total_time_s",
    "cpu_usage",
    "memory_usage_gb",
    "disk_usage_gb",
    "instance_count",
)


class Trigger(str, enum.Enum):
    POSITION_DEVIATION = "position_deviation"
    RESOURCE_BOTTLENECK = "resource_bottleneck"


@dataclass
class SimConfig:
    epochs: int = 10
    tasks_per_epoch: int = 1
    # explicit task id -> arrival epoch; overrides tasks_per_epoch
    arrivals: dict[str, int] | None = None
    move_probability: float = 0.3
    h_th: int = 2
    resource_security_fraction: float = 0.10
    # None keeps tasks (and their agents) alive until the run ends
    task_duration_epochs: int | None = None
    # task id -> client server per epoch; the last entry persists
    trajectories: dict[str, list[str]] | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.move_probability <= 1:
            raise ValueError("move_probability must lie in [0, 1]")
        if self.h_th < 1:
            raise ValueError("h_th must be >= 1")
        if not 0 < self.resource_security_fraction < 1:
            raise ValueError("resource_security_fraction must lie in (0, 1)")
        if self.epochs < 0 or self.tasks_per_epoch < 1:
            raise ValueError("epochs must be >= 0 and tasks_per_epoch >= 1")
        if self.task_duration_epochs is not None and self.task_duration_epochs < 1:
            raise ValueError("task_duration_epochs must be >= 1")


@dataclass
class TaskMetrics:
    task_id: str
    initial_time_s: float = 0.0
    migration_time_s: float = 0.0
    process_time_s: float = 0.0
    total_time_s: float = 0.0
    cpu_usage: float = 0.0
    memory_usage_gb: float = 0.0
    disk_usage_gb: float = 0.0
    instance_count: int = 0
    # not exported as columns, kept for additivity checks and resource cost
    transmit_time_s: float = 0.0
    comm_usage_mb: float = 0.0
    requests: int = 0

    @property
    def resource_cost(self) -> float:
        return self.cpu_usage + self.disk_usage_gb + self.comm_usage_mb


@dataclass
class MigrationEvent:
    epoch: int
    task_id: str
    agent_id: str
    source: str
    target: str
    net_s: float
    migration_time_s: float
    triggers: tuple[str, ...]


@dataclass
class MetricsRecord:
    rows: list[TaskMetrics] = field(default_factory=list)
    migrations: list[MigrationEvent] = field(default_factory=list)
    deferred_migrations: int = 0
    rejected_tasks: list[str] = field(default_factory=list)
    trigger_log: list[tuple[int, str, tuple[str, ...]]] = field(default_factory=list)

    @property
    def totals(self) -> dict[str, float]:
        names = [f.name for f in fields(TaskMetrics) if f.name != "task_id"]
        return {n: sum(getattr(r, n) for r in self.rows) for n in names}

    def mean(self, column: str) -> float:
        if not self.rows:
            return 0.0
        return sum(getattr(r, column) for r in self.rows) / len(self.rows)

    @property
    def mean_resource_cost(self) -> float:
        return sum(r.resource_cost for r in self.rows) / len(self.rows) if self.rows else 0.0


def check_triggers(
    agent_id: str, system: EdgeSystem, client: str, config: SimConfig
) -> set[Trigger]:
    fired = set()
    host = system.host_of(agent_id)
    if system.network.hop(client, host) > config.h_th:
        fired.add(Trigger.POSITION_DEVIATION)
    server = system.servers[host]
    for rem, cap in zip(server.remaining.as_tuple(), server.capacity.as_tuple()):
        if cap > 0 and rem / cap < config.resource_security_fraction:
            fired.add(Trigger.RESOURCE_BOTTLENECK)
            break
    return fired


def arrival_schedule(tasks: list[Task], config: SimConfig) -> dict[str, int]:
    if config.arrivals is not None:
        return dict(config.arrivals)
    return {t.id: i // config.tasks_per_epoch for i, t in enumerate(tasks)}


def client_trajectories(
    tasks: list[Task], system: EdgeSystem, config: SimConfig, arrivals: dict[str, int]
) -> dict[str, list[str]]:
    """Client server of every task for every epoch, fixed before any policy acts."""
    rng = np.random.default_rng(derived_seed(config.seed, MOBILITY_STREAM))
    scripted = config.trajectories or {}
    out = {}
    for task in tasks:
        if task.id in scripted:
            path = list(scripted[task.id]) or [task.origin_server]
            out[task.id] = [path[min(e, len(path) - 1)] for e in range(config.epochs)]
            continue
        pos = task.origin_server
        path = []
        start = arrivals.get(task.id, config.epochs)
        for epoch in range(config.epochs):
            if epoch > start and rng.random() < config.move_probability:
                nbrs = sorted(system.network.adjacency[pos], key=system.network.nodes.index)
                if nbrs:
                    pos = nbrs[int(rng.integers(len(nbrs)))]
            path.append(pos)
        out[task.id] = path
    return out


class Simulator:
    def __init__(self, system: EdgeSystem, tasks: list[Task], policy: Policy, config: SimConfig):
        self.system = system
        self.tasks = list(tasks)
        self.by_id = {t.id: t for t in self.tasks}
        self.policy = policy
        self.config = config
        self.arrivals = arrival_schedule(self.tasks, config)
        self.paths = client_trajectories(self.tasks, system, config, self.arrivals)
        self.epoch = 0
        self.active: list[str] = []
        self.started: dict[str, int] = {}
        self.rows: dict[str, TaskMetrics] = {}
        self._pending_init: dict[str, float] = {}
        self.record = MetricsRecord()

    def client(self, task_id: str) -> str:
        return self.paths[task_id][self.epoch]

    def owner(self, agent_id: str) -> str | None:
        for task_id in self.active:
            if agent_id in self.by_id[task_id].required_agents:
                return task_id
        return None

    def _client_message(self, task: Task) -> float | None:
        return task.file_size_mb if task.file_size_mb > 0 else None

    def _retire(self) -> None:
        dur = self.config.task_duration_epochs
        if dur is None:
            return
        done = [t for t in self.active if self.epoch >= self.started[t] + dur]
        if not done:
            return
        self.active = [t for t in self.active if t not in done]
        still_needed = {a for t in self.active for a in self.by_id[t].required_agents}
        for task_id in done:
            for agent_id in self.by_id[task_id].required_agents:
                if agent_id not in still_needed and self.system.host_of(agent_id) is not None:
                    self.system.undeploy(agent_id)

    def _admit(self, task: Task) -> tuple[list[str], Placement] | None:
        client = self.client(task.id)
        try:
            placement = self.policy.place(task, self.system, client)
        except Infeasible:
            self.record.rejected_tasks.append(task.id)
            return None
        for agent_id, server_id in placement.assignments.items():
            self.system.deploy(agent_id, server_id)
        self.active.append(task.id)
        self.started[task.id] = self.epoch
        row = self.rows[task.id] = TaskMetrics(task.id)
        new = list(placement.assignments)
        row.instance_count = len(new)
        row.memory_usage_gb = sum(self.system.agents[a].requirements.memory for a in new)
        row.disk_usage_gb = task.storage_gb + sum(self.system.agents[a].memory_state_gb for a in new)
        warm = [a for a in task.required_agents if a not in placement.assignments]
        self._pending_init[task.id] = initiation_latency(task, placement, self.system.servers, warm)
        return new, placement

    def _migrate(self, epoch_mig: dict[str, list[float]]) -> None:
        for agent_id in sorted(self.system.location):
            task_id = self.owner(agent_id)
            if task_id is None:
                continue
            task = self.by_id[task_id]
            client = self.client(task_id)
            fired = check_triggers(agent_id, self.system, client, self.config)
            if not fired:
                continue
            names = tuple(sorted(t.value for t in fired))
            self.record.trigger_log.append((self.epoch, agent_id, names))
            plan: MigrationPlan | None = self.policy.migrate(agent_id, self.system, client, self._client_message(task))
            if plan is None or plan.target == plan.source or plan.gain.net_s <= 0:
                self.record.deferred_migrations += 1
                continue
            agent = self.system.agents[agent_id]
            transfer = memory_transfer_time(agent, plan.source, plan.target, self.system.network)
            self.system.move(agent_id, plan.target)
            t_mig = plan.gain.migration_time_s
            acc = epoch_mig.setdefault(task_id, [0.0, 0.0])
            acc[0] += t_mig
            acc[1] += transfer
            self.record.migrations.append(
                MigrationEvent(self.epoch, task_id, agent_id, plan.source, plan.target, plan.gain.net_s, t_mig, names)
            )

    def _serve(self, task: Task, epoch_mig) -> None:
        """One request of an active task; its file goes to the host of the first required agent."""
        mig_s, mem_s = epoch_mig.get(task.id, (0.0, 0.0))
        lead_host = self.system.host_of(task.required_agents[0])
        file_s = file_transfer_time(task, lead_host, self.system.network, self.client(task.id))
        cb = total_latency(
            file_s + task.prompt_time_s,
            mig_s,
            self._pending_init.pop(task.id, 0.0),
            processing_latency(task),
        )
        row = self.rows[task.id]
        row.requests += 1
        row.transmit_time_s += cb.transmit_s
        row.initial_time_s += cb.initiation_s
        row.migration_time_s += cb.migration_s
        row.process_time_s += cb.processing_s
        row.total_time_s += cb.total_s
        row.cpu_usage += cpu_cost(cb.total_s, file_s, mem_s)
        where = {**self.system.location, CLIENT_ENDPOINT: self.client(task.id)}
        row.comm_usage_mb += comm_cost(self._events(task), where)

    def _events(self, task: Task) -> tuple[CommEvent, ...]:
        """Inter-agent messages plus the file upload from the user's access server."""
        if task.file_size_mb <= 0:
            return task.comm_events
        upload = CommEvent(CLIENT_ENDPOINT, task.required_agents[0], task.file_size_mb)
        return task.comm_events + (upload,)

    def step(self) -> None:
        self._retire()
        for task in self.tasks:
            if self.arrivals.get(task.id) == self.epoch:
                self._admit(task)
        epoch_mig: dict[str, list[float]] = {}
        self._migrate(epoch_mig)
        for task_id in self.active:
            self._serve(self.by_id[task_id], epoch_mig)
        self.epoch += 1

    def run(self) -> MetricsRecord:
        while self.epoch < self.config.epochs:
            self.step()
        self.record.rows = [self.rows[t.id] for t in self.tasks if t.id in self.rows]
        return self.record


def simulate(system: EdgeSystem, tasks: list[Task], policy: Policy, config: SimConfig) -> MetricsRecord:
    return Simulator(system, tasks, policy, config).run()
