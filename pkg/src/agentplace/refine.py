"""Post-optimisation: pluggable refiners behind an accept-only-if-better validator."""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Union

import httpx

from .aco import MigrationPlan, migration_candidates
from .costs import check_placement, ead_objective, net_gain
from .model import EdgeSystem, ObjectiveWeights, Placement, Task

log = logging.getLogger(__name__)

Plan = Union[Placement, MigrationPlan]


@dataclass
class RefinementRequest:
    plan: Plan
    system: EdgeSystem
    task: Task | None = None
    weights: ObjectiveWeights | None = None
    client: str | Mapping[str, float] | None = None
    candidates: list[str] | None = None
    client_message_mb: float | None = None
    incumbent_score: float | None = None

    @property
    def origin(self):
        if self.client is not None:
            return self.client
        return self.task.origin_server if self.task is not None else None

    @property
    def servers(self) -> list[str]:
        if self.candidates is not None:
            return list(self.candidates)
        return self.system.server_ids


class Refiner(Protocol):
    def propose(self, request: RefinementRequest) -> Plan | None: ...


def evaluate(request: RefinementRequest, plan: Plan) -> float | None:
    """Objective of ``plan`` (lower is better) or None if it breaks a constraint."""
    system = request.system
    if isinstance(plan, Placement):
        if request.task is None:
            return None
        if check_placement(request.task, plan, system, request.candidates):
            return None
        client = request.origin if isinstance(request.origin, str) else None
        return ead_objective(request.task, plan, system, request.weights, client=client)

    incumbent = request.plan
    if not isinstance(incumbent, MigrationPlan):
        return None
    if plan.agent_id != incumbent.agent_id or plan.source != system.host_of(plan.agent_id):
        return None
    cands, ok = migration_candidates(system, plan.agent_id)
    if plan.target not in cands or not ok[cands.index(plan.target)]:
        return None
    gain = net_gain(plan.agent_id, plan.target, system, request.origin, request.weights, request.client_message_mb)
    return -gain.net_s


def refine(request: RefinementRequest, refiner: Refiner | None) -> Plan:
    """Return the refiner's proposal only if it is legal and strictly better."""
    incumbent = request.plan
    if refiner is None:
        return incumbent
    base = evaluate(request, incumbent)
    if base is None:
        # infeasible incumbents are out of scope for refinement
        return incumbent
    try:
        proposal = refiner.propose(request)
    except Exception as exc:  # noqa: BLE001 - any refiner failure degrades to identity
        log.warning("refiner %s failed: %s", type(refiner).__name__, exc)
        return incumbent
    if proposal is None or type(proposal) is not type(incumbent):
        return incumbent
    try:
        score = evaluate(request, proposal)
    except Exception as exc:  # noqa: BLE001
        log.warning("rejecting malformed proposal: %s", exc)
        return incumbent
    if score is None or not math.isfinite(score) or not score < base:
        return incumbent
    if isinstance(proposal, Placement):
        return Placement(dict(proposal.assignments), True, score)
    gain = net_gain(
        proposal.agent_id, proposal.target, request.system, request.origin, request.weights, request.client_message_mb
    )
    return MigrationPlan(proposal.agent_id, proposal.source, proposal.target, gain)


class IdentityRefiner:
    def propose(self, request: RefinementRequest) -> Plan | None:
        return request.plan


@dataclass
class LocalSearchRefiner:
    """Best-improvement single-agent relocation, at most ``budget`` moves."""

    budget: int = 100

    def propose(self, request: RefinementRequest) -> Plan | None:
        plan = request.plan
        if isinstance(plan, MigrationPlan):
            return self._best_target(request)
        current = dict(plan.assignments)
        score = evaluate(request, Placement(current))
        if score is None:
            return None
        for _ in range(self.budget):
            best_move, best_score = None, score
            for agent_id in sorted(current):
                for server_id in request.servers:
                    if server_id == current[agent_id]:
                        continue
                    trial = dict(current)
                    trial[agent_id] = server_id
                    s = evaluate(request, Placement(trial))
                    if s is not None and s < best_score:
                        best_move, best_score = (agent_id, server_id), s
            if best_move is None:
                break
            current[best_move[0]] = best_move[1]
            score = best_score
        return Placement(current, True, score)

    def _best_target(self, request: RefinementRequest) -> MigrationPlan | None:
        plan = request.plan
        cands, ok = migration_candidates(request.system, plan.agent_id)
        best, best_score = plan, evaluate(request, plan)
        if best_score is None:
            return None
        for target, feasible in zip(cands, ok):
            if not feasible:
                continue
            trial = MigrationPlan(plan.agent_id, plan.source, target, plan.gain)
            s = evaluate(request, trial)
            if s is not None and s < best_score:
                best, best_score = trial, s
        return best


# ---------------------------------------------------------------- remote chat-completion refiner


@dataclass
class RemoteConfig:
    url: str
    model: str = "gpt-4o"
    token_env: str = "AGENTPLACE_REFINER_TOKEN"
    timeout_s: float = 30.0
    temperature: float = 0.0
    extra_headers: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> RemoteConfig:
        data = json.loads(Path(path).read_text())
        return cls(**data)


SYSTEM_PROMPT = (
    "You improve assignments of AI agents to edge servers. Keep every server within its "
    "remaining capacity and agent limit. Reply with a fenced code block containing one "
    "line per agent in the form `agent_id -> server_id` and nothing else inside the block."
)

_LINE = re.compile(r"^\s*([^\s>]+)\s*->\s*([^\s]+)\s*$")
_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.S)


def build_prompt(request: RefinementRequest) -> str:
    system = request.system
    lines = []
    plan = request.plan
    if isinstance(plan, Placement):
        t = request.task
        lines.append(f"Task {t.id} from client server {request.origin}; objective value {request.incumbent_score}.")
        lines.append("Current plan:")
        lines.extend(f"  {a} -> {s}" for a, s in plan.assignments.items())
        lines.append("Agents (cpu, memory GB, storage GB, bandwidth Mbps, state GB, dependencies):")
        for a in plan.assignments:
            ag = system.agents[a]
            r = ag.requirements
            deps = ",".join(sorted(ag.dependencies)) or "-"
            lines.append(f"  {a}: {r.cpu} {r.memory} {r.storage} {r.bandwidth} {ag.memory_state_gb} deps={deps}")
        servers = request.servers
    else:
        lines.append(f"Agent {plan.agent_id} may move from {plan.source}; user is at {request.origin}.")
        lines.append("Current plan:")
        lines.append(f"  {plan.agent_id} -> {plan.target}")
        servers, _ = migration_candidates(system, plan.agent_id)
    lines.append("Servers (remaining cpu, memory, storage, bandwidth; hosted/max):")
    for s in servers:
        srv = system.servers[s]
        r = srv.remaining
        lines.append(f"  {s}: {r.cpu} {r.memory} {r.storage} {r.bandwidth}; {len(srv.hosted)}/{srv.max_agents}")
    return "\n".join(lines)


def parse_reply(text: str) -> dict[str, str] | None:
    """Read `agent -> server` lines from the first fenced block; None if absent or malformed."""
    m = _FENCE.search(text)
    if not m:
        return None
    out = {}
    for raw in m.group(1).splitlines():
        if not raw.strip():
            continue
        lm = _LINE.match(raw)
        if lm is None:
            return None
        out[lm.group(1)] = lm.group(2)
    return out or None


class RemoteRefiner:
    """Asks a chat-completion endpoint for a better plan; every failure means no proposal."""

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client

    def _post(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json", **self.config.extra_headers}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        if self._client is not None:
            resp = self._client.post(self.config.url, json=body, headers=headers, timeout=self.config.timeout_s)
        else:
            resp = httpx.post(self.config.url, json=body, headers=headers, timeout=self.config.timeout_s)
        resp.raise_for_status()
        return resp.json()

    def propose(self, request: RefinementRequest) -> Plan | None:
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": build_prompt(request)},
            ],
        }
        try:
            data = self._post(body)
            content = data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            log.warning("remote refiner unavailable: %s", exc)
            return None
        mapping = parse_reply(content) if isinstance(content, str) else None
        if mapping is None:
            return None
        plan = request.plan
        if isinstance(plan, Placement):
            if set(mapping) != set(plan.assignments):
                return None
            return Placement(mapping)
        if set(mapping) != {plan.agent_id}:
            return None
        return MigrationPlan(plan.agent_id, plan.source, mapping[plan.agent_id], plan.gain)
