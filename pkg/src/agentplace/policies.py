"""Placement/migration policies the simulator can drive."""

from __future__ import annotations

import numpy as np

from .aco import AcoParams, MigrationPlan, alm_solve, alp_search
from .baselines import Poller, greedy_migrate, greedy_place, polling_migrate, random_migrate, random_place
from .errors import Infeasible
from .model import EdgeSystem, Placement, Task
from .refine import LocalSearchRefiner, RefinementRequest, Refiner, refine

POLICY_NAMES = ("antllm", "greedy", "polling", "random")


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, dtype=np.uint64)[0])


class Policy:
    name = "policy"

    def place(self, task: Task, system: EdgeSystem, client: str) -> Placement:
        raise NotImplementedError

    def migrate(self, agent_id: str, system: EdgeSystem, client, client_message_mb=None) -> MigrationPlan | None:
        raise NotImplementedError


class AntLLMPolicy(Policy):
    """Ant-colony placement and migration followed by validated refinement."""

    name = "antllm"

    def __init__(self, params: AcoParams | None = None, refiner: Refiner | None = None, seed: int = 0):
        self.params = params or AcoParams()
        self.refiner = refiner
        self.seed = seed
        self._calls = 0

    def _params(self) -> AcoParams:
        self._calls += 1
        return AcoParams(**{**self.params.__dict__, "seed": derived_seed(self.seed, 1, self._calls)})

    def place(self, task, system, client):
        result = alp_search(task, system, self._params(), client=client)
        if not result.placement.feasible:
            raise Infeasible(f"no legal placement for task {task.id}")
        request = RefinementRequest(
            plan=result.placement,
            system=system,
            task=task,
            client=client,
            candidates=result.candidates,
            incumbent_score=result.placement.score,
        )
        return refine(request, self.refiner)

    def migrate(self, agent_id, system, client, client_message_mb=None):
        plan = alm_solve(agent_id, system, self._params(), client, client_message_mb=client_message_mb)
        if plan is None:
            return None
        request = RefinementRequest(
            plan=plan,
            system=system,
            client=client,
            client_message_mb=client_message_mb,
            incumbent_score=-plan.gain.net_s,
        )
        return refine(request, self.refiner)


class GreedyPolicy(Policy):
    name = "greedy"

    def place(self, task, system, client):
        return greedy_place(task, system, client)

    def migrate(self, agent_id, system, client, client_message_mb=None):
        return greedy_migrate(agent_id, system, client, client_message_mb)


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(derived_seed(seed, 3))

    def place(self, task, system, client):
        # agents land anywhere they fit, not only near the user
        return random_place(task, system, self.rng, client, candidates=system.server_ids)

    def migrate(self, agent_id, system, client, client_message_mb=None):
        return random_migrate(agent_id, system, client, self.rng, client_message_mb)


class PollingPolicy(Policy):
    name = "polling"

    def __init__(self):
        self.poller = Poller()

    def place(self, task, system, client):
        return self.poller.place(task, system, client)

    def migrate(self, agent_id, system, client, client_message_mb=None):
        return polling_migrate(agent_id, system, client, client_message_mb)


def make_policy(
    name: str, params: AcoParams | None = None, refiner: Refiner | str | None = "local", seed: int = 0
) -> Policy:
    """Build a policy by name; ``refiner`` is a Refiner, "local", or None/"none"."""
    if name == "antllm":
        if refiner == "local":
            refiner = LocalSearchRefiner()
        elif refiner == "none":
            refiner = None
        return AntLLMPolicy(params, refiner, seed)
    if name == "greedy":
        return GreedyPolicy()
    if name == "random":
        return RandomPolicy(seed)
    if name == "polling":
        return PollingPolicy()
    raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
