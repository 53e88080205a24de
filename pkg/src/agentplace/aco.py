"""Ant-colony solvers for agent placement (ALP) and agent migration (ALM).

Placement ants are simulated as a batch: every array below carries a
leading ant axis, and ant ``k`` always consumes row ``k`` of the uniform
draws of its iteration, so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import NetGain, logistic, memory_transfer_time, net_gain
from .errors import Infeasible, NoFeasibleServer
from .model import EPS, Agent, EdgeSystem, ObjectiveWeights, Placement, Task

HEURISTIC_FLOOR = 1e-9
HEURISTIC_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)
# invalid paths score this multiple of the worst feasible score seen
PENALTY_FACTOR = 10.0


@dataclass(frozen=True)
class AcoParams:
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.1
    q: float = 1.0
    num_ants: int = 20
    iterations: int = 100
    tau_init: float = 1.0
    tau_min: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.num_ants < 1 or self.iterations < 1:
            raise ValueError("num_ants and iterations must be >= 1")
        if self.tau_min <= 0:
            raise ValueError("tau_min must be > 0")


@dataclass
class MigrationPlan:
    agent_id: str
    source: str
    target: str
    gain: NetGain


# ---------------------------------------------------------------- selection rule


def selection_probabilities(tau, eta, alpha: float, beta: float) -> np.ndarray:
    weights = np.power(np.asarray(tau, dtype=float), alpha) * np.power(np.asarray(eta, dtype=float), beta)
    total = weights.sum(axis=-1, keepdims=True)
    return weights / total


def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling on rows of unnormalised cumulative weights."""
    thresholds = u * cum[..., -1]
    idx = (cum <= thresholds[..., None]).sum(axis=-1)
    return np.minimum(idx, cum.shape[-1] - 1)


def select_server(candidates, tau, eta, params: AcoParams, rng: np.random.Generator):
    """Sample one candidate with probability proportional to tau^alpha * eta^beta."""
    if len(candidates) == 0:
        raise NoFeasibleServer("no candidate servers")
    weights = np.power(np.asarray(tau, float), params.alpha) * np.power(np.asarray(eta, float), params.beta)
    if not np.all(weights > 0) and weights.sum() <= 0:
        raise NoFeasibleServer("all candidate weights vanish")
    idx = int(_pick(np.cumsum(weights), np.asarray(rng.random())))
    return candidates[idx]


# ---------------------------------------------------------------- placement heuristic


def dependency_peers(system: EdgeSystem, agent_id: str, among=None) -> list[str]:
    """Peers linked to ``agent_id`` in either direction, sorted."""
    peers = set(system.agents[agent_id].dependencies)
    pool = system.agents.values() if among is None else (system.agents[a] for a in among)
    for other in pool:
        if agent_id in other.dependencies:
            peers.add(other.id)
    peers.discard(agent_id)
    return sorted(peers)


def placement_heuristic(
    agent_id: str,
    server_id: str,
    partial: dict[str, str],
    system: EdgeSystem,
) -> float:
    """Desirability of putting ``agent_id`` on ``server_id`` given agents placed so far.

    Blends a start-up score, the tightest post-placement headroom fraction
    and closeness to dependency peers that already have a server.
    """
    w1, w2, w3 = HEURISTIC_WEIGHTS
    agent = system.agents[agent_id]
    server = system.servers[server_id]
    placed_here = [a for a, s in partial.items() if s == server_id]
    count = len(server.hosted) + len(placed_here) + 1
    init_score = 1.0 / (1.0 + server.init_time(count))

    used = [0.0] * 4
    for a in placed_here:
        for i, x in enumerate(system.agents[a].requirements.as_tuple()):
            used[i] += x
    fractions = []
    for rem, cap, u, need in zip(
        server.remaining.as_tuple(), server.capacity.as_tuple(), used, agent.requirements.as_tuple()
    ):
        if cap > 0:
            fractions.append(min(max((rem - u - need) / cap, 0.0), 1.0))
    resource_score = min(fractions) if fractions else 1.0

    where = dict(system.location)
    where.update(partial)
    times = [
        system.network.comm_time(server_id, where[p], system.message_size(agent_id, p))
        for p in dependency_peers(system, agent_id)
        if p in where
    ]
    peer_score = w3 / (1.0 + sum(times) / len(times)) if times else w3
    return max(w1 * init_score + w2 * resource_score + peer_score, HEURISTIC_FLOOR)


def placement_order(agent_ids, system: EdgeSystem) -> list[str]:
    """Descending total requirement (normalised by the largest server capacity), ties by id."""
    caps = np.array([s.capacity.as_tuple() for s in system.servers.values()]).max(axis=0)
    caps[caps <= 0] = 1.0

    def size(a):
        return float(np.sum(np.array(system.agents[a].requirements.as_tuple()) / caps))

    return sorted(dict.fromkeys(agent_ids), key=lambda a: (-size(a), a))


# ---------------------------------------------------------------- batched placement problem


@dataclass
class _PlacementProblem:
    task: Task
    agents: list[str]
    servers: list[str]
    origin: str
    theta: float
    rem0: np.ndarray  # (S, 4)
    cap: np.ndarray  # (S, 4)
    count0: np.ndarray  # (S,)
    max_agents: np.ndarray  # (S,)
    base: np.ndarray
    per: np.ndarray
    req: np.ndarray  # (A, 4)
    mem_ship: np.ndarray  # (A, S)
    cpu_load: np.ndarray  # (A, S)
    hop: np.ndarray  # (S, S)
    inv_bw: np.ndarray  # (S, S)
    per_hop: float
    fixed_dep: np.ndarray  # (A, S) objective term to deployed peers
    fixed_peer_sum: np.ndarray  # (A, S) heuristic term to deployed peers
    fixed_peer_n: np.ndarray  # (A,)
    path_deps: list  # (i, j, size): j in i's dependencies, both being placed
    path_peers: list  # per i: [(j, size)] for earlier-placed peers (either direction)
    forced: np.ndarray  # (A,) server index forced by a running co-location peer, -1 none, -2 impossible
    colocate: list  # per i: earlier path indices it must share a server with

    def comm(self, size: float) -> np.ndarray:
        return self.hop * self.per_hop + size * self.inv_bw


def _build_problem(task, system: EdgeSystem, servers: list[str], origin: str, weights: ObjectiveWeights):
    agents = placement_order([a for a in task.required_agents if system.host_of(a) is None], system)
    net = system.network
    srv = [system.servers[s] for s in servers]
    S, A = len(srv), len(agents)
    index = {a: i for i, a in enumerate(agents)}
    sidx = {s: i for i, s in enumerate(servers)}

    hop = np.array([[net.hop(a, b) for b in servers] for a in servers], dtype=float)
    inv_bw = np.array([[0.0 if a == b else 1.0 / net.bw(a, b) for b in servers] for a in servers])
    rem0 = np.array([s.remaining.as_tuple() for s in srv], dtype=float).reshape(S, 4)
    req = np.array([system.agents[a].requirements.as_tuple() for a in agents], dtype=float).reshape(A, 4)
    mem_ship = np.array(
        [[memory_transfer_time(system.agents[a], origin, s, net) for s in servers] for a in agents]
    ).reshape(A, S)
    with np.errstate(divide="ignore", invalid="ignore"):
        cpu_load = np.where(req[:, :1] > 0, req[:, :1] / np.maximum(rem0[None, :, 0], EPS), 0.0).reshape(A, S)

    fixed_dep = np.zeros((A, S))
    fixed_peer_sum = np.zeros((A, S))
    fixed_peer_n = np.zeros(A)
    path_deps, path_peers, colocate = [], [[] for _ in agents], [[] for _ in agents]
    forced = np.full(A, -1)
    for i, a in enumerate(agents):
        agent = system.agents[a]
        for d in sorted(agent.dependencies):
            size = system.message_size(a, d)
            host = system.host_of(d)
            if host is not None:
                fixed_dep[i] += [net.comm_time(s, host, size) for s in servers]
            elif d in index:
                path_deps.append((i, index[d], size))
        for p in dependency_peers(system, a):
            size = system.message_size(a, p)
            host = system.host_of(p)
            if host is not None:
                fixed_peer_sum[i] += [net.comm_time(s, host, size) for s in servers]
                fixed_peer_n[i] += 1
            elif p in index and index[p] < i:
                path_peers[i].append((index[p], size))
        for p in sorted(agent.colocate_with | {b.id for b in system.agents.values() if a in b.colocate_with}):
            host = system.host_of(p)
            if host is not None:
                f = sidx.get(host, -2)
                forced[i] = f if forced[i] in (-1, f) else -2
            elif p in index and index[p] < i:
                colocate[i].append(index[p])

    return _PlacementProblem(
        task=task,
        agents=agents,
        servers=servers,
        origin=origin,
        theta=weights.theta,
        rem0=rem0,
        cap=np.array([s.capacity.as_tuple() for s in srv], dtype=float).reshape(S, 4),
        count0=np.array([len(s.hosted) for s in srv], dtype=float),
        max_agents=np.array([s.max_agents for s in srv], dtype=float),
        base=np.array([s.init_base_s for s in srv], dtype=float),
        per=np.array([s.init_per_agent_s for s in srv], dtype=float),
        req=req,
        mem_ship=mem_ship,
        cpu_load=cpu_load,
        hop=hop,
        inv_bw=inv_bw,
        per_hop=net.per_hop_latency_s,
        fixed_dep=fixed_dep,
        fixed_peer_sum=fixed_peer_sum,
        fixed_peer_n=fixed_peer_n,
        path_deps=path_deps,
        path_peers=path_peers,
        forced=forced,
        colocate=colocate,
    )


def _heuristic_batch(p: _PlacementProblem, i: int, rem, counts, assign):
    """Heuristic and feasibility mask for path step ``i`` across all ants: (K, S) each."""
    K, S = counts.shape
    w1, w2, w3 = HEURISTIC_WEIGHTS
    post = rem - p.req[i]
    feasible = np.all(post >= -EPS, axis=2) & (counts + 1 <= p.max_agents)
    if p.forced[i] == -2:
        feasible[:] = False
    elif p.forced[i] >= 0:
        mask = np.zeros(S, bool)
        mask[p.forced[i]] = True
        feasible &= mask
    for j in p.colocate[i]:
        feasible &= np.arange(S)[None, :] == assign[:, j : j + 1]

    init_score = 1.0 / (1.0 + p.base + p.per * (counts + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(p.cap > 0, np.clip(post / np.where(p.cap > 0, p.cap, 1.0), 0.0, 1.0), np.inf)
    resource_score = frac.min(axis=2)
    resource_score[~np.isfinite(resource_score)] = 1.0

    n = p.fixed_peer_n[i] + len(p.path_peers[i])
    if n > 0:
        total = np.broadcast_to(p.fixed_peer_sum[i], (K, S)).copy()
        for j, size in p.path_peers[i]:
            total += p.comm(size)[:, assign[:, j]].T
        peer_score = w3 / (1.0 + total / n)
    else:
        peer_score = w3
    eta = np.maximum(w1 * init_score + w2 * resource_score + peer_score, HEURISTIC_FLOOR)
    return eta, feasible


def _construct_batch(p: _PlacementProblem, tau: np.ndarray, u: np.ndarray, params: AcoParams):
    """Build one path per ant. Returns (assign (K, A), valid (K,), counts (K, S))."""
    K = u.shape[0]
    S, A = len(p.servers), len(p.agents)
    rem = np.broadcast_to(p.rem0, (K, S, 4)).copy()
    counts = np.broadcast_to(p.count0, (K, S)).copy()
    assign = np.full((K, A), -1)
    valid = np.ones(K, bool)
    rows = np.arange(K)
    for i in range(A):
        eta, feasible = _heuristic_batch(p, i, rem, counts, assign)
        weights = np.power(tau[i], params.alpha) * np.power(eta, params.beta) * feasible
        cum = np.cumsum(weights, axis=1)
        ok = valid & (cum[:, -1] > 0)
        choice = _pick(cum, u[:, i])
        # guard against landing on a zero-weight entry through rounding
        bad = ~feasible[rows, choice]
        if bad.any():
            choice[bad] = np.argmax(feasible[bad], axis=1)
        valid = ok
        choice = np.where(valid, choice, -1)
        assign[:, i] = choice
        live = rows[valid]
        rem[live, choice[live]] -= p.req[i]
        counts[live, choice[live]] += 1
    return assign, valid, counts


def _score_batch(p: _PlacementProblem, assign, valid, counts) -> np.ndarray:
    K, A = assign.shape
    scores = np.full(K, np.inf)
    live = np.flatnonzero(valid)
    if live.size == 0:
        return scores
    a = assign[live]
    c = counts[live]
    rows = np.arange(live.size)[:, None]
    agent_ix = np.arange(A)[None, :]
    startup = p.mem_ship[agent_ix, a].sum(axis=1)
    startup += (p.base[a] + p.per[a] * c[rows, a]).sum(axis=1)
    load = p.cpu_load[agent_ix, a].sum(axis=1)
    dep = p.fixed_dep[agent_ix, a].sum(axis=1)
    for i, j, size in p.path_deps:
        dep = dep + p.comm(size)[a[:, i], a[:, j]]
    scores[live] = startup + load + p.theta * dep
    return scores


def update_pheromone_placement(tau: np.ndarray, best_path, best_score: float, params: AcoParams) -> np.ndarray:
    """Evaporate every entry, reinforce the iteration-best path, floor at tau_min.

    ``best_path`` lists the chosen server index per agent row (``-1`` skips a row).
    """
    tau *= 1.0 - params.rho
    if best_path is not None and math.isfinite(best_score):
        deposit = params.q / (1.0 + best_score)
        for i, s in enumerate(best_path):
            if s >= 0:
                tau[i, s] += deposit
    np.maximum(tau, params.tau_min, out=tau)
    return tau


@dataclass
class AlpResult:
    placement: Placement
    candidates: list[str]
    history: list[float] = field(default_factory=list)


def _to_placement(p: _PlacementProblem, path, score: float, feasible: bool) -> Placement:
    assignments = {a: p.servers[s] for a, s in zip(p.agents, path) if s >= 0}
    return Placement(assignments=assignments, feasible=feasible, score=score)


def construct_placement(
    rng: np.random.Generator,
    task: Task,
    system: EdgeSystem,
    params: AcoParams,
    client: str | None = None,
    candidates: list[str] | None = None,
    tau: np.ndarray | None = None,
    worst_feasible: float | None = None,
) -> Placement:
    """One ant's path under pheromone ``tau`` (uniform ``tau_init`` when omitted).

    Invalid paths are returned with ``feasible=False`` and a penalty score.
    """
    origin = client or task.origin_server
    servers = candidates if candidates is not None else system.candidates(origin)
    p = _build_problem(task, system, servers, origin, system.weights)
    if tau is None:
        tau = np.full((len(p.agents), len(servers)), params.tau_init)
    if not p.agents:
        return Placement({}, True, 0.0)
    assign, valid, counts = _construct_batch(p, tau, rng.random((1, len(p.agents))), params)
    score = float(_score_batch(p, assign, valid, counts)[0])
    if not valid[0]:
        score = PENALTY_FACTOR * worst_feasible if worst_feasible is not None else math.inf
    return _to_placement(p, assign[0], score, bool(valid[0]))


def _alp_run(task, system, params, weights, origin, servers) -> AlpResult:
    p = _build_problem(task, system, servers, origin, weights)
    A, S = len(p.agents), len(servers)
    if A == 0:
        return AlpResult(Placement({}, True, 0.0), servers, [0.0])
    rng = np.random.default_rng(params.seed)
    tau = np.full((A, S), params.tau_init, dtype=float)
    best_path, best_score = None, math.inf
    worst = -math.inf
    history = []
    for _ in range(params.iterations):
        u = rng.random((params.num_ants, A))
        assign, valid, counts = _construct_batch(p, tau, u, params)
        scores = _score_batch(p, assign, valid, counts)
        if valid.any():
            worst = max(worst, float(scores[valid].max()))
        penalty = PENALTY_FACTOR * worst if math.isfinite(worst) else math.inf
        scores = np.where(valid, scores, penalty)
        k = int(np.argmin(scores))
        if valid[k] and scores[k] < best_score:
            best_score, best_path = float(scores[k]), assign[k].copy()
        update_pheromone_placement(tau, assign[k] if valid[k] else None, float(scores[k]), params)
        history.append(best_score)
    if best_path is None:
        return AlpResult(Placement({}, False, math.inf), servers, history)
    return AlpResult(_to_placement(p, best_path, best_score, True), servers, history)


def alp_search(
    task: Task,
    system: EdgeSystem,
    params: AcoParams,
    weights: ObjectiveWeights | None = None,
    client: str | None = None,
    candidates: list[str] | None = None,
) -> AlpResult:
    """Run the placement colony, widening to every server if the neighbourhood fails."""
    w = weights or system.weights
    origin = client or task.origin_server
    servers = candidates if candidates is not None else system.candidates(origin)
    result = _alp_run(task, system, params, w, origin, servers)
    if not result.placement.feasible and candidates is None and len(servers) < len(system.servers):
        result = _alp_run(task, system, params, w, origin, system.server_ids)
    return result


def alp_solve(
    task: Task,
    system: EdgeSystem,
    params: AcoParams,
    weights: ObjectiveWeights | None = None,
    client: str | None = None,
    candidates: list[str] | None = None,
) -> Placement:
    result = alp_search(task, system, params, weights, client, candidates)
    if not result.placement.feasible:
        raise Infeasible(f"no legal placement for task {task.id}")
    return result.placement


# ---------------------------------------------------------------- migration


def migration_heuristic(gain: NetGain | float, scale: float = 1.0) -> float:
    net = gain.net_s if isinstance(gain, NetGain) else float(gain)
    return max(logistic(net, scale), HEURISTIC_FLOOR)


def update_pheromone_migration(tau: np.ndarray, best: int, fitness: float, params: AcoParams) -> np.ndarray:
    """Evaporate, deposit q * logistic(fitness) on the iteration-best target, floor at tau_min."""
    tau *= 1.0 - params.rho
    tau[best] += params.q * logistic(fitness)
    np.maximum(tau, params.tau_min, out=tau)
    return tau


def migration_candidates(system: EdgeSystem, agent_id: str) -> tuple[list[str], list[bool]]:
    """Neighbours of the agent's server, widened to two hops when none can take it."""
    host = system.host_of(agent_id)
    agent: Agent = system.agents[agent_id]
    net = system.network
    for radius in (1, 2):
        ring = [s for s in net.within(host, radius) if s != host]
        ok = [system.servers[s].can_host(agent.requirements) for s in ring]
        if any(ok):
            return ring, ok
    return ring, ok


def alm_solve(
    agent_id: str,
    system: EdgeSystem,
    params: AcoParams,
    client,
    weights: ObjectiveWeights | None = None,
    client_message_mb: float | None = None,
) -> MigrationPlan | None:
    """Search the agent's neighbourhood for the most profitable target.

    Returns a plan only when its net gain is positive.
    """
    w = weights or system.weights
    source = system.host_of(agent_id)
    cands, ok = migration_candidates(system, agent_id)
    if not any(ok):
        return None
    gains: list[NetGain | None] = [
        net_gain(agent_id, s, system, client, w, client_message_mb) if feasible else None
        for s, feasible in zip(cands, ok)
    ]
    nets = np.array([g.net_s if g is not None else 0.0 for g in gains])
    feasible = np.array(ok)
    penalty = PENALTY_FACTOR * max(1.0, float(np.abs(nets[feasible]).max()))
    fitness = np.where(feasible, nets, -penalty)
    eta = np.array([migration_heuristic(f) for f in fitness])

    rng = np.random.default_rng(params.seed)
    tau = np.full(len(cands), params.tau_init, dtype=float)
    best = -1
    for _ in range(params.iterations):
        weights_ = np.power(tau, params.alpha) * np.power(eta, params.beta)
        picks = _pick(np.broadcast_to(np.cumsum(weights_), (params.num_ants, len(cands))), rng.random(params.num_ants))
        fit = fitness[picks]
        top = fit.max()
        # among ants tied at the top, prefer the lowest candidate index
        k = int(picks[fit == top].min())
        if best < 0 or fitness[k] > fitness[best] or (fitness[k] == fitness[best] and k < best):
            best = k
        update_pheromone_migration(tau, k, float(fitness[k]), params)
    if not feasible[best] or gains[best].net_s <= 0:
        return None
    return MigrationPlan(agent_id, source, cands[best], gains[best])
