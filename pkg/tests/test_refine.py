import json

import httpx
import numpy as np
import pytest

from agentplace.aco import AcoParams, MigrationPlan, alm_solve, alp_search
from agentplace.costs import NetGain, check_placement
from agentplace.model import Placement
from agentplace.oracle import brute_force_optimal
from agentplace.refine import (
    IdentityRefiner,
    LocalSearchRefiner,
    RefinementRequest,
    RemoteConfig,
    RemoteRefiner,
    build_prompt,
    evaluate,
    parse_reply,
    refine,
)

from helpers import random_instance, random_migration_instance


def placement_request(seed, iterations=3):
    rng = np.random.default_rng(seed)
    while True:
        task, system = random_instance(rng)
        res = alp_search(task, system, AcoParams(iterations=iterations, num_ants=3, seed=seed))
        if res.placement.feasible:
            return RefinementRequest(
                plan=res.placement,
                system=system,
                task=task,
                candidates=res.candidates,
                incumbent_score=res.placement.score,
            )


class Fixed:
    def __init__(self, plan):
        self.plan = plan

    def propose(self, request):
        return self.plan


class Boom:
    def propose(self, request):
        raise RuntimeError("refiner crashed")


class TestValidator:
    def test_none_refiner_is_identity(self):
        req = placement_request(0)
        assert refine(req, None) is req.plan
        assert refine(req, IdentityRefiner()) is req.plan

    def test_crash_degrades_to_incumbent(self):
        req = placement_request(1)
        assert refine(req, Boom()) is req.plan

    def test_rejects_infeasible(self):
        req = placement_request(2)
        bogus = Placement({a: "nowhere" for a in req.plan.assignments})
        assert refine(req, Fixed(bogus)) is req.plan
        assert req.plan.assignments
        assert refine(req, Fixed(Placement({}))) is req.plan

    def test_rejects_wrong_type(self):
        req = placement_request(3)
        assert refine(req, Fixed("a -> b")) is req.plan

    def test_accepts_only_strict_improvement(self):
        for seed in range(20):
            req = placement_request(seed)
            best = brute_force_optimal(req.task, req.system, candidates=req.candidates)
            out = refine(req, Fixed(best))
            if best.score < req.plan.score:
                assert out.assignments == best.assignments and out.score == best.score
            else:
                assert out is req.plan

    def test_local_search_never_worse(self):
        for seed in range(20):
            req = placement_request(seed, iterations=1)
            out = refine(req, LocalSearchRefiner())
            assert not check_placement(req.task, out, req.system, req.candidates)
            assert out.score <= req.plan.score

    def test_migration_validation(self):
        for seed in range(40):
            inst = random_migration_instance(np.random.default_rng(seed))
            if inst is None:
                continue
            system, client, msg = inst
            plan = alm_solve("x", system, AcoParams(iterations=5), client, client_message_mb=msg)
            if plan is None:
                continue
            req = RefinementRequest(plan=plan, system=system, client=client, client_message_mb=msg, incumbent_score=-plan.gain.net_s)
            # moving somewhere unknown or to a different agent is rejected
            assert refine(req, Fixed(MigrationPlan("x", plan.source, "nowhere", plan.gain))) is plan
            assert refine(req, Fixed(MigrationPlan("p0", plan.source, plan.target, plan.gain))) is plan
            # a lie about the gain does not help: the validator re-scores
            liar = MigrationPlan("x", plan.source, plan.source, NetGain(1e9, 0, 0))
            assert refine(req, Fixed(liar)) is plan
            out = refine(req, LocalSearchRefiner())
            assert out.gain.net_s >= plan.gain.net_s
            assert evaluate(req, out) == -out.gain.net_s


class TestParsing:
    def test_parse_fenced_block(self):
        text = "Sure.\n```\na1 -> e2\n a0->e0 \n```\nDone"
        assert parse_reply(text) == {"a1": "e2", "a0": "e0"}

    @pytest.mark.parametrize("text", ["no block", "```\nnonsense\n```", "```\n\n```"])
    def test_malformed(self, text):
        assert parse_reply(text) is None

    def test_prompt_mentions_agents_and_servers(self):
        req = placement_request(4)
        prompt = build_prompt(req)
        for a in req.plan.assignments:
            assert a in prompt
        for s in req.candidates:
            assert s in prompt


def chat_reply(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


class TestRemote:
    def test_round_trip_with_mock_server(self, monkeypatch, tmp_path):
        req = placement_request(5)
        best = brute_force_optimal(req.task, req.system, candidates=req.candidates)
        seen = {}

        def handler(request: httpx.Request):
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            lines = "\n".join(f"{a} -> {s}" for a, s in best.assignments.items())
            return httpx.Response(200, json=chat_reply(f"```\n{lines}\n```"))

        cfg_path = tmp_path / "remote.json"
        cfg_path.write_text(json.dumps({"url": "http://refiner.test/v1/chat/completions", "model": "m"}))
        monkeypatch.setenv("AGENTPLACE_REFINER_TOKEN", "secret")
        client = httpx.Client(transport=httpx.MockTransport(handler))
        refiner = RemoteRefiner(RemoteConfig.from_file(cfg_path), client=client)
        out = refine(req, refiner)
        assert seen["auth"] == "Bearer secret"
        assert seen["body"]["model"] == "m"
        assert seen["body"]["messages"][0]["role"] == "system"
        assert out.score == min(best.score, req.plan.score)

    @pytest.mark.parametrize(
        "response",
        [
            httpx.Response(500, text="down"),
            httpx.Response(200, text="not json"),
            httpx.Response(200, json={"choices": []}),
            httpx.Response(200, json=chat_reply("I refuse")),
            httpx.Response(200, json=chat_reply("```\nghost -> e0\n```")),
        ],
    )
    def test_failures_fall_back(self, response):
        req = placement_request(6)
        client = httpx.Client(transport=httpx.MockTransport(lambda r: response))
        refiner = RemoteRefiner(RemoteConfig(url="http://refiner.test"), client=client)
        assert refine(req, refiner) is req.plan

    def test_network_error_falls_back(self):
        def handler(request):
            raise httpx.ConnectError("offline")

        req = placement_request(7)
        client = httpx.Client(transport=httpx.MockTransport(handler))
        assert refine(req, RemoteRefiner(RemoteConfig(url="http://refiner.test"), client=client)) is req.plan
