"""Command line entry point: place, migrate, simulate, compare, oracle-check, generate."""

from __future__ import annotations

import argparse
import math
import sys

from .costs import ead_objective
from .errors import BudgetExceeded, Infeasible, ParseError, ValidationError
from .experiment import CSV_COLUMNS, metric_rows, run_experiment, run_policy, write_table
from .oracle import brute_force_optimal
from .policies import POLICY_NAMES, make_policy
from .refine import RemoteConfig, RemoteRefiner
from .scenario import Scenario, dumps, generate_scenario, load_scenario
from .sim import arrival_schedule, check_triggers, client_trajectories

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2

PLACE_COLUMNS = ("policy", "task_id", "agent_id", "server_id", "score")
MIGRATE_COLUMNS = ("policy", "agent_id", "task_id", "client", "triggers", "source", "target", "net_gain_s", "executed")
ORACLE_COLUMNS = ("policy", "task_id", "policy_score", "optimal_score", "gap_pct", "optimal")


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors, not "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _refiner(args):
    if args.refiner == "remote":
        if not args.refiner_config:
            raise ValidationError(["--refiner remote needs --refiner-config"])
        return RemoteRefiner(RemoteConfig.from_file(args.refiner_config))
    return args.refiner


def _scenario(args) -> Scenario:
    scn = load_scenario(args.scenario)
    return scn.with_seed(args.seed) if args.seed is not None else scn


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)


def _place_all(scn: Scenario, policy, name: str, rows: list[dict]):
    system = scn.build_system()
    for task in scn.tasks:
        placement = policy.place(task, system, task.origin_server)
        for agent_id, server_id in sorted(placement.assignments.items()):
            rows.append(
                {"policy": name, "task_id": task.id, "agent_id": agent_id, "server_id": server_id, "score": placement.score}
            )
        for agent_id, server_id in placement.assignments.items():
            system.deploy(agent_id, server_id)
    return system


def cmd_place(args) -> int:
    scn = _scenario(args)
    policy = make_policy(args.policy, scn.aco, _refiner(args), seed=scn.seed)
    rows: list[dict] = []
    try:
        _place_all(scn, policy, args.policy, rows)
    finally:
        _emit(write_table(PLACE_COLUMNS, rows, args.out, args.format), args.out)
    return EXIT_OK


def cmd_migrate(args) -> int:
    """Place every task, move clients along their trajectories, then run one migration round."""
    scn = _scenario(args)
    policy = make_policy(args.policy, scn.aco, _refiner(args), seed=scn.seed)
    system = _place_all(scn, policy, args.policy, [])
    cfg = scn.sim
    epoch = cfg.epochs - 1 if args.epoch is None else args.epoch
    paths = client_trajectories(scn.tasks, system, cfg, arrival_schedule(scn.tasks, cfg))
    rows = []
    for agent_id in sorted(system.location):
        task = next((t for t in scn.tasks if agent_id in t.required_agents), None)
        if task is None:
            continue
        path = paths[task.id]
        client = path[min(max(epoch, 0), len(path) - 1)] if path else task.origin_server
        fired = check_triggers(agent_id, system, client, cfg)
        if not fired:
            continue
        msg = task.file_size_mb if task.file_size_mb > 0 else None
        plan = policy.migrate(agent_id, system, client, msg)
        source = system.host_of(agent_id)
        executed = plan is not None and plan.target != source and plan.gain.net_s > 0
        if executed:
            system.move(agent_id, plan.target)
        rows.append(
            {
                "policy": args.policy,
                "agent_id": agent_id,
                "task_id": task.id,
                "client": client,
                "triggers": ";".join(sorted(t.value for t in fired)),
                "source": source,
                "target": plan.target if plan is not None else "",
                "net_gain_s": plan.gain.net_s if plan is not None else "",
                "executed": executed,
            }
        )
    _emit(write_table(MIGRATE_COLUMNS, rows, args.out, args.format), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = _scenario(args)
    record = run_policy(scn, args.policy, _refiner(args))
    _emit(write_table(CSV_COLUMNS, metric_rows(args.policy, record), args.out, args.format), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    scn = _scenario(args)
    policies = args.policies.split(",") if args.policies else list(POLICY_NAMES)
    unknown = [p for p in policies if p not in POLICY_NAMES]
    if unknown:
        raise ValidationError([f"unknown policy {p!r}" for p in unknown])
    result = run_experiment(scn, policies, args.out, args.format, _refiner(args))
    _emit(result.text, args.out)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    """Score the policy's placement of each task against the exhaustive optimum."""
    scn = _scenario(args)
    policy = make_policy(args.policy, scn.aco, _refiner(args), seed=scn.seed)
    system = scn.build_system()
    rows = []
    try:
        for task in scn.tasks:
            origin = task.origin_server
            placement = policy.place(task, system, origin)
            got = ead_objective(task, placement, system, scn.weights, client=origin)
            try:
                best = brute_force_optimal(task, system, scn.weights, client=origin).score
            except BudgetExceeded:
                best = math.nan
            gap = (got - best) / best * 100 if best and math.isfinite(best) else math.nan
            rows.append(
                {
                    "policy": args.policy,
                    "task_id": task.id,
                    "policy_score": got,
                    "optimal_score": best,
                    "gap_pct": gap,
                    "optimal": bool(abs(got - best) <= 1e-9 * max(1.0, abs(best))),
                }
            )
            for agent_id, server_id in placement.assignments.items():
                system.deploy(agent_id, server_id)
    finally:
        _emit(write_table(ORACLE_COLUMNS, rows, args.out, args.format), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.servers < 1 or args.tasks < 0:
        raise ValidationError(["--servers must be >= 1 and --tasks >= 0"])
    text = dumps(generate_scenario(args.servers, args.tasks, args.seed or 0))
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agentplace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None, help="output file (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def policy_flags(p):
        p.add_argument("--policy", choices=POLICY_NAMES, default="antllm")
        p.add_argument("--refiner", choices=("none", "local", "remote"), default="local")
        p.add_argument("--refiner-config", default=None, help="JSON config for --refiner remote")

    for name, fn, help_ in (
        ("place", cmd_place, "place every task once"),
        ("migrate", cmd_migrate, "place, then run one migration round"),
        ("simulate", cmd_simulate, "simulate one policy"),
        ("compare", cmd_compare, "simulate several policies on identical seeds"),
        ("oracle-check", cmd_oracle_check, "compare placements with the exhaustive optimum"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        policy_flags(p)
        p.set_defaults(func=fn)
        if name == "migrate":
            p.add_argument("--epoch", type=int, default=None, help="client positions at this epoch (default: last)")
        if name == "compare":
            p.add_argument("--policies", default=None, help="comma separated subset of policies")

    p = sub.add_parser("generate", help="write a synthetic scenario")
    common(p, scenario=False)
    p.add_argument("--servers", type=int, default=8)
    p.add_argument("--tasks", type=int, default=20)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print("validation error:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INVALID
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
