"""Command-line entry point wiring scenarios, agents, metrics, and the service.

Exit codes: 0 success, 2 for validation problems, 3 when an instance is
infeasible or a run diverged.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import agents, infra, metrics, scenario as scenario_mod, service
from .agents import AgentVariant, DivergenceError
from .mdp import AlphaSchedule, Hyperparameters, RewardMode
from .oracle import (
    AssignmentProblem,
    InfeasibleAssignmentError,
    ObjectiveMode,
    SizeLimitError,
    pair_cost,
    solve_exact_matching,
)
from .scenario import (
    GenerationParams,
    ScenarioFormatError,
    ScenarioGenerationError,
    placement_violations,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

VARIANT_ALIASES = {v.value: v for v in AgentVariant}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vnfcmap",
        description="Map the eight micro-functions of a slice onto candidate machines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-scenario", help="generate and save a random instance")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--vms", type=int, default=100)
    gen.add_argument("--req-range", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    gen.add_argument("--cap-range", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    gen.add_argument("--out", required=True)

    train = sub.add_parser("train", help="train one agent on a scenario")
    _add_train_flags(train)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out-dir", required=True)

    sweep = sub.add_parser("sweep", help="train one agent across many seeds")
    _add_train_flags(sweep)
    sweep.add_argument("--seeds", type=int, default=5, help="run seeds 0..N-1")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--out-dir", required=True)

    comp = sub.add_parser("compare", help="tabulate run summaries side by side")
    comp.add_argument("--runs", nargs="+", required=True, help="run directories")
    comp.add_argument("--out", default=None, help="write comparison JSON here")

    orc = sub.add_parser("oracle", help="exactly solve the assignment for a scenario")
    orc.add_argument("--scenario", required=True)
    orc.add_argument(
        "--objective",
        choices=[m.value for m in ObjectiveMode],
        default=ObjectiveMode.ABSOLUTE_SURPLUS.value,
    )
    orc.add_argument("--json", action="store_true", help="machine-readable output only")

    chk = sub.add_parser("check-infra", help="substrate rule check and workload report")
    chk.add_argument("--scenario", required=True)

    srv = sub.add_parser("serve", help="start the mapping decision service")
    srv.add_argument("--port", type=int, default=8080)
    srv.add_argument("--scenario-dir", default=None, help="directory with descriptor.json")
    srv.add_argument("--model", default=None, help="trained policy file for the trained policy")
    return parser


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--variant", choices=sorted(VARIANT_ALIASES), default="off-tab")
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--alpha", type=float, default=0.1)
    parser.add_argument("--gamma", type=float, default=0.99)
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument(
        "--reward-mode",
        choices=[m.value for m in RewardMode],
        default=RewardMode.WASTAGE.value,
    )
    parser.add_argument(
        "--alpha-schedule",
        choices=[s.value for s in AlphaSchedule],
        default=AlphaSchedule.FIXED.value,
    )


def _hyper_from_args(args: argparse.Namespace) -> Hyperparameters:
    return Hyperparameters(
        alpha=args.alpha,
        gamma=args.gamma,
        epsilon=args.epsilon,
        episodes=args.episodes,
        reward_mode=RewardMode(args.reward_mode),
        alpha_schedule=AlphaSchedule(args.alpha_schedule),
    )


def _write_run(record: metrics.RunRecord, learner: agents.Learner, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_episode_csv(record, out_dir / "episodes.csv")
    metrics.write_summary_json(record, out_dir / "summary.json")
    agents.save_policy(learner, out_dir / "model.json")


def _cmd_generate(args: argparse.Namespace) -> int:
    defaults = GenerationParams()
    params = GenerationParams(
        num_vms=args.vms,
        req_range=tuple(args.req_range) if args.req_range else defaults.req_range,
        cap_range=tuple(args.cap_range) if args.cap_range else defaults.cap_range,
    )
    inst = scenario_mod.generate(args.seed, params)
    scenario_mod.save(inst, args.out)
    print(f"wrote scenario (seed {args.seed}, {inst.num_vms} vms) to {args.out}")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    inst = scenario_mod.load(args.scenario)
    hyper = _hyper_from_args(args)
    record, learner = agents.train(VARIANT_ALIASES[args.variant], inst, hyper, seed=args.seed)
    _write_run(record, learner, Path(args.out_dir))
    print(
        f"{args.variant} seed {args.seed}: average reward {record.average_reward:.4f}, "
        f"std {record.std_dev:.4f}, auc {record.auc:.2f}"
    )
    return EXIT_OK


def _sweep_worker(payload: tuple) -> dict:
    scenario_path, variant_alias, hyper, seed, out_dir = payload
    inst = scenario_mod.load(scenario_path)
    record, learner = agents.train(VARIANT_ALIASES[variant_alias], inst, hyper, seed=seed)
    _write_run(record, learner, Path(out_dir))
    return metrics.summarize(record)


def _cmd_sweep(args: argparse.Namespace) -> int:
    hyper = _hyper_from_args(args)
    out_root = Path(args.out_dir)
    jobs = [
        (args.scenario, args.variant, hyper, seed, str(out_root / f"seed-{seed}"))
        for seed in range(args.seeds)
    ]
    if args.workers == 1:
        summaries = [_sweep_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            summaries = list(pool.map(_sweep_worker, jobs))
    # pool.map preserves submission (seed) order, so the fold is deterministic
    averages = [s["average_reward"] for s in summaries]
    mean = sum(averages) / len(averages)
    cross = {
        "variant": args.variant,
        "seeds": args.seeds,
        "mean_average_reward": mean,
        "std_average_reward": (sum((a - mean) ** 2 for a in averages) / len(averages)) ** 0.5,
        "per_seed": summaries,
    }
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "cross_seed_summary.json").write_text(
        json.dumps(cross, indent=2, sort_keys=True) + "\n"
    )
    print(f"{args.variant}: {args.seeds} seeds, mean average reward {mean:.4f}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    summaries = []
    for run_dir in args.runs:
        path = Path(run_dir) / "summary.json"
        if not path.exists():
            raise ScenarioFormatError(str(path), "run directory has no summary.json")
        summaries.append(metrics.load_summary_json(path))
    comparison = metrics.compare_summaries(summaries)
    if args.out:
        metrics.write_comparison_json(comparison, args.out)

    header = ("Algorithm", "Average Reward", "Standard Deviation", "Convergence Episode", "AUC")
    rows = []
    for variant, cell in comparison["variants"].items():
        conv = cell["convergence_episode"]
        rows.append(
            (
                variant,
                f"{cell['average_reward']:.2f}",
                f"{cell['mean_episode_std']:.2f}",
                "n/a" if conv is None else f"{conv:.0f}",
                f"{cell['auc']:.2f}",
            )
        )
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    print("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    inst = scenario_mod.load(args.scenario)
    mode = ObjectiveMode(args.objective)
    problem = AssignmentProblem(inst.subnet.components, inst.vms, mode)
    solution = solve_exact_matching(problem)
    doc = {
        "objective_mode": mode.value,
        "objective_value": solution.objective_value,
        "pairs": {str(c): v for c, v in sorted(solution.pairs.items())},
        "per_pair_wastage": [
            {
                "component": comp.id,
                "vm": solution.pairs[comp.id],
                "surplus": pair_cost(comp, inst.vms[solution.pairs[comp.id] - 1], mode),
            }
            for comp in inst.subnet.components
        ],
    }
    if not args.json:
        print(f"optimum {solution.objective_value:.6g} ({mode.value})")
        for comp in inst.subnet.components:
            vm = inst.vms[solution.pairs[comp.id] - 1]
            print(
                f"  f{comp.id} ({comp.kind.name}) -> vm {vm.id}: "
                f"surplus {pair_cost(comp, vm, mode):.6g}"
            )
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_check_infra(args: argparse.Namespace) -> int:
    inst = scenario_mod.load(args.scenario, validate_placement=False)
    print(f"scenario: {inst.num_vms} vms, {len(inst.pms)} pms")

    if inst.placement is not None:
        violations = placement_violations(inst)
        if violations:
            print(f"placement violations ({len(violations)}):")
            for violation in violations:
                print(f"  {violation}")
        else:
            print("placement violations: none")
        for k, pm in enumerate(inst.pms):
            hosted = [j for j in range(inst.num_vms) if inst.placement.x[j][k] == 1]
            loads = [
                (inst.vms[j].compute_cap / pm.compute_cap, inst.vms[j].storage_cap / pm.storage_cap)
                for j in hosted
            ]
            try:
                workload = infra.pm_workload((0.0, 0.0), loads)
                avail = (
                    pm.compute_cap - sum(inst.vms[j].compute_cap for j in hosted),
                    pm.storage_cap - sum(inst.vms[j].storage_cap for j in hosted),
                )
                wastage = infra.pm_wastage(avail, (pm.compute_cap, pm.storage_cap))
                print(
                    f"pm {pm.id}: {len(hosted)} vms, workload {workload:.4f}, "
                    f"idle fraction {wastage:.4f}"
                )
            except infra.OverloadError as exc:
                print(f"pm {pm.id}: overloaded ({exc})")
    else:
        print("no substrate placement: skipping vm-to-pm rule checks")

    try:
        solution = solve_exact_matching(AssignmentProblem(inst.subnet.components, inst.vms))
    except InfeasibleAssignmentError as exc:
        print(f"slice does not fit this inventory: {exc}")
        return EXIT_INFEASIBLE
    unit_workloads: dict[str, list[float]] = {"cu": [], "du": []}
    saturated = 0
    for comp in inst.subnet.components:
        vm = inst.vms[solution.pairs[comp.id] - 1]
        try:
            workload = infra.vm_workload(
                comp.compute_req / vm.compute_cap, comp.storage_req / vm.storage_cap
            )
        except infra.OverloadError:
            print(f"f{comp.id} -> vm {vm.id}: saturated (a resource axis at 100%)")
            saturated += 1
            continue
        unit_workloads["cu" if comp.kind.in_centralized_unit else "du"].append(workload)
        print(f"f{comp.id} -> vm {vm.id}: workload {workload:.4f}")
    if saturated == 0:
        cu = sum(unit_workloads["cu"]) / len(unit_workloads["cu"])
        du = sum(unit_workloads["du"]) / len(unit_workloads["du"])
        print(f"slice workload (3x cu mean + 5x du mean): {infra.slice_workload(cu, du):.4f}")
    else:
        print(f"slice workload skipped: {saturated} saturated placement(s)")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    descriptor_path = None
    if args.scenario_dir:
        candidate = Path(args.scenario_dir) / "descriptor.json"
        if candidate.exists():
            descriptor_path = str(candidate)
    server = service.make_server(args.port, descriptor_path=descriptor_path, default_model=args.model)
    host, port = server.server_address[:2]
    print(f"mapping decision service on http://{host}:{port} (POST /map, GET /health)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


_COMMANDS = {
    "generate-scenario": _cmd_generate,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "oracle": _cmd_oracle,
    "check-infra": _cmd_check_infra,
    "serve": _cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ScenarioFormatError, SizeLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleAssignmentError, DivergenceError, ScenarioGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
