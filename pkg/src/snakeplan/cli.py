"""Command-line interface: plan, bench, gen-suite, render."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    DEFAULT_VARIANT,
    TSV_HEADER,
    aggregate_text,
    run_benchmark,
    run_variant,
    write_metrics,
)
from .render import render_benchmark_figure, render_plan_figure
from .scenario import (
    SuiteParams,
    generate_suite,
    load_scenario,
    read_plan,
)
from .search import PlannerConfig


def _base_config(args) -> PlannerConfig:
    pc = PlannerConfig()
    if getattr(args, "timeout", None) is not None:
        pc.timeout = args.timeout
    if getattr(args, "seed", None) is not None:
        pc.seed = args.seed
    if getattr(args, "heuristic_weight", None) is not None:
        pc.heuristic_weight = args.heuristic_weight
    if getattr(args, "ee_step", None) is not None:
        pc.ee_step = args.ee_step
    if getattr(args, "delta_rev", None) is not None:
        pc.delta_rev = args.delta_rev
        pc.interp_rev = args.delta_rev / 2
    if getattr(args, "delta_pris", None) is not None:
        pc.delta_pris = args.delta_pris
        pc.interp_pris = args.delta_pris / 2
    if getattr(args, "goal_tol", None) is not None:
        pc.goal_pos_tol = args.goal_tol
    if getattr(args, "stagnation_window", None) is not None:
        pc.stagnation_window = args.stagnation_window
    if getattr(args, "opt_budget", None) is not None:
        pc.opt_budget = args.opt_budget
    if getattr(args, "max_word_len", None) is not None:
        pc.max_word_len = args.max_word_len
    return pc


def _add_planner_flags(sub) -> None:
    sub.add_argument("--timeout", type=float, help="planning timeout in seconds")
    sub.add_argument("--seed", type=int, help="planner RNG seed")
    sub.add_argument("--heuristic-weight", dest="heuristic_weight", type=float)
    sub.add_argument("--ee-step", dest="ee_step", type=float)
    sub.add_argument("--delta-rev", dest="delta_rev", type=float)
    sub.add_argument("--delta-pris", dest="delta_pris", type=float)
    sub.add_argument("--goal-tol", dest="goal_tol", type=float)
    sub.add_argument("--stagnation-window", dest="stagnation_window", type=int)
    sub.add_argument("--opt-budget", dest="opt_budget", type=int)
    sub.add_argument("--max-word-len", dest="max_word_len", type=int)


def _cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    base = _base_config(args)
    row, plan_obj = run_variant(
        scenario, args.variant, base, out_dir=args.out or "."
    )
    print(TSV_HEADER)
    print(row.tsv())
    if plan_obj is not None and args.render:
        fig_path = Path(args.out or ".") / f"{scenario.name}.{args.variant}.svg"
        render_plan_figure(scenario, plan_obj.states, fig_path)
        print(f"figure: {fig_path}", file=sys.stderr)
    return 0 if row.success else 1


def _cmd_bench(args) -> int:
    base = _base_config(args)
    out_dir = Path(args.out)
    done = []

    def progress(row):
        done.append(row)
        print(
            f"[{len(done)}] {row.variant} {row.scenario} seed={row.seed} "
            f"{'ok' if row.success else row.reason} {row.planning_time:.1f}s",
            file=sys.stderr,
        )

    rows = run_benchmark(
        args.suite_dir,
        args.variants,
        base,
        seeds=tuple(args.seeds),
        parallel=args.parallel,
        out_dir=out_dir / "plans" if args.save_plans else None,
        progress=progress,
    )
    write_metrics(rows, base, out_dir / "metrics.tsv", out_dir / "aggregate.txt")
    render_benchmark_figure(rows, out_dir / "summary.svg")
    print(aggregate_text(rows, base.timeout))
    return 0


def _cmd_gen_suite(args) -> int:
    params = SuiteParams()
    generated = generate_suite(
        args.out, seed=args.seed, count=args.count, difficulty=args.difficulty, params=params
    )
    for g in generated:
        print(g.path)
    return 0


def _cmd_render(args) -> int:
    scenario = load_scenario(args.scenario, validate=False)
    states = read_plan(args.plan)
    if not states:
        print(f"no states in plan file {args.plan}", file=sys.stderr)
        return 1
    render_plan_figure(scenario, states, args.svg)
    print(args.svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snakeplan",
        description="Plan serpentine-manipulator motions through blade arrays.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="plan one scenario")
    p_plan.add_argument("scenario")
    p_plan.add_argument("--variant", default=DEFAULT_VARIANT)
    p_plan.add_argument("--out", default=None, help="output directory")
    p_plan.add_argument("--render", action="store_true", help="also save an SVG figure")
    _add_planner_flags(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_bench = sub.add_parser("bench", help="run a scenario suite over variants")
    p_bench.add_argument("suite_dir")
    p_bench.add_argument("--variants", nargs="+", default=[DEFAULT_VARIANT])
    p_bench.add_argument("--seeds", nargs="+", type=int, default=[0])
    p_bench.add_argument("--parallel", type=int, default=1)
    p_bench.add_argument("--out", default="bench_out")
    p_bench.add_argument("--save-plans", action="store_true")
    _add_planner_flags(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen-suite", help="generate a scenario suite")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument(
        "--difficulty", default="passages", choices=("open", "passages", "traps")
    )
    p_gen.add_argument("--out", default="suite")
    p_gen.set_defaults(func=_cmd_gen_suite)

    p_render = sub.add_parser("render", help="render a saved plan to a figure")
    p_render.add_argument("scenario")
    p_render.add_argument("plan")
    p_render.add_argument("svg")
    p_render.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
