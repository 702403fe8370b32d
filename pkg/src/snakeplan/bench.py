"""Planner variant execution and the benchmark/ablation harness.

A variant name is 'action+heuristic+scheduler', e.g.
'predefined_opt_lazy+homotopy_k2+dts'. Metrics go to tab-separated rows
plus a human-readable aggregate block; failures carry the timeout as
their planning time and are excluded from mean-time aggregates.
"""

from __future__ import annotations

import dataclasses
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .scenario import Scenario, load_scenario, write_plan
from .search import Plan, PlannerConfig, plan

ACTION_VARIANTS = ("predefined_only", "predefined_opt_eager", "predefined_opt_lazy")
HEURISTIC_VARIANTS = ("bfs_heuristic", "homotopy_k1", "homotopy_k2")
SCHEDULER_VARIANTS = ("dts", "round_robin")

DEFAULT_VARIANT = "predefined_opt_lazy+homotopy_k2+dts"


@dataclass(frozen=True)
class MetricsRow:
    variant: str
    scenario: str
    seed: int
    success: bool
    planning_time: float
    plan_cost: float
    expansions: int
    optimizer_calls: int
    pseudostates_discarded: int
    reason: str

    def tsv(self) -> str:
        cost = f"{self.plan_cost:.6f}" if self.success else "nan"
        return "\t".join(
            [
                self.variant,
                self.scenario,
                str(self.seed),
                "1" if self.success else "0",
                f"{self.planning_time:.3f}",
                cost,
                str(self.expansions),
                str(self.optimizer_calls),
                str(self.pseudostates_discarded),
                self.reason,
            ]
        )


TSV_HEADER = "\t".join(
    [
        "variant",
        "scenario",
        "seed",
        "success",
        "planning_time_s",
        "plan_cost",
        "expansions",
        "optimizer_calls",
        "pseudostates_discarded",
        "reason",
    ]
)


def parse_variant(variant: str) -> tuple[str, str, str]:
    parts = variant.split("+")
    if len(parts) == 1:
        parts = [parts[0], "homotopy_k2", "dts"]
    if len(parts) == 2:
        parts.append("dts")
    action, heuristic, scheduler = parts
    if action not in ACTION_VARIANTS:
        raise ValueError(f"unknown action variant {action!r}")
    if heuristic not in HEURISTIC_VARIANTS:
        raise ValueError(f"unknown heuristic variant {heuristic!r}")
    if scheduler not in SCHEDULER_VARIANTS:
        raise ValueError(f"unknown scheduler variant {scheduler!r}")
    return action, heuristic, scheduler


def variant_config(variant: str, base: PlannerConfig) -> PlannerConfig:
    """Map a variant name onto a PlannerConfig derived from `base`."""
    action, heuristic, scheduler = parse_variant(variant)
    pc = replace(base)
    pc.use_opt = action != "predefined_only"
    pc.use_lazy = action == "predefined_opt_lazy"
    if heuristic == "bfs_heuristic":
        pc.heuristic_mode = "bfs"
    else:
        pc.heuristic_mode = "homotopy"
        pc.num_classes = 1 if heuristic == "homotopy_k1" else 2
    pc.scheduler = scheduler
    return pc


def run_variant(
    scenario: Scenario,
    variant: str,
    base: PlannerConfig,
    seed: int | None = None,
    out_dir=None,
) -> tuple[MetricsRow, Plan | None]:
    """Run one (scenario, variant) pair; writes the plan file on success."""
    pc = variant_config(variant, base)
    if seed is not None:
        pc.seed = seed
    df = scenario.build_distance_field()
    t0 = time.monotonic()
    try:
        result = plan(
            scenario.robot,
            scenario.environment,
            df,
            scenario.start,
            scenario.goal.position,
            pc,
            goal_axis=scenario.goal.forward,
        )
        elapsed = time.monotonic() - t0
        success = result.success
        reason = result.reason
        stats = result.stats
        plan_obj = result.plan
    except ValueError as exc:
        elapsed = time.monotonic() - t0
        success, reason, stats, plan_obj = False, f"error: {exc}", None, None

    row = MetricsRow(
        variant=variant,
        scenario=scenario.name,
        seed=pc.seed,
        success=success,
        planning_time=elapsed if success else pc.timeout,
        plan_cost=plan_obj.cost if plan_obj else float("nan"),
        expansions=stats.expansions if stats else 0,
        optimizer_calls=stats.optimizer_calls if stats else 0,
        pseudostates_discarded=stats.pseudostates_discarded if stats else 0,
        reason=reason,
    )
    if plan_obj is not None and out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_plan(
            out_dir / f"{scenario.name}.{variant}.seed{pc.seed}.plan",
            scenario.name,
            plan_obj.states,
            plan_obj.cost,
        )
    return row, plan_obj


def _bench_job(args) -> MetricsRow:
    path, variant, seed, pc_fields, out_dir = args
    scenario = load_scenario(path, validate=False)
    base = PlannerConfig(**pc_fields)
    row, _ = run_variant(scenario, variant, base, seed=seed, out_dir=out_dir)
    return row


@dataclass
class VariantSummary:
    variant: str
    runs: int
    successes: int
    mean_time: float  # over successes only
    median_expansions: float

    @property
    def success_rate(self) -> float:
        return 100.0 * self.successes / self.runs if self.runs else 0.0


def summarize(rows) -> list[VariantSummary]:
    by_variant: dict[str, list[MetricsRow]] = {}
    for row in rows:
        by_variant.setdefault(row.variant, []).append(row)
    out = []
    for variant in sorted(by_variant):
        group = by_variant[variant]
        wins = [r for r in group if r.success]
        out.append(
            VariantSummary(
                variant=variant,
                runs=len(group),
                successes=len(wins),
                mean_time=(
                    statistics.mean(r.planning_time for r in wins) if wins else float("nan")
                ),
                median_expansions=statistics.median(r.expansions for r in group),
            )
        )
    return out


def aggregate_text(rows, timeout: float) -> str:
    lines = [
        f"# aggregate over {len(rows)} runs; mean time over successes only,",
        f"# failures carried timeout = {timeout:.1f} s and are excluded from means",
        f"{'variant':42s} {'runs':>5s} {'success_%':>9s} {'mean_time_s':>11s} {'med_expansions':>14s}",
    ]
    for s in summarize(rows):
        mean_t = f"{s.mean_time:.1f}" if s.successes else "-"
        lines.append(
            f"{s.variant:42s} {s.runs:5d} {s.success_rate:9.1f} {mean_t:>11s} "
            f"{s.median_expansions:14.0f}"
        )
    return "\n".join(lines)


def run_benchmark(
    suite_dir,
    variants,
    base: PlannerConfig,
    seeds=(0,),
    parallel: int = 1,
    out_dir=None,
    progress=None,
) -> list[MetricsRow]:
    """Every (scenario, variant, seed) under the timeout; rows sorted stably."""
    suite_dir = Path(suite_dir)
    paths = sorted(suite_dir.glob("*.scenario"))
    if not paths:
        raise ValueError(f"no *.scenario files under {suite_dir}")
    for variant in variants:
        parse_variant(variant)

    pc_fields = dataclasses.asdict(base)
    pc_fields["weights"] = base.weights
    jobs = [
        (str(path), variant, seed, pc_fields, str(out_dir) if out_dir else None)
        for path in paths
        for variant in variants
        for seed in seeds
    ]
    rows: list[MetricsRow] = []
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for row in pool.map(_bench_job, jobs):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for job in jobs:
            row = _bench_job(job)
            rows.append(row)
            if progress:
                progress(row)
    rows.sort(key=lambda r: (r.variant, r.scenario, r.seed))
    return rows


def write_metrics(rows, base: PlannerConfig, tsv_path, aggregate_path=None) -> None:
    tsv_path = Path(tsv_path)
    tsv_path.parent.mkdir(parents=True, exist_ok=True)
    tsv_path.write_text(TSV_HEADER + "\n" + "\n".join(r.tsv() for r in rows) + "\n")
    if aggregate_path is not None:
        Path(aggregate_path).write_text(aggregate_text(rows, base.timeout) + "\n")
