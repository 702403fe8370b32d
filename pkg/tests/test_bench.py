import dataclasses
import math

import pytest

from snakeplan import PlannerConfig
from snakeplan.bench import (
    MetricsRow,
    TSV_HEADER,
    aggregate_text,
    parse_variant,
    run_benchmark,
    run_variant,
    summarize,
    variant_config,
    write_metrics,
)
from snakeplan.scenario import generate_suite, load_scenario


def quick_pc(**kw):
    pc = PlannerConfig(
        heuristic_weight=3.0,
        delta_rev=0.03,
        delta_pris=0.04,
        interp_rev=0.015,
        interp_pris=0.02,
        goal_pos_tol=0.07,
        timeout=30.0,
        stagnation_window=25,
        max_word_len=4,
        opt_budget=500,
    )
    for k, v in kw.items():
        setattr(pc, k, v)
    return pc


@pytest.fixture(scope="module")
def open_suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    return generate_suite(out, seed=21, count=2, difficulty="open"), out


class TestVariantParsing:
    def test_full_triple(self):
        assert parse_variant("predefined_opt_lazy+homotopy_k2+dts") == (
            "predefined_opt_lazy",
            "homotopy_k2",
            "dts",
        )

    def test_defaults_fill_in(self):
        assert parse_variant("predefined_only") == (
            "predefined_only",
            "homotopy_k2",
            "dts",
        )

    def test_unknown_parts_rejected(self):
        with pytest.raises(ValueError):
            parse_variant("rrt+homotopy_k2+dts")
        with pytest.raises(ValueError):
            parse_variant("predefined_only+euclid+dts")
        with pytest.raises(ValueError):
            parse_variant("predefined_only+homotopy_k2+fifo")

    def test_variant_config_mapping(self):
        base = quick_pc()
        pc = variant_config("predefined_only+bfs_heuristic+round_robin", base)
        assert not pc.use_opt
        assert pc.heuristic_mode == "bfs"
        assert pc.scheduler == "round_robin"
        pc = variant_config("predefined_opt_eager+homotopy_k1+dts", base)
        assert pc.use_opt and not pc.use_lazy
        assert pc.heuristic_mode == "homotopy"
        assert pc.num_classes == 1
        pc = variant_config("predefined_opt_lazy+homotopy_k2+dts", base)
        assert pc.use_opt and pc.use_lazy
        assert pc.num_classes == 2


class TestRunVariant:
    def test_success_row_and_plan_file(self, open_suite, tmp_path):
        generated, _ = open_suite
        scenario = generated[0].scenario
        row, plan_obj = run_variant(
            scenario, "predefined_opt_lazy+homotopy_k2+dts", quick_pc(), out_dir=tmp_path
        )
        assert row.success
        assert plan_obj is not None
        assert row.reason == "solved"
        assert math.isfinite(row.plan_cost)
        plans = list(tmp_path.glob("*.plan"))
        assert len(plans) == 1

    def test_deterministic_rows_modulo_time(self, open_suite):
        generated, _ = open_suite
        scenario = generated[0].scenario
        rows = [
            run_variant(scenario, "predefined_opt_lazy+homotopy_k2+dts", quick_pc(), seed=3)[0]
            for _ in range(2)
        ]
        a, b = rows
        # wall time is the only nondeterministic field
        af = dataclasses.asdict(a)
        bf = dataclasses.asdict(b)
        af.pop("planning_time")
        bf.pop("planning_time")
        assert af == bf

    def test_failure_carries_timeout(self, open_suite):
        generated, _ = open_suite
        scenario = generated[0].scenario
        pc = quick_pc(timeout=0.5)
        pc.max_expansions = 1
        row, plan_obj = run_variant(scenario, "predefined_only+bfs_heuristic+dts", pc)
        if not row.success:
            assert row.planning_time == pc.timeout
            assert plan_obj is None


class TestRunBenchmark:
    def test_single_pair_aggregate_equals_row(self, open_suite, tmp_path):
        _, suite_dir = open_suite
        rows = run_benchmark(
            suite_dir,
            ["predefined_opt_lazy+homotopy_k2+dts"],
            quick_pc(),
            seeds=(0,),
            parallel=1,
        )
        assert len(rows) == 2
        summaries = summarize(rows)
        assert len(summaries) == 1
        assert summaries[0].runs == 2
        text = aggregate_text(rows, 30.0)
        assert "success_%" in text
        write_metrics(rows, quick_pc(), tmp_path / "m.tsv", tmp_path / "agg.txt")
        lines = (tmp_path / "m.tsv").read_text().splitlines()
        assert lines[0] == TSV_HEADER
        assert len(lines) == 3

    def test_empty_suite_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="scenario"):
            run_benchmark(tmp_path, ["predefined_only"], quick_pc())

    def test_parallel_matches_serial(self, open_suite):
        _, suite_dir = open_suite
        kwargs = dict(
            variants=["predefined_opt_lazy+homotopy_k2+dts"],
            base=quick_pc(),
            seeds=(0,),
        )
        serial = run_benchmark(suite_dir, parallel=1, **kwargs)
        parallel = run_benchmark(suite_dir, parallel=2, **kwargs)
        for a, b in zip(serial, parallel):
            assert (a.variant, a.scenario, a.seed) == (b.variant, b.scenario, b.seed)
            assert a.success == b.success
            assert a.expansions == b.expansions
            if a.success:
                assert a.plan_cost == b.plan_cost


def test_metrics_row_tsv_shape():
    row = MetricsRow(
        variant="v",
        scenario="s",
        seed=1,
        success=False,
        planning_time=30.0,
        plan_cost=float("nan"),
        expansions=10,
        optimizer_calls=2,
        pseudostates_discarded=1,
        reason="timeout",
    )
    fields = row.tsv().split("\t")
    assert len(fields) == len(TSV_HEADER.split("\t"))
    assert fields[3] == "0"
    assert fields[5] == "nan"
