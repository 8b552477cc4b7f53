import threading
import time

import numpy as np
import pytest

from dynrepset.core.pseudorandom import FamilyCache
from dynrepset.core.semiring import CappedMinPlus
from dynrepset.errors import DynRepSetError, Verdict
from dynrepset.workers.bench import BENCH_HEADER, BenchRow, bench_row, run_bench
from dynrepset.workers.models import CheckResult, RunConfig
from dynrepset.workers.selftest import (
    INVERT_SEMIRING,
    MUTATIONS,
    ContextPool,
    _task,
    combine,
    invert_contract_holds,
    mutation_tasks,
    run_selftest,
)
from dynrepset.workers.sweep import SweepController, run_sweep


def small_config(**overrides):
    options = dict(command="selftest", max_n=6, max_k=3, samples=2, seed=1)
    options.update(overrides)
    return RunConfig(**options)


@pytest.mark.parametrize("verdicts,expected", [
    ([], Verdict.SKIP),
    ([Verdict.SKIP, Verdict.SKIP], Verdict.SKIP),
    ([Verdict.PASS, Verdict.SKIP], Verdict.PASS),
    ([Verdict.PASS, Verdict.FAIL, Verdict.SKIP], Verdict.FAIL),
])
def test_combine(verdicts, expected):
    assert combine(verdicts) is expected


def test_context_pool_reuses_builds(family_dir):
    pool = ContextPool(FamilyCache(family_dir))
    assert pool.get(4, 2) is pool.get(4, 2)
    retargeted = pool.get(4, 2, CappedMinPlus(cap=5))
    assert retargeted.semiring == CappedMinPlus(cap=5)
    assert retargeted.r == pool.get(4, 2).r


def test_invert_contract_on_identity():
    x = np.eye(3, dtype=bool)
    b_star = np.array([0, 1, 2], dtype=INVERT_SEMIRING.dtype)
    assert invert_contract_holds(x, b_star)


@pytest.mark.slow
def test_selftest_passes(family_dir):
    lines = []
    results = run_selftest(small_config(threads=2), FamilyCache(family_dir), on_result=lambda r: lines.append(r.line))
    assert lines == [r.line for r in results]
    assert results and all(r.verdict == "PASS" for r in results), [r.line for r in results]
    names = {r.name for r in results}
    assert {"families", "commutation", "factorization", "hash-identity", "invert-minimality",
            "representation", "kpath-vs-dfs", "circuit-vs-expand", "kpath-as-circuit"} <= names


def test_zero_budget_skips_everything(family_dir):
    results = run_selftest(small_config(budget=0), FamilyCache(family_dir))
    assert results and {r.verdict for r in results} == {"SKIP"}


@pytest.mark.parametrize("mutation", MUTATIONS)
def test_mutations_are_caught(family_dir, mutation):
    results = run_selftest(small_config(mutate=mutation), FamilyCache(family_dir))
    assert results
    assert all(r.verdict == "FAIL" for r in results), [r.line for r in results]
    assert all(f"[{mutation}]" in r.line for r in results)


def test_mutation_lines_are_deterministic(family_dir):
    first = [r.line for r in run_selftest(small_config(mutate="wrong-block"), FamilyCache(family_dir))]
    second = [r.line for r in run_selftest(small_config(mutate="wrong-block"), FamilyCache(family_dir))]
    assert first == second == ["hat-commutation[wrong-block] n=6,k=4,e=1 FAIL"]


def test_unknown_mutation(pool):
    with pytest.raises(DynRepSetError):
        mutation_tasks("flip-everything", small_config(), pool)


def test_sweep_reports_in_submission_order():
    def task(i):
        def run():
            time.sleep(0.01 * (5 - i))
            return CheckResult(f"t{i}", "", "PASS")
        return run

    results = run_sweep([task(i) for i in range(5)], threads=3)
    assert [r.name for r in results] == [f"t{i}" for i in range(5)]


def test_sweep_turns_crashes_into_failures():
    def boom():
        raise ValueError("nope")

    results = run_sweep([lambda: CheckResult("ok", "", "PASS"), boom], threads=2)
    assert [r.line for r in results] == ["ok  PASS", "crashed ValueError FAIL"]


def test_check_that_raises_keeps_its_name(caplog):
    def broken():
        raise ValueError("index out of range")

    results = run_sweep([_task("hat-commutation", "n=6,k=4,e=1", broken)], threads=1)
    assert [r.line for r in results] == ["hat-commutation n=6,k=4,e=1 FAIL"]
    assert "hat-commutation n=6,k=4,e=1 crashed" in caplog.text
    assert "ValueError" in caplog.text


def test_controller_can_be_stopped():
    gate = threading.Event()
    seen, done = [], threading.Event()

    def slow():
        gate.wait(1)
        return CheckResult("slow", "", "PASS")

    controller = SweepController(seen.append, done.set, threads=1)
    controller.start_sweep([slow] * 20)
    controller.stop()
    gate.set()
    controller.wait()
    assert done.wait(5)
    assert len(seen) < 20


def test_bench_row_line():
    assert BenchRow(5, 3).line == "5,3,NA,NA,NA,NA,NA,NA"
    assert len(BENCH_HEADER.split(",")) == 8


def test_bench_grid(family_dir):
    rows = run_bench([2, 6], [2, 3], cache=FamilyCache(family_dir))
    assert [(row.n, row.k) for row in rows] == [(2, 2), (6, 2), (6, 3)]
    assert all("NA" not in row.line for row in rows)
    assert rows[2].r == bench_row(6, 3, cache=FamilyCache(family_dir)).r


def test_bench_reports_oversized_points():
    row = bench_row(12, 3, max_columns=1)
    assert row.r is None and row.line.endswith("NA,NA,NA,NA,NA,NA")
