"""Oracle sweeps and fault injection behind ``dynrepset selftest``.

Every check yields one ``<check> <params> PASS|FAIL|SKIP`` line.  With a
mutation id only the checks aimed at that defect run, on a deliberately broken
component, and are expected to report FAIL.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dynrepset.core import oracle
from dynrepset.core.factorization import FactorizationContext, Families, build_context, with_semiring
from dynrepset.core.pseudorandom import FamilyCache, SplitterFamily, verify_splitter, verify_universal
from dynrepset.core.repset import EXACT, ConvolveVariant, add_reps, convolve, init, invert, query, scale_left
from dynrepset.core.semiring import INFINITY, BooleanSemiring, CappedMinPlus, Semiring
from dynrepset.errors import ConstructionError, DynRepSetError, ResourceError, Verdict

from .circuit import brute_force_expand, monomial_sum, random_skewed_circuit
from .kpath import brute_force_kpath, kpath_as_circuit, random_digraph, solve_kpath, solve_kpath_decision
from .models import CheckResult, RunConfig
from .sweep import Task, run_sweep


logger = logging.getLogger(__name__)

FACTORIZATION_GRID = ((6, 3), (8, 4), (9, 3), (10, 4))
MUTATIONS = ("perturbed-disjointness", "drop-family-set", "skip-injectivity", "wrong-block", "invert-sum")
INVERT_SEMIRING = CappedMinPlus(cap=1)
SEQUENCE_CAP = 40
CIRCUIT_CAP = 60
# Instances per --samples unit for the cheaper sweeps.
INVERT_SCALE = 50
SEQUENCE_SCALE = 3
SOLVER_SCALE = 2

Op = Tuple[str, object]


def combine(verdicts: Sequence[Verdict]) -> Verdict:
    verdicts = list(verdicts)
    if Verdict.FAIL in verdicts:
        return Verdict.FAIL
    if not verdicts or all(v is Verdict.SKIP for v in verdicts):
        return Verdict.SKIP
    return Verdict.PASS


class ContextPool:
    """Boolean contexts built once per (n, k) and re-targeted to other semirings on demand."""

    def __init__(self, cache: Optional[FamilyCache] = None, **build_options) -> None:
        self.cache = cache
        self.build_options = build_options
        self._lock = threading.Lock()
        self._contexts: Dict[Tuple[int, int], FactorizationContext] = {}

    def get(self, n: int, k: int, semiring: Optional[Semiring] = None) -> FactorizationContext:
        with self._lock:
            base = self._contexts.get((n, k))
            if base is None:
                base = build_context(n, k, BooleanSemiring(), cache=self.cache, **self.build_options)
                self._contexts[(n, k)] = base
        if semiring is None or semiring == base.semiring:
            return base
        return with_semiring(base, semiring)


def check_families(ctx: FactorizationContext, budget: int) -> Verdict:
    return combine([
        verify_splitter(ctx.outer, budget=budget),
        verify_splitter(ctx.inner, budget=budget),
        verify_universal(ctx.fam, budget=budget),
    ])


def invert_contract_holds(x: np.ndarray, b_star: np.ndarray, semiring: Semiring = INVERT_SEMIRING) -> bool:
    """b* ⪯ a*·X, and a* ⪯ â for every â over the whole semiring with b* ⪯ â·X."""
    a_star = invert(x, b_star, semiring)
    reached = semiring.masked_sum(a_star[None, :], x)[0]
    if not np.all(semiring.leq(b_star, reached)):
        return False
    codes = list(semiring.codes())
    candidates = np.array(list(itertools.product(codes, repeat=x.shape[0])), dtype=semiring.dtype)
    feasible = np.all(semiring.leq(b_star[None, :], semiring.masked_sum(candidates, x)), axis=1)
    return bool(np.all(semiring.leq(a_star[None, :], candidates[feasible])))


def check_invert(samples: int, seed: int, budget: int) -> Verdict:
    if samples * 3**6 > budget:
        return Verdict.SKIP
    rng = np.random.default_rng(seed)
    top = len(list(INVERT_SEMIRING.codes()))
    for _ in range(samples):
        rows, cols = (int(v) for v in rng.integers(1, 7, size=2))
        x = rng.random((rows, cols)) < 0.5
        x[np.arange(rows), rng.integers(0, cols, size=rows)] = True
        b_star = rng.integers(0, top, size=cols).astype(INVERT_SEMIRING.dtype)
        if not invert_contract_holds(x, b_star):
            logger.info("invert contract broken for X=%s b*=%s", x.astype(int).tolist(), b_star.tolist())
            return Verdict.FAIL
    return Verdict.PASS


def _random_scalar(rng: np.random.Generator, semiring: Semiring):
    if semiring.kind == "boolean":
        return semiring.one if rng.random() < 0.8 else semiring.zero
    return semiring.element(int(rng.integers(0, 4)))


def random_ops(rng: np.random.Generator, n: int, semiring: Semiring, length: int) -> List[Op]:
    ops: List[Op] = []
    for step in range(length):
        roll = rng.random()
        if step == 0 or roll < 0.6:
            ops.append(("convolve", int(rng.integers(1, n + 1))))
        elif roll < 0.8:
            ops.append(("scale", _random_scalar(rng, semiring)))
        else:
            ops.append(("add", int(rng.integers(0, step + 1))))
    return ops


def run_sequence(ctx: FactorizationContext, ops: Sequence[Op], variant: ConvolveVariant = EXACT) -> bool:
    """Mirror ops on a dense table; after each step b must represent it and answer every query exactly."""
    semiring = ctx.semiring
    b, a = init(ctx), {frozenset(): semiring.one}
    history = [(b, a)]
    sets = oracle.sets_up_to(ctx.n, ctx.k_user)
    for op, arg in ops:
        if op == "convolve":
            b, a = convolve(ctx, b, arg, variant=variant), oracle.dense_mul_C(a, arg)
        elif op == "scale":
            b = scale_left(arg, b)
            a = {key: arg * value for key, value in a.items() if not (arg * value).is_zero}
        else:
            other_b, other_a = history[min(arg, len(history) - 1)]
            b = add_reps(b, other_b)
            merged = dict(a)
            for key, value in other_a.items():
                merged[key] = merged[key] + value if key in merged else value
            a = merged
        history.append((b, a))
        if oracle.represents(ctx, b, a) is Verdict.FAIL:
            logger.info("representation lost after %s %s", op, arg)
            return False
        for subset in sets:
            if query(ctx, b, subset) != oracle.query_dense(ctx, a, subset):
                logger.info("query mismatch at B=%s after %s %s", sorted(subset), op, arg)
                return False
    return True


def check_sequences(
    ctx: FactorizationContext,
    samples: int,
    seed: int,
    budget: int,
    *,
    variant: ConvolveVariant = EXACT,
    prefix: Sequence[Op] = (),
) -> Verdict:
    if samples * 10 * len(oracle.sets_up_to(ctx.n, ctx.k_user)) > budget:
        return Verdict.SKIP
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        ops = list(prefix) + random_ops(rng, ctx.n, ctx.semiring, int(rng.integers(1, 11)))
        if not run_sequence(ctx, ops, variant):
            return Verdict.FAIL
    return Verdict.PASS


def check_kpath(pool: ContextPool, k: int, max_n: int, samples: int, seed: int, budget: int) -> Verdict:
    top = max(k, min(12, max_n))
    if samples * top**k > budget:
        return Verdict.SKIP
    rng = np.random.default_rng(seed)
    for index in range(samples):
        n = int(rng.integers(k, top + 1))
        g = random_digraph(n, int(rng.integers(0, 3 * n + 1)), 9, seed=seed * 1000 + index)
        expected = brute_force_kpath(g, k)
        got = solve_kpath(g, k, ctx=pool.get(n, k, CappedMinPlus(cap=k * g.max_weight)))
        decided = solve_kpath_decision(g, k, ctx=pool.get(n, k))
        if got != expected or decided != (expected != INFINITY):
            logger.info("k-path mismatch on instance %d: solver %s decision %s brute force %s", index, got, decided, expected)
            return Verdict.FAIL
    return Verdict.PASS


def check_circuits(pool: ContextPool, semiring: Semiring, samples: int, seed: int, budget: int) -> Verdict:
    if samples * 2**8 * 12 > budget:
        return Verdict.SKIP
    rng = np.random.default_rng(seed)
    for index in range(samples):
        n_vars = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(4, n_vars) + 1))
        circuit = random_skewed_circuit(n_vars, int(rng.integers(3, 13)), int(rng.integers(1, 5)), semiring,
                                        seed=seed * 1000 + index)
        expected = brute_force_expand(circuit, k, semiring)
        got = monomial_sum(circuit, k, semiring, ctx=pool.get(n_vars, k, semiring))
        if got != expected:
            logger.info("circuit mismatch on instance %d: %s vs %s", index, got, expected)
            return Verdict.FAIL
    return Verdict.PASS


def check_reduction(pool: ContextPool, samples: int, seed: int, budget: int) -> Verdict:
    if samples * 6**3 > budget:
        return Verdict.SKIP
    rng = np.random.default_rng(seed)
    for index in range(samples):
        n, k = int(rng.integers(3, 7)), int(rng.integers(2, 4))
        g = random_digraph(n, int(rng.integers(0, 2 * n + 1)), 9, seed=seed * 1000 + index)
        semiring = CappedMinPlus(cap=k * g.max_weight)
        via_circuit = monomial_sum(kpath_as_circuit(g, k), k, semiring, ctx=pool.get(n, k, semiring)).value
        if via_circuit != solve_kpath(g, k, ctx=pool.get(n, k, semiring)):
            logger.info("reduction mismatch on instance %d", index)
            return Verdict.FAIL
    return Verdict.PASS


def perturbed_d_entry(a, b, k, semiring):
    if frozenset(a) == frozenset() and frozenset(b) == frozenset({1}):
        return semiring.zero
    return oracle.d_entry(a, b, k, semiring)


def dropped_set_context(pool: ContextPool, n: int, k: int) -> FactorizationContext:
    base = pool.get(n, k)
    fam = base.fam.without(len(base.fam) - 1)
    return build_context(n, k, base.semiring, families=Families(base.outer, base.inner, fam), strict=False)


def colliding_context(pool: ContextPool, n: int, k: int) -> FactorizationContext:
    """The pooled context plus an outer map that folds every element onto two points."""
    base = pool.get(n, k)
    fold = np.arange(base.n_pad, dtype=np.int64) % 2
    outer = SplitterFamily(base.outer.n, base.outer.k, base.outer.ell, np.vstack([base.outer.maps, fold]))
    return build_context(n, k, base.semiring, families=Families(outer, base.inner, base.fam))


def shifted_block(ctx: FactorizationContext, hidx: int, v: int) -> int:
    return (oracle.home_block(ctx, hidx, v) + 1) % ctx.s


def _task(name: str, params: str, check: Callable[[], Verdict]) -> Task:
    def run() -> CheckResult:
        started = time.perf_counter()
        try:
            verdict = check()
        except (ResourceError, ConstructionError) as exc:
            logger.warning("%s %s: %s", name, params, exc)
            verdict = Verdict.SKIP
        except DynRepSetError as exc:
            logger.error("%s %s: %s", name, params, exc)
            verdict = Verdict.FAIL
        except Exception:
            logger.exception("%s %s crashed", name, params)
            verdict = Verdict.FAIL
        return CheckResult(name, params, verdict.value, (time.perf_counter() - started) * 1000)

    return run


def selftest_tasks(config: RunConfig, pool: ContextPool) -> List[Task]:
    budget, samples, seed = config.budget, config.samples, config.seed
    fits = [(n, k) for n, k in FACTORIZATION_GRID if n <= config.max_n and k <= config.max_k]
    tasks: List[Task] = []
    for n, k in fits:
        tasks.append(_task("families", f"n={n},k={k}", lambda n=n, k=k: check_families(pool.get(n, k), budget)))
    commutation = sorted({(n, k) for n, k in ((4, 2), (6, 3), (min(config.max_n, 8), min(config.max_k, 4)))
                          if 1 <= k <= n <= config.max_n})
    for n, k in commutation:
        tasks.append(_task("commutation", f"n={n},k={k}", lambda n=n, k=k: combine(
            oracle.check_commutation(n, k, e, budget=budget) for e in range(1, n + 1))))
    for n, k in fits:
        tasks.append(_task("factorization", f"n={n},k={k}",
                           lambda n=n, k=k: oracle.check_factorization(pool.get(n, k), budget=budget)))
        tasks.append(_task("hash-identity", f"n={n},k={k}",
                           lambda n=n, k=k: oracle.check_hash_identity(pool.get(n, k), budget=budget)))
    if config.max_n >= 6 and config.max_k >= 4:
        tasks.append(_task("hat-commutation", "n=6,k=4", lambda: combine(
            oracle.check_hat_commutation(pool.get(6, 4), e, budget=budget) for e in range(1, 7))))
    inverts = samples * INVERT_SCALE
    tasks.append(_task("invert-minimality", f"instances={inverts}", lambda: check_invert(inverts, seed, budget)))
    n_seq = min(config.max_n, 8)
    sequences = samples * SEQUENCE_SCALE
    for k in (3, 4):
        if k > min(config.max_k, n_seq):
            continue
        for semiring in (BooleanSemiring(), CappedMinPlus(cap=SEQUENCE_CAP)):
            tasks.append(_task("representation", f"n={n_seq},k={k},semiring={semiring.kind},sequences={sequences}",
                               lambda k=k, semiring=semiring: check_sequences(
                                   pool.get(n_seq, k, semiring), sequences, seed + k, budget)))
    graphs = samples * SOLVER_SCALE
    for k in (2, 3, 4):
        if k <= min(config.max_k, config.max_n):
            tasks.append(_task("kpath-vs-dfs", f"k={k},instances={graphs}",
                               lambda k=k: check_kpath(pool, k, config.max_n, graphs, seed + k, budget)))
    for semiring in (BooleanSemiring(), CappedMinPlus(cap=CIRCUIT_CAP)):
        tasks.append(_task("circuit-vs-expand", f"semiring={semiring.kind},instances={graphs}",
                           lambda semiring=semiring: check_circuits(pool, semiring, graphs, seed, budget)))
    tasks.append(_task("kpath-as-circuit", f"instances={samples}", lambda: check_reduction(pool, samples, seed, budget)))
    return tasks


def mutation_tasks(mutation: str, config: RunConfig, pool: ContextPool) -> List[Task]:
    budget, seed = config.budget, config.seed
    tag = f"[{mutation}]"
    if mutation == "perturbed-disjointness":
        return [_task("commutation" + tag, "n=4,k=2,e=1", lambda: oracle.check_commutation(
            4, 2, 1, entry=perturbed_d_entry, budget=budget))]
    if mutation == "drop-family-set":
        return [
            _task("families" + tag, "n=8,k=4", lambda: check_families(dropped_set_context(pool, 8, 4), budget)),
            _task("factorization" + tag, "n=8,k=4",
                  lambda: oracle.check_factorization(dropped_set_context(pool, 8, 4), budget=budget)),
        ]
    if mutation == "skip-injectivity":
        return [_task("hash-identity" + tag, "n=6,k=3", lambda: oracle.check_hash_identity(
            colliding_context(pool, 6, 3), require_injective=False, budget=budget))]
    if mutation == "wrong-block":
        return [_task("hat-commutation" + tag, "n=6,k=4,e=1", lambda: oracle.check_hat_commutation(
            pool.get(6, 4), 1, block_of=shifted_block, budget=budget))]
    if mutation == "invert-sum":
        return [_task("representation" + tag, "n=6,k=4,semiring=boolean", lambda: check_sequences(
            pool.get(6, 4), max(1, config.samples), seed, budget,
            variant=ConvolveVariant(invert_with="sum"), prefix=[("convolve", 1), ("convolve", 1)]))]
    raise DynRepSetError(f"unknown mutation {mutation!r}; choose from {', '.join(MUTATIONS)}")


def run_selftest(
    config: RunConfig,
    cache: Optional[FamilyCache] = None,
    on_result: Optional[Callable[[CheckResult], None]] = None,
) -> List[CheckResult]:
    pool = ContextPool(cache, track_budget=config.track_budget, max_columns=config.max_columns)
    if config.mutate:
        tasks = mutation_tasks(config.mutate, config, pool)
    else:
        tasks = selftest_tasks(config, pool)
    return run_sweep(tasks, threads=config.threads, on_result=on_result)
