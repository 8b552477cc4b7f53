from __future__ import annotations

import logging
import time
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional

from dynrepset.core.pseudorandom import FamilyCache
from dynrepset.core.repset import convolve, init
from dynrepset.errors import DynRepSetError

from .kpath import kpath_context, random_digraph, solve_kpath


logger = logging.getLogger(__name__)

BENCH_HEADER = "n,k,r,h,ell,build_ms,convolve_us,solve_ms"
CONVOLVE_REPEATS = 5


@dataclass
class BenchRow:
    n: int
    k: int
    r: Optional[int] = None
    h: Optional[int] = None
    ell: Optional[int] = None
    build_ms: Optional[float] = None
    convolve_us: Optional[float] = None
    solve_ms: Optional[float] = None

    @property
    def line(self) -> str:
        def cell(value) -> str:
            if value is None:
                return "NA"
            return f"{value:.1f}" if isinstance(value, float) else str(value)

        return ",".join(cell(v) for v in (self.n, self.k, self.r, self.h, self.ell,
                                           self.build_ms, self.convolve_us, self.solve_ms))


def bench_row(
    n: int,
    k: int,
    *,
    seed: int = 1,
    cache: Optional[FamilyCache] = None,
    executor: Optional[Executor] = None,
    track_budget: Optional[int] = None,
    max_columns: Optional[int] = None,
) -> BenchRow:
    """One grid point on a random digraph with m = 2n edges and weights in [0, 9]."""
    row = BenchRow(n, k)
    g = random_digraph(n, 2 * n, 9, seed=seed)
    options = {key: value for key, value in (("track_budget", track_budget), ("max_columns", max_columns))
               if value is not None}
    try:
        started = time.perf_counter()
        ctx = kpath_context(g, k, cache=cache, **options)
        row.build_ms = (time.perf_counter() - started) * 1000
        row.r, row.h, row.ell = ctx.r, ctx.h, ctx.ell

        b = init(ctx)
        started = time.perf_counter()
        for repeat in range(CONVOLVE_REPEATS):
            convolve(ctx, b, 1 + repeat % n, executor=executor)
        row.convolve_us = (time.perf_counter() - started) * 1e6 / CONVOLVE_REPEATS

        started = time.perf_counter()
        solve_kpath(g, k, ctx=ctx, executor=executor)
        row.solve_ms = (time.perf_counter() - started) * 1000
    except DynRepSetError as exc:
        logger.error("bench n=%d k=%d: %s", n, k, exc)
    return row


def run_bench(
    ns: Iterable[int],
    ks: Iterable[int],
    *,
    on_row: Optional[Callable[[BenchRow], None]] = None,
    **options,
) -> List[BenchRow]:
    rows = []
    for k in ks:
        for n in ns:
            if k > n:
                logger.warning("bench skips n=%d k=%d (k > n)", n, k)
                continue
            row = bench_row(n, k, **options)
            logger.info("bench %s", row.line)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows
