from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from dynrepset.core.factorization import FactorizationContext, l_row, r_mask
from dynrepset.core.semiring import Semiring, SemiringElement
from dynrepset.errors import UsageError


logger = logging.getLogger(__name__)

SparseTable = dict  # bitmask over [u] -> SemiringElement; absent keys are 0̄


@dataclass(frozen=True, eq=False)
class Representation:
    ctx: FactorizationContext
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != self.ctx.shape:
            raise UsageError(f"representation shape {self.values.shape} != {self.ctx.shape}")

    @property
    def semiring(self) -> Semiring:
        return self.ctx.semiring

    @property
    def flat(self) -> np.ndarray:
        """The length-r vector in the frozen column order."""
        return self.values.reshape(-1)

    def is_zero(self) -> bool:
        return bool(np.all(self.semiring.is_zero(self.values)))

    def __getitem__(self, col: int) -> SemiringElement:
        return SemiringElement(self.semiring, self.flat[int(col)].item())


@dataclass(frozen=True)
class ConvolveVariant:
    """Knobs for fault injection in the self-test; the defaults are the correct algorithm."""

    block_shift: int = 0
    invert_with: str = "lcu"


EXACT = ConvolveVariant()


def zeros(ctx: FactorizationContext) -> Representation:
    return Representation(ctx, ctx.semiring.zeros(ctx.shape))


def init(ctx: FactorizationContext) -> Representation:
    """b_init = a_init·L, i.e. the row of L at the empty set."""
    return Representation(ctx, l_row(ctx, ()))


def invert(x_access: np.ndarray, b_star: np.ndarray, semiring: Semiring) -> np.ndarray:
    """``a*[row] = lcu{b*[col] : x_access[row, col]}``; rows with no 1̄ get the ⪯-bottom."""
    x_access = np.asarray(x_access, dtype=bool)
    b_star = np.asarray(b_star, dtype=semiring.dtype)
    if b_star.shape != (x_access.shape[1],):
        raise UsageError(f"b* has length {b_star.shape}, expected {x_access.shape[1]}")
    return semiring.masked_lcu(b_star[None, :], x_access)[0]


def invert_table(ctx: FactorizationContext, b_star: np.ndarray) -> SparseTable:
    """invert over every small set of [u]; the result is keyed by bitmask, 0̄ entries dropped."""
    a_star = invert(ctx.cover, b_star, ctx.semiring)
    out: SparseTable = {}
    for row in np.flatnonzero(~ctx.semiring.is_zero(a_star)):
        out[ctx.small_masks[row]] = SemiringElement(ctx.semiring, a_star[row].item())
    return out


def _convolve_group(
    ctx: FactorizationContext,
    source: np.ndarray,
    target: np.ndarray,
    v: int,
    i: int,
    hidx: np.ndarray,
    variant: ConvolveVariant,
) -> None:
    semiring = ctx.semiring
    block = (i + variant.block_shift) % ctx.s
    sliced = np.moveaxis(source[hidx], 1 + block, -1)
    rows = sliced.reshape(-1, ctx.ell)
    live = np.flatnonzero(~np.all(semiring.is_zero(rows), axis=1))
    if live.size == 0:
        return
    if variant.invert_with == "lcu":
        a_star = semiring.masked_lcu(rows[live], ctx.conv_src_cover[v])
    else:
        a_star = semiring.masked_sum(rows[live], ctx.conv_src_cover[v].T)
    out = semiring.zeros(rows.shape)
    out[live] = semiring.masked_sum(a_star, ctx.conv_insert[v])
    target[hidx] = np.moveaxis(out.reshape(sliced.shape), -1, 1 + block)


def convolve(
    ctx: FactorizationContext,
    b: Representation,
    e: int,
    *,
    executor: Optional[Executor] = None,
    variant: ConvolveVariant = EXACT,
) -> Representation:
    """Insert element ``e`` into every represented set (the C_{n,e} product)."""
    _check(ctx, b)
    if not 1 <= int(e) <= ctx.n:
        raise UsageError(f"element {e} outside [{ctx.n}]")
    target = ctx.semiring.zeros(ctx.shape)
    groups = ctx.hash_groups(int(e))
    if executor is None:
        for v, i, hidx in groups:
            _convolve_group(ctx, b.values, target, v, i, hidx, variant)
    else:
        # groups partition the hash indices, so the writes never overlap
        futures = [executor.submit(_convolve_group, ctx, b.values, target, v, i, hidx, variant)
                   for v, i, hidx in groups]
        for future in futures:
            future.result()
    return Representation(ctx, target)


def convolve_set(
    ctx: FactorizationContext,
    b: Representation,
    elements: Iterable[int],
    *,
    executor: Optional[Executor] = None,
) -> Representation:
    """Iterated convolve; a repeated element yields a representation of the 0̄ table."""
    for e in elements:
        b = convolve(ctx, b, e, executor=executor)
    return b


def _check(ctx: FactorizationContext, b: Representation) -> None:
    if b.ctx is not ctx:
        raise UsageError("representation belongs to another context")


def add_reps(b: Representation, b2: Representation) -> Representation:
    if b.ctx is not b2.ctx:
        raise UsageError("cannot add representations from different contexts")
    return Representation(b.ctx, b.semiring.add(b.values, b2.values).astype(b.semiring.dtype, copy=False))


def _scalar_code(b: Representation, lam: SemiringElement):
    if not isinstance(lam, SemiringElement) or lam.semiring != b.semiring:
        raise UsageError(f"scalar {lam!r} is not an element of {b.semiring.describe()}")
    return lam.code


def scale_left(lam: SemiringElement, b: Representation) -> Representation:
    code = _scalar_code(b, lam)
    return Representation(b.ctx, b.semiring.mul(code, b.values).astype(b.semiring.dtype, copy=False))


def scale_right(b: Representation, lam: SemiringElement) -> Representation:
    code = _scalar_code(b, lam)
    return Representation(b.ctx, b.semiring.mul(b.values, code).astype(b.semiring.dtype, copy=False))


def query(ctx: FactorizationContext, b: Representation, subset: Iterable[int] = ()) -> SemiringElement:
    """(b·R)[B]."""
    _check(ctx, b)
    subset = tuple(subset)
    if len(set(subset)) > ctx.k_user:
        logger.warning("query set of size %d exceeds k=%d; answer is 0̄", len(set(subset)), ctx.k_user)
        return ctx.semiring.zero
    code = ctx.semiring.masked_total(b.values, r_mask(ctx, subset))
    return SemiringElement(ctx.semiring, code)
