"""Dense brute-force references for the matrices behind the fast path."""

from __future__ import annotations

import itertools
import logging
from typing import Callable, Iterable, Optional

import numpy as np

from dynrepset.core.factorization import FactorizationContext, l_mask, r_mask
from dynrepset.core.repset import Representation, query
from dynrepset.core.semiring import BooleanSemiring, Semiring, SemiringElement
from dynrepset.errors import UsageError, Verdict


logger = logging.getLogger(__name__)

DEFAULT_ORACLE_BUDGET = 10**7

DenseTable = dict  # frozenset of elements of [n] -> SemiringElement; absent keys are 0̄

_BOOLEAN = BooleanSemiring()


def sets_up_to(n: int, k: int) -> list[frozenset[int]]:
    """All subsets of [n] with at most k elements, by size then lexicographically."""
    return [frozenset(c) for t in range(min(k, n) + 1) for c in itertools.combinations(range(1, n + 1), t)]


def _flag(semiring: Semiring, ok: bool) -> SemiringElement:
    return semiring.one if ok else semiring.zero


def d_entry(a: Iterable[int], b: Iterable[int], k: int, semiring: Semiring = _BOOLEAN) -> SemiringElement:
    a, b = frozenset(a), frozenset(b)
    return _flag(semiring, not (a & b) and len(a | b) <= k)


def c_entry(a: Iterable[int], b: Iterable[int], e: int, semiring: Semiring = _BOOLEAN) -> SemiringElement:
    a, b = frozenset(a), frozenset(b)
    return _flag(semiring, e not in a and a | {e} == b)


DEntry = Callable[[Iterable[int], Iterable[int], int, Semiring], SemiringElement]


def table_value(table: DenseTable, subset: Iterable[int], semiring: Semiring) -> SemiringElement:
    return table.get(frozenset(subset), semiring.zero)


def dense_mul_D(
    a: DenseTable,
    n: int,
    k: int,
    semiring: Semiring,
    *,
    entry: DEntry = d_entry,
) -> DenseTable:
    """a·D_{n,k}, keyed by every B with |B| ≤ k (0̄ entries omitted)."""
    out: DenseTable = {}
    for b in sets_up_to(n, k):
        acc = semiring.zero
        for subset, value in a.items():
            acc = acc + value * entry(subset, b, k, semiring)
        if not acc.is_zero:
            out[b] = acc
    return out


def dense_mul_C(a: DenseTable, e: int, semiring: Optional[Semiring] = None) -> DenseTable:
    """a·C_{n,e}: every set avoiding e moves to its extension by e."""
    out: DenseTable = {}
    for subset, value in a.items():
        if e in subset:
            continue
        key = subset | {e}
        out[key] = out[key] + value if key in out else value
    return {key: value for key, value in out.items() if not value.is_zero}


def check_commutation(
    n: int,
    k: int,
    e: int,
    *,
    semiring: Semiring = _BOOLEAN,
    entry: DEntry = d_entry,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> Verdict:
    """C_{n,e}·D_{n,k} = D_{n,k}·Cᵀ_{n,e} over all |A|, |B| ≤ k."""
    if not 1 <= e <= n:
        raise UsageError(f"element {e} outside [{n}]")
    sets = sets_up_to(n, k)
    if len(sets) ** 2 > budget:
        return Verdict.SKIP
    for a in sets:
        for b in sets:
            # C[A, X] is nonzero only at X = A ∪ {e}; Cᵀ[Y, B] only at Y = B ∪ {e}.
            left = c_entry(a, a | {e}, e, semiring) * entry(a | {e}, b, k, semiring)
            right = entry(a, b | {e}, k, semiring) * c_entry(b, b | {e}, e, semiring)
            if left != right:
                logger.info("commutation mismatch at A=%s B=%s e=%d", sorted(a), sorted(b), e)
                return Verdict.FAIL
    return Verdict.PASS


def _small_block_table(ctx: FactorizationContext) -> np.ndarray:
    """D_{u,s} restricted to small sets, indexed by small-set rows."""
    small = ctx.small_matrix.astype(np.float32)
    disjoint = (small @ small.T) == 0
    fits = (ctx.small_sizes[:, None] + ctx.small_sizes[None, :]) <= ctx.s
    return disjoint & fits


def check_block_factorization(ctx: FactorizationContext, *, budget: int = DEFAULT_ORACLE_BUDGET) -> Verdict:
    """D_{u,s} = X·Y over all A, B ⊆ [u] with |A|, |B| ≤ s."""
    rows = ctx.small_matrix.shape[0]
    if rows * rows > budget:
        return Verdict.SKIP
    product = (ctx.cover.astype(np.float32) @ ctx.ycover.T.astype(np.float32)) > 0
    bad = np.argwhere(product != _small_block_table(ctx))
    if bad.size:
        a, b = bad[0]
        logger.info("block factorization mismatch at A=%#x B=%#x", ctx.small_masks[a], ctx.small_masks[b])
        return Verdict.FAIL
    return Verdict.PASS


def check_factorization(ctx: FactorizationContext, *, budget: int = DEFAULT_ORACLE_BUDGET) -> Verdict:
    """L·R = D_{n,k} over every pair of sets of size ≤ k (the budget counts pairs)."""
    block = check_block_factorization(ctx, budget=budget)
    if block is Verdict.FAIL:
        return Verdict.FAIL
    sets = sets_up_to(ctx.n, ctx.k_user)
    if len(sets) ** 2 > budget:
        return Verdict.SKIP
    right = np.stack([r_mask(ctx, b).reshape(-1) for b in sets], axis=1).astype(np.float32)
    sizes = np.array([len(s) for s in sets])
    members = np.zeros((len(sets), ctx.n), dtype=np.float32)
    for row, subset in enumerate(sets):
        members[row, [x - 1 for x in subset]] = 1
    truth = ((members @ members.T) == 0) & ((sizes[:, None] + sizes[None, :]) <= ctx.k_user)
    step = max(1, (1 << 22) // max(1, ctx.r))
    for start in range(0, len(sets), step):
        chunk = sets[start:start + step]
        left = np.stack([l_mask(ctx, a).reshape(-1) for a in chunk]).astype(np.float32)
        product = (left @ right) > 0
        bad = np.argwhere(product != truth[start:start + len(chunk)])
        if bad.size:
            a, b = bad[0]
            logger.info("L·R mismatch at A=%s B=%s", sorted(chunk[a]), sorted(sets[b]))
            return Verdict.FAIL
    return Verdict.PASS


def _hash_block_rows(ctx: FactorizationContext, elements: Iterable[int], require_injective: bool) -> np.ndarray:
    """(h, s) small-set rows of π(A) ∩ σ⁻¹(i); -1 for oversized blocks or a rejected collision."""
    zero_based = [x - 1 for x in elements]
    out = np.full((ctx.h, ctx.s), -1, dtype=np.int64)
    for hidx in range(ctx.h):
        pi = ctx.outer.maps[ctx.hash_pi[hidx]]
        sigma = ctx.inner.maps[ctx.hash_sigma[hidx]]
        images = [int(pi[x]) for x in zero_based]
        if require_injective and len(set(images)) != len(images):
            continue
        masks = [0] * ctx.s
        for v in images:
            masks[int(sigma[v])] |= 1 << v
        for i, mask in enumerate(masks):
            if bin(mask).count("1") <= ctx.s:
                out[hidx, i] = ctx.small_row(mask)
    return out


def check_hash_identity(
    ctx: FactorizationContext,
    *,
    require_injective: bool = True,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> Verdict:
    """H·(I ⊗ D_{u,s}^{⊗s})·Hᵀ = D_{n_pad,k} over sets of the padded universe of size ≤ k."""
    sets = sets_up_to(ctx.n_pad, ctx.k)
    if len(sets) ** 2 * ctx.h > budget:
        return Verdict.SKIP
    block_table = _small_block_table(ctx)
    rows = np.stack([_hash_block_rows(ctx, subset, require_injective) for subset in sets])
    sizes = np.array([len(s) for s in sets])
    for a_idx, a in enumerate(sets):
        ra = rows[a_idx][None, :, :]
        rb = rows
        valid = (ra >= 0) & (rb >= 0)
        hits = np.all(valid & block_table[np.maximum(ra, 0), np.maximum(rb, 0)], axis=2)
        product = hits.any(axis=1)
        truth = np.array([not (a & b) for b in sets]) & (sizes[a_idx] + sizes <= ctx.k)
        bad = np.flatnonzero(product != truth)
        if bad.size:
            logger.info("hash identity mismatch at A=%s B=%s", sorted(a), sorted(sets[bad[0]]))
            return Verdict.FAIL
    return Verdict.PASS


BlockOf = Callable[[FactorizationContext, int, int], int]


def home_block(ctx: FactorizationContext, hidx: int, v: int) -> int:
    return int(ctx.inner.maps[ctx.hash_sigma[hidx], v])


def _block_tuple(ctx: FactorizationContext, hidx: int, elements: Iterable[int]) -> Optional[tuple[int, ...]]:
    pi = ctx.outer.maps[ctx.hash_pi[hidx]]
    images = [int(pi[x - 1]) for x in elements]
    if len(set(images)) != len(images):
        return None
    masks = [0] * ctx.s
    for v in images:
        masks[home_block(ctx, hidx, v)] |= 1 << v
    return tuple(masks)


def _restricted(ctx: FactorizationContext, blocks: Optional[tuple[int, ...]]) -> Optional[tuple[int, ...]]:
    if blocks is None or any(bin(m).count("1") > ctx.s for m in blocks):
        return None
    return blocks


def check_hat_commutation(
    ctx: FactorizationContext,
    e: int,
    *,
    block_of: BlockOf = home_block,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> Verdict:
    """C_{n,e}·H = H·Ĉ_e on H columns whose block sets all have size ≤ s.

    Each row of H has at most one 1̄ per hash index, so both sides are compared
    through that column: C·H moves row A to the column of A ∪ {e}, Ĉ moves the
    column of A by inserting π(e) into block ``block_of``.
    """
    if not 1 <= e <= ctx.n:
        raise UsageError(f"element {e} outside [{ctx.n}]")
    sets = sets_up_to(ctx.n_pad, ctx.k)
    if len(sets) * ctx.h > budget:
        return Verdict.SKIP
    for subset in sets:
        for hidx in range(ctx.h):
            left = None
            if e not in subset:
                left = _restricted(ctx, _block_tuple(ctx, hidx, sorted(subset | {e})))
            right = None
            blocks = _block_tuple(ctx, hidx, sorted(subset))
            v = int(ctx.outer.maps[ctx.hash_pi[hidx], e - 1])
            if blocks is not None and not any((m >> v) & 1 for m in blocks):
                moved = list(blocks)
                moved[block_of(ctx, hidx, v)] |= 1 << v
                right = _restricted(ctx, tuple(moved))
            if left != right:
                logger.info("hat commutation mismatch at A=%s hash=%d e=%d", sorted(subset), hidx, e)
                return Verdict.FAIL
    return Verdict.PASS


def dense_times_L(ctx: FactorizationContext, a: DenseTable) -> np.ndarray:
    semiring = ctx.semiring
    out = semiring.zeros(ctx.shape)
    for subset, value in a.items():
        if value.is_zero:
            continue
        row = semiring.from_mask(l_mask(ctx, subset))
        out = semiring.add(out, semiring.mul(value.code, row)).astype(semiring.dtype, copy=False)
    return out


def represents(
    ctx: FactorizationContext,
    b: Representation,
    a: DenseTable,
    *,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> Verdict:
    """a·D ⪯ b·R over all |B| ≤ k, and b ⪯ a·L over all r columns."""
    semiring = ctx.semiring
    sets = sets_up_to(ctx.n, ctx.k_user)
    if len(sets) * max(1, len(a)) > budget:
        return Verdict.SKIP
    ad = dense_mul_D(a, ctx.n, ctx.k_user, semiring)
    for subset in sets:
        lhs = table_value(ad, subset, semiring)
        if not lhs <= query(ctx, b, subset):
            logger.info("a·D ⪯ b·R fails at B=%s", sorted(subset))
            return Verdict.FAIL
    al = dense_times_L(ctx, a)
    if not np.all(semiring.leq(b.values, al)):
        logger.info("b ⪯ a·L fails at %d columns", int(np.sum(~semiring.leq(b.values, al))))
        return Verdict.FAIL
    return Verdict.PASS


def query_dense(ctx: FactorizationContext, a: DenseTable, subset: Iterable[int]) -> SemiringElement:
    """(a·D)[B], the value a fast-path query must reproduce."""
    acc = ctx.semiring.zero
    for key, value in a.items():
        acc = acc + value * d_entry(key, subset, ctx.k_user, ctx.semiring)
    return acc
