"""Implicit factorization D_{n,k} = L · R over columns (π, σ, (F_1, p_1), …, (F_s, p_s)).

Small sets are numbered in colex order within each size.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from dynrepset.core.pseudorandom import (
    DEFAULT_TRACK_BUDGET,
    FamilyCache,
    SplitterFamily,
    UniversalFamily,
    build_inner_splitter,
    build_outer_splitter,
    build_universal_family,
)
from dynrepset.core.semiring import Semiring, SemiringElement
from dynrepset.errors import ConstructionError, ResourceError, UsageError


logger = logging.getLogger(__name__)

MAX_K = 11
DEFAULT_MAX_COLUMNS = 2_000_000

SetLike = Union[int, Iterable[int]]


@dataclass(frozen=True)
class ColumnIndex:
    pi_idx: int
    sigma_idx: int
    blocks: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Families:
    outer: SplitterFamily
    inner: SplitterFamily
    universal: UniversalFamily


@dataclass(frozen=True, eq=False)
class FactorizationContext:
    n: int
    k_user: int
    k: int
    s: int
    u: int
    span: int
    d: int
    n_pad: int
    semiring: Semiring
    outer: SplitterFamily
    inner: SplitterFamily
    fam: UniversalFamily
    h: int
    ell: int
    r: int
    hash_pi: np.ndarray = field(repr=False)
    hash_sigma: np.ndarray = field(repr=False)
    binom: np.ndarray = field(repr=False)
    size_offset: np.ndarray = field(repr=False)
    small_matrix: np.ndarray = field(repr=False)
    small_sizes: np.ndarray = field(repr=False)
    small_masks: tuple[int, ...] = field(repr=False)
    col_family: np.ndarray = field(repr=False)
    col_p: np.ndarray = field(repr=False)
    cover: np.ndarray = field(repr=False)
    ycover: np.ndarray = field(repr=False)
    conv_src: tuple[np.ndarray, ...] = field(repr=False)
    conv_src_cover: tuple[np.ndarray, ...] = field(repr=False)
    conv_insert: tuple[np.ndarray, ...] = field(repr=False)
    _groups: dict = field(default_factory=dict, repr=False)
    _groups_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.h,) + (self.ell,) * self.s

    @property
    def phantoms(self) -> tuple[int, ...]:
        return tuple(range(self.n + 1, self.n_pad + 1))

    def small_row(self, mask: int) -> int:
        """Row of a small set (given as a bitmask over [span]) in the coverage tables."""
        bits = [b for b in range(self.span) if (mask >> b) & 1]
        if len(bits) > self.s:
            raise UsageError(f"set of size {len(bits)} exceeds s={self.s}")
        return int(self.size_offset[len(bits)] + sum(self.binom[b, j + 1] for j, b in enumerate(bits)))

    def hash_groups(self, e: int) -> list[tuple[int, int, np.ndarray]]:
        """Hash indices grouped by ``(v, i) = (π(e), σ(π(e)))`` for element ``e`` of [n]."""
        groups = self._groups.get(e)
        if groups is not None:
            return groups
        v = self.outer.maps[self.hash_pi, e - 1]
        i = self.inner.maps[self.hash_sigma, v]
        keys = v * self.s + i
        groups = []
        for key in np.unique(keys):
            hidx = np.flatnonzero(keys == key)
            groups.append((int(key) // self.s, int(key) % self.s, hidx))
        with self._groups_lock:
            self._groups[e] = groups
        return groups

    def summary(self) -> dict:
        return {
            "n": self.n, "k": self.k_user, "k_padded": self.k, "s": self.s, "u": self.u, "span": self.span, "d": self.d,
            "outer": len(self.outer), "inner": len(self.inner), "family": len(self.fam),
            "h": self.h, "ell": self.ell, "r": self.r,
        }


def as_mask(subset: SetLike) -> int:
    """Bitmask of a subset of [u] given either as a mask or as 1-based elements."""
    if isinstance(subset, (int, np.integer)):
        return int(subset)
    mask = 0
    for x in subset:
        if x < 1:
            raise UsageError(f"elements are 1-based, got {x}")
        mask |= 1 << (int(x) - 1)
    return mask


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def normalize_subset(ctx: FactorizationContext, subset: Iterable[int]) -> tuple[int, ...]:
    elements = tuple(sorted(set(int(x) for x in subset)))
    for x in elements:
        if not 1 <= x <= ctx.n:
            raise UsageError(f"element {x} outside [{ctx.n}]")
    return elements


def padding(k_user: int) -> tuple[int, int, int]:
    """``(s, k, d)`` with s = ⌈√k_user⌉, k = s², d = k − k_user."""
    s = math.isqrt(k_user - 1) + 1 if k_user > 0 else 0
    return s, s * s, s * s - k_user


def build_context(
    n: int,
    k_user: int,
    semiring: Semiring,
    *,
    cache: Optional[FamilyCache] = None,
    families: Optional[Families] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_columns: int = DEFAULT_MAX_COLUMNS,
    strict: bool = True,
) -> FactorizationContext:
    """Build families and tables for (n, k).  With ``strict=False`` a family that leaves
    small sets uncovered is accepted with a warning (used for fault injection)."""
    if not 1 <= k_user <= n:
        raise UsageError(f"need 1 <= k <= n, got n={n} k={k_user}")
    if k_user > MAX_K:
        raise ResourceError(f"k={k_user} exceeds the supported maximum {MAX_K}")
    s, k, d = padding(k_user)
    n_pad, u = n + d, k * k
    # The outer hash only reaches [n_pad] when n_pad <= k^2; the tables cover that range.
    span = min(u, n_pad)

    if families is not None:
        outer, inner, fam = families.outer, families.inner, families.universal
    elif cache is not None:
        outer = cache.outer(n_pad, k, track_budget=track_budget)
        inner = cache.inner(u, k, s, domain=span, track_budget=track_budget)
        fam = None
    else:
        outer = build_outer_splitter(n_pad, k, track_budget=track_budget)
        inner = build_inner_splitter(u, k, s, domain=span, track_budget=track_budget)
        fam = None
    if outer.n != n_pad or outer.ell != u or inner.n != u or inner.ell != s or inner.span < span:
        raise UsageError("families do not match the padded parameters")
    if len(outer) and int(outer.maps.max()) >= span:
        raise UsageError(f"outer splitter leaves the hash range [{span}]")

    h = len(outer) * len(inner)
    # |F| >= 2^s, so this bound is known before the universal family is built.
    r_floor = h * ((1 << s) * (s + 1)) ** s
    if r_floor > max_columns:
        raise ResourceError(f"rank r >= {r_floor} exceeds the column ceiling {max_columns} (n={n}, k={k_user})")
    if fam is None:
        fam = cache.universal(span, s) if cache is not None else build_universal_family(span, s)
    if fam.u != span or fam.s != s:
        raise UsageError(f"universal family must be over [{span}] with s={s}")
    ell = len(fam) * (s + 1)
    r = h * ell**s
    if r > max_columns:
        raise ResourceError(f"rank r={r} exceeds the column ceiling {max_columns} (n={n}, k={k_user})")

    hash_pi, hash_sigma = (a.ravel() for a in np.meshgrid(
        np.arange(len(outer)), np.arange(len(inner)), indexing="ij"))

    binom = np.array([[math.comb(a, j) for j in range(s + 2)] for a in range(span + 1)], dtype=np.int64)
    size_offset = np.cumsum([0] + [math.comb(span, t) for t in range(s + 1)]).astype(np.int64)
    rows = int(size_offset[-1])
    small_matrix = np.zeros((rows, span), dtype=bool)
    small_sizes = np.zeros(rows, dtype=np.int64)
    small_masks = [0] * rows
    for t in range(s + 1):
        for combo in itertools.combinations(range(span), t):
            row = int(size_offset[t] + sum(binom[b, j + 1] for j, b in enumerate(combo)))
            small_matrix[row, list(combo)] = True
            small_sizes[row] = t
            small_masks[row] = sum(1 << b for b in combo)

    col_family = np.repeat(np.arange(len(fam)), s + 1)
    col_p = np.tile(np.arange(s + 1), len(fam))
    fam_matrix = fam.matrix
    small_i = small_matrix.astype(np.int32)
    inside = (small_i @ (~fam_matrix).T.astype(np.int32)) == 0
    apart = (small_i @ fam_matrix.T.astype(np.int32)) == 0
    cover = inside[:, col_family] & (small_sizes[:, None] <= col_p[None, :])
    ycover = apart[:, col_family] & (small_sizes[:, None] <= (s - col_p)[None, :])
    uncovered = np.flatnonzero(~cover.any(axis=1))
    if uncovered.size:
        message = f"universal family leaves {uncovered.size} small sets without a superset"
        if strict:
            raise ConstructionError(message)
        logger.warning(message)

    conv_src, conv_src_cover, conv_insert = [], [], []
    for v in range(span):
        src = np.flatnonzero(~small_matrix[:, v] & (small_sizes <= s - 1))
        dst = np.array([small_masks[row] | (1 << v) for row in src], dtype=object)
        dst_rows = np.array([_colex_row(int(m), binom, size_offset) for m in dst], dtype=np.int64)
        conv_src.append(src)
        conv_src_cover.append(cover[src])
        conv_insert.append(cover[dst_rows] if dst_rows.size else np.zeros((0, ell), dtype=bool))

    ctx = FactorizationContext(
        n=n, k_user=k_user, k=k, s=s, u=u, span=span, d=d, n_pad=n_pad, semiring=semiring,
        outer=outer, inner=inner, fam=fam, h=h, ell=ell, r=r,
        hash_pi=hash_pi, hash_sigma=hash_sigma, binom=binom, size_offset=size_offset,
        small_matrix=small_matrix, small_sizes=small_sizes, small_masks=tuple(small_masks),
        col_family=col_family, col_p=col_p, cover=cover, ycover=ycover,
        conv_src=tuple(conv_src), conv_src_cover=tuple(conv_src_cover), conv_insert=tuple(conv_insert),
    )
    logger.info("context %s", ctx.summary())
    return ctx


def with_semiring(ctx: FactorizationContext, semiring: Semiring) -> FactorizationContext:
    """The same factorization over another semiring (families and tables are shared)."""
    fields = {name: getattr(ctx, name) for name in ctx.__dataclass_fields__ if not name.startswith("_")}
    fields["semiring"] = semiring
    return FactorizationContext(**fields)


def _colex_row(mask: int, binom: np.ndarray, size_offset: np.ndarray) -> int:
    bits = [b for b in range(mask.bit_length()) if (mask >> b) & 1]
    return int(size_offset[len(bits)] + sum(binom[b, j + 1] for j, b in enumerate(bits)))


def encode_column(ctx: FactorizationContext, col: ColumnIndex) -> int:
    if len(col.blocks) != ctx.s:
        raise UsageError(f"column needs {ctx.s} blocks, got {len(col.blocks)}")
    flat = col.pi_idx * len(ctx.inner) + col.sigma_idx
    for f_idx, p in col.blocks:
        if not (0 <= f_idx < len(ctx.fam) and 0 <= p <= ctx.s):
            raise UsageError(f"bad block ({f_idx}, {p})")
        flat = flat * ctx.ell + f_idx * (ctx.s + 1) + p
    return flat


def decode_column(ctx: FactorizationContext, flat: int) -> ColumnIndex:
    if not 0 <= flat < ctx.r:
        raise UsageError(f"column {flat} outside [0, {ctx.r})")
    blocks = []
    for _ in range(ctx.s):
        flat, c = divmod(flat, ctx.ell)
        blocks.append(divmod(c, ctx.s + 1))
    pi_idx, sigma_idx = divmod(flat, len(ctx.inner))
    return ColumnIndex(pi_idx, sigma_idx, tuple(reversed(blocks)))


def _column(ctx: FactorizationContext, col: Union[ColumnIndex, int]) -> ColumnIndex:
    return decode_column(ctx, int(col)) if not isinstance(col, ColumnIndex) else col


def _bool(ctx: FactorizationContext, flag: bool) -> SemiringElement:
    return ctx.semiring.one if flag else ctx.semiring.zero


def x_entry(ctx: FactorizationContext, subset: SetLike, f_idx: int, p: int) -> SemiringElement:
    """X[A, (F, p)] = ⟦A ⊆ F ∧ |A| ≤ p⟧."""
    mask = as_mask(subset)
    family_set = ctx.fam.sets[f_idx]
    return _bool(ctx, mask & ~family_set == 0 and popcount(mask) <= p)


def y_entry(ctx: FactorizationContext, f_idx: int, p: int, subset: SetLike) -> SemiringElement:
    """Y[(F, p), B] = ⟦F ∩ B = ∅ ∧ |B| ≤ s − p⟧."""
    mask = as_mask(subset)
    family_set = ctx.fam.sets[f_idx]
    return _bool(ctx, mask & family_set == 0 and popcount(mask) <= ctx.s - p)


def _block_masks(ctx: FactorizationContext, col: ColumnIndex, elements: Sequence[int]) -> Optional[list[int]]:
    """π(A) ∩ σ⁻¹(i) for every block, or None when π collides on A."""
    pi = ctx.outer.maps[col.pi_idx]
    sigma = ctx.inner.maps[col.sigma_idx]
    images = [int(pi[x - 1]) for x in elements]
    if len(set(images)) != len(images):
        return None
    masks = [0] * ctx.s
    for v in images:
        masks[int(sigma[v])] |= 1 << v
    return masks


def l_entry(ctx: FactorizationContext, subset: Iterable[int], col: Union[ColumnIndex, int]) -> SemiringElement:
    elements = normalize_subset(ctx, subset)
    if len(elements) > ctx.k_user:
        return ctx.semiring.zero
    col = _column(ctx, col)
    masks = _block_masks(ctx, col, elements + ctx.phantoms)
    if masks is None:
        return ctx.semiring.zero
    out = ctx.semiring.one
    for mask, (f_idx, p) in zip(masks, col.blocks):
        out = out * x_entry(ctx, mask, f_idx, p)
    return out


def r_entry(ctx: FactorizationContext, col: Union[ColumnIndex, int], subset: Iterable[int]) -> SemiringElement:
    elements = normalize_subset(ctx, subset)
    if len(elements) > ctx.k_user:
        return ctx.semiring.zero
    col = _column(ctx, col)
    masks = _block_masks(ctx, col, elements)
    if masks is None:
        return ctx.semiring.zero
    out = ctx.semiring.one
    for mask, (f_idx, p) in zip(masks, col.blocks):
        out = out * y_entry(ctx, f_idx, p, mask)
    return out


def block_rows(ctx: FactorizationContext, elements0: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per hash index: injectivity flag and the small-set row of every block (-1 if too big)."""
    h, s = ctx.h, ctx.s
    if not elements0:
        return np.ones(h, dtype=bool), np.broadcast_to(ctx.size_offset[0], (h, s)).copy()
    images = ctx.outer.maps[ctx.hash_pi][:, list(elements0)]
    images.sort(axis=1)
    injective = np.all(np.diff(images, axis=1) != 0, axis=1)
    blocks = ctx.inner.maps[ctx.hash_sigma[:, None], images]
    rows = np.empty((h, s), dtype=np.int64)
    for i in range(s):
        in_block = blocks == i
        position = np.cumsum(in_block, axis=1)
        size = position[:, -1]
        capped = np.minimum(position, ctx.s + 1)
        rank = np.where(in_block, ctx.binom[images, capped], 0).sum(axis=1)
        rows[:, i] = np.where(size <= s, ctx.size_offset[np.minimum(size, s)] + rank, -1)
    return injective, rows


def _outer_product(ctx: FactorizationContext, per_block: list[np.ndarray]) -> np.ndarray:
    """``out[h, c_1, …, c_s] = ∧_i per_block[i][h, c_i]``."""
    out = per_block[0]
    for i, vec in enumerate(per_block[1:], start=1):
        out = out[..., None] & vec.reshape((ctx.h,) + (1,) * i + (ctx.ell,))
    return out


def _mask_from_rows(ctx: FactorizationContext, table: np.ndarray, injective: np.ndarray, rows: np.ndarray) -> np.ndarray:
    valid = injective & np.all(rows >= 0, axis=1)
    per_block = []
    for i in range(ctx.s):
        vec = table[np.maximum(rows[:, i], 0)] & valid[:, None]
        per_block.append(vec)
    return _outer_product(ctx, per_block)


def l_mask(ctx: FactorizationContext, subset: Iterable[int]) -> np.ndarray:
    """Boolean L[A, ·] reshaped to the representation shape."""
    elements = normalize_subset(ctx, subset)
    if len(elements) > ctx.k_user:
        return np.zeros(ctx.shape, dtype=bool)
    injective, rows = block_rows(ctx, [x - 1 for x in elements + ctx.phantoms])
    return _mask_from_rows(ctx, ctx.cover, injective, rows)


def r_mask(ctx: FactorizationContext, subset: Iterable[int]) -> np.ndarray:
    """Boolean R[·, B] reshaped to the representation shape."""
    elements = normalize_subset(ctx, subset)
    if len(elements) > ctx.k_user:
        return np.zeros(ctx.shape, dtype=bool)
    injective, rows = block_rows(ctx, [x - 1 for x in elements])
    return _mask_from_rows(ctx, ctx.ycover, injective, rows)


def l_row(ctx: FactorizationContext, subset: Iterable[int]) -> np.ndarray:
    return ctx.semiring.from_mask(l_mask(ctx, subset))


def r_column(ctx: FactorizationContext, subset: Iterable[int]) -> np.ndarray:
    return ctx.semiring.from_mask(r_mask(ctx, subset))
