"""Additively idempotent semirings: Boolean and M-capped min-plus (code cap + 1 is infinity)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from dynrepset.errors import UsageError


INFINITY = math.inf
MAX_CAP = 2**61

# Upper bound on elements materialized by one masked reduction.
_CHUNK_ELEMENTS = 1 << 22

Value = Union[int, float, bool]


class Semiring:
    """Descriptor contract.  Subclasses are frozen dataclasses (hashable, comparable)."""

    kind: str = ""
    dtype: np.dtype

    # -- codes ---------------------------------------------------------------
    @property
    def zero_code(self):
        raise NotImplementedError

    @property
    def one_code(self):
        raise NotImplementedError

    @property
    def bottom_code(self):
        """The sum of all elements; lcu of the empty sequence."""
        raise NotImplementedError

    def encode(self, value: Value):
        raise NotImplementedError

    def decode(self, code) -> Value:
        raise NotImplementedError

    def format(self, code) -> str:
        raise NotImplementedError

    def parse(self, text: str) -> "SemiringElement":
        raise NotImplementedError

    def codes(self) -> Iterator:
        """Every element, in ⪯-increasing order where the order is total."""
        raise NotImplementedError

    # -- array operations ----------------------------------------------------
    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def leq(self, a, b):
        return np.equal(self.add(a, b), a)

    def sum(self, values, axis=None):
        raise NotImplementedError

    def lcu_reduce(self, values, axis=None):
        raise NotImplementedError

    def masked_lcu(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """``out[b, j] = lcu{values[b, c] : mask[j, c]}``; (B, C) x (J, C) -> (B, J)."""
        raise NotImplementedError

    def masked_sum(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """``out[b, c] = sum{values[b, j] : mask[j, c]}``; (B, J) x (J, C) -> (B, C)."""
        raise NotImplementedError

    def masked_total(self, values: np.ndarray, mask: np.ndarray):
        """Sum of ``values`` over the positions where ``mask`` holds."""
        raise NotImplementedError

    # -- helpers -------------------------------------------------------------
    def zeros(self, shape) -> np.ndarray:
        return np.full(shape, self.zero_code, dtype=self.dtype)

    def ones(self, shape) -> np.ndarray:
        return np.full(shape, self.one_code, dtype=self.dtype)

    def from_mask(self, mask: np.ndarray) -> np.ndarray:
        return np.where(mask, self.one_code, self.zero_code).astype(self.dtype, copy=False)

    def is_zero(self, values) -> np.ndarray:
        return np.equal(values, self.zero_code)

    def element(self, value: Value) -> "SemiringElement":
        return SemiringElement(self, self.encode(value))

    @property
    def zero(self) -> "SemiringElement":
        return SemiringElement(self, self.zero_code)

    @property
    def one(self) -> "SemiringElement":
        return SemiringElement(self, self.one_code)

    def elements(self) -> list["SemiringElement"]:
        return [SemiringElement(self, code) for code in self.codes()]

    def describe(self) -> str:
        return self.kind


def _scalar(code):
    if isinstance(code, (np.generic, np.ndarray)):
        return code.item()
    return code


def _chunks(rows: int, per_row: int) -> Iterator[slice]:
    step = max(1, _CHUNK_ELEMENTS // max(1, per_row))
    for start in range(0, rows, step):
        yield slice(start, min(rows, start + step))


@dataclass(frozen=True)
class BooleanSemiring(Semiring):
    """({0, 1}, OR, AND, 0, 1).  The order puts 1 below 0."""

    kind = "boolean"
    dtype = np.dtype(np.bool_)

    @property
    def zero_code(self):
        return False

    @property
    def one_code(self):
        return True

    @property
    def bottom_code(self):
        return True

    def encode(self, value: Value):
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)) and int(value) in (0, 1):
            return bool(value)
        raise UsageError(f"not a boolean semiring value: {value!r}")

    def decode(self, code) -> Value:
        return int(bool(code))

    def format(self, code) -> str:
        return "1" if bool(code) else "0"

    def parse(self, text: str) -> "SemiringElement":
        token = text.strip().lower()
        if token in ("1", "true"):
            return self.one
        if token in ("0", "false"):
            return self.zero
        raise UsageError(f"not a boolean semiring value: {text!r}")

    def codes(self) -> Iterator:
        yield True
        yield False

    def add(self, a, b):
        return np.logical_or(a, b)

    def mul(self, a, b):
        return np.logical_and(a, b)

    def sum(self, values, axis=None):
        return np.any(values, axis=axis)

    def lcu_reduce(self, values, axis=None):
        return np.all(values, axis=axis)

    def masked_lcu(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        # AND over the masked positions == no masked position is False.
        misses = np.logical_not(values).astype(np.float32) @ mask.T.astype(np.float32)
        return misses == 0

    def masked_sum(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        hits = values.astype(np.float32) @ mask.astype(np.float32)
        return hits > 0

    def masked_total(self, values: np.ndarray, mask: np.ndarray):
        return bool(np.any(np.logical_and(values, mask)))


@dataclass(frozen=True)
class CappedMinPlus(Semiring):
    """({0..cap} ∪ {∞}, min, saturating +, ∞, 0)."""

    cap: int = 0
    kind = "minplus"
    dtype = np.dtype(np.int64)

    def __post_init__(self) -> None:
        if not 0 <= int(self.cap) <= MAX_CAP:
            raise UsageError(f"cap must lie in [0, {MAX_CAP}], got {self.cap}")

    @property
    def inf_code(self) -> int:
        return self.cap + 1

    @property
    def zero_code(self):
        return self.inf_code

    @property
    def one_code(self):
        return 0

    @property
    def bottom_code(self):
        return 0

    def encode(self, value: Value):
        if isinstance(value, float) and math.isinf(value) and value > 0:
            return self.inf_code
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
            raise UsageError(f"not a min-plus value: {value!r}")
        value = int(value)
        if value < 0:
            raise UsageError(f"negative values are not supported: {value}")
        return value if value <= self.cap else self.inf_code

    def decode(self, code) -> Value:
        code = int(code)
        return INFINITY if code >= self.inf_code else code

    def format(self, code) -> str:
        code = int(code)
        return "INF" if code >= self.inf_code else str(code)

    def parse(self, text: str) -> "SemiringElement":
        token = text.strip()
        if token.upper() in ("INF", "INFINITY", "∞"):
            return self.zero
        try:
            return self.element(int(token))
        except ValueError:
            raise UsageError(f"not a min-plus value: {text!r}") from None

    def codes(self) -> Iterator:
        yield from range(self.cap + 2)

    def add(self, a, b):
        return np.minimum(a, b)

    def mul(self, a, b):
        total = np.add(a, b, dtype=np.int64)
        return np.where(total > self.cap, self.inf_code, total).astype(np.int64, copy=False)

    def sum(self, values, axis=None):
        return np.min(np.asarray(values, dtype=np.int64), axis=axis, initial=self.inf_code)

    def lcu_reduce(self, values, axis=None):
        values = np.asarray(values, dtype=np.int64)
        return np.max(values, axis=axis, initial=self.bottom_code)

    def masked_lcu(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = np.empty((values.shape[0], mask.shape[0]), dtype=np.int64)
        for part in _chunks(values.shape[0], mask.size):
            picked = np.where(mask[None, :, :], values[part, None, :], self.bottom_code)
            out[part] = picked.max(axis=2, initial=self.bottom_code)
        return out

    def masked_sum(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = np.empty((values.shape[0], mask.shape[1]), dtype=np.int64)
        for part in _chunks(values.shape[0], mask.size):
            picked = np.where(mask[None, :, :], values[part, :, None], self.inf_code)
            out[part] = picked.min(axis=1, initial=self.inf_code)
        return out

    def masked_total(self, values: np.ndarray, mask: np.ndarray):
        return int(np.min(np.where(mask, values, self.inf_code), initial=self.inf_code))

    def describe(self) -> str:
        return f"minplus(cap={self.cap})"


def make_semiring(kind: str, cap: int | None = None) -> Semiring:
    kind = kind.strip().lower()
    if kind in ("boolean", "bool"):
        return BooleanSemiring()
    if kind in ("minplus", "min-plus", "capped-min-plus"):
        return CappedMinPlus(cap=int(cap) if cap is not None else 0)
    raise UsageError(f"unknown semiring {kind!r} (expected boolean or minplus)")


@dataclass(frozen=True)
class SemiringElement:
    semiring: Semiring
    code: object

    @property
    def value(self) -> Value:
        return self.semiring.decode(self.code)

    @property
    def is_zero(self) -> bool:
        return bool(self.semiring.is_zero(self.code))

    def _check(self, other: "SemiringElement") -> None:
        if not isinstance(other, SemiringElement) or other.semiring != self.semiring:
            raise UsageError(f"mixed semirings: {self.semiring.describe()} vs {getattr(other, 'semiring', other)!r}")

    def _wrap(self, code) -> "SemiringElement":
        return SemiringElement(self.semiring, _scalar(code))

    def __add__(self, other: "SemiringElement") -> "SemiringElement":
        self._check(other)
        return self._wrap(self.semiring.add(self.code, other.code))

    def __mul__(self, other: "SemiringElement") -> "SemiringElement":
        self._check(other)
        return self._wrap(self.semiring.mul(self.code, other.code))

    def __le__(self, other: "SemiringElement") -> bool:
        self._check(other)
        return bool(self.semiring.leq(self.code, other.code))

    def __str__(self) -> str:
        return self.semiring.format(self.code)

    def __repr__(self) -> str:
        return f"{self.semiring.describe()}:{self}"


def add(a: SemiringElement, b: SemiringElement) -> SemiringElement:
    return a + b


def mul(a: SemiringElement, b: SemiringElement) -> SemiringElement:
    return a * b


def leq(a: SemiringElement, b: SemiringElement) -> bool:
    """a ⪯ b, i.e. a + b == a."""
    return a <= b


def lcu(values: Iterable[SemiringElement], semiring: Semiring | None = None) -> SemiringElement:
    """Least common upper bound; the empty sequence yields the ⪯-bottom."""
    values = list(values)
    if semiring is None:
        if not values:
            raise UsageError("lcu of an empty sequence needs an explicit semiring")
        semiring = values[0].semiring
    for value in values:
        if value.semiring != semiring:
            raise UsageError("mixed semirings in lcu")
    if not values:
        return SemiringElement(semiring, semiring.bottom_code)
    code = semiring.lcu_reduce(np.asarray([v.code for v in values], dtype=semiring.dtype))
    return SemiringElement(semiring, _scalar(code))


def total(values: Sequence[SemiringElement], semiring: Semiring) -> SemiringElement:
    out = semiring.zero
    for value in values:
        out = out + value
    return out
