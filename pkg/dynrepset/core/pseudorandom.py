"""Splitters and universal families, built greedily and checked exhaustively.

``maps[j, x]`` is the 0-based block that function ``j`` gives element ``x``;
universal-family sets are int bitmasks (bit ``j`` is element ``j + 1``).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from dynrepset.errors import ConstructionError, DynRepSetError, ParseError, UsageError, Verdict


logger = logging.getLogger(__name__)

SEED = 0x5EED
DEFAULT_VERIFY_BUDGET = 10**7
DEFAULT_TRACK_BUDGET = 10**8
DEFAULT_MAX_CANDIDATES = 20_000
UNIVERSAL_POOL_SIZE = 4096
FULL_POOL_MAX_U = 16
# Failure probability of an untracked splitter is below 2^-ESTIMATOR_MARGIN_BITS.
ESTIMATOR_MARGIN_BITS = 40

_MASK64 = (1 << 64) - 1
_CHUNK_ROWS = 200_000


class SplitMix64:
    """The splitmix64 stream; fixed seeds give identical families on every platform."""

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        return self.next() % bound

    def array(self, count: int, bound: int) -> np.ndarray:
        return np.fromiter((self.next() % bound for _ in range(count)), dtype=np.int64, count=count)

    @classmethod
    def for_params(cls, *params: int) -> "SplitMix64":
        mixer = cls(SEED)
        for param in params:
            mixer.state ^= param & _MASK64
            mixer.state = mixer.next()
        return mixer


@dataclass(frozen=True, eq=False)
class SplitterFamily:
    n: int
    k: int
    ell: int
    maps: np.ndarray = field(repr=False)
    # False when the family came from the counting estimator and was never checked.
    tracked: bool = True
    # Only k-subsets of [domain] are guaranteed to split; None means all of [n].
    domain: Optional[int] = None

    def __post_init__(self) -> None:
        maps = np.asarray(self.maps, dtype=np.int64)
        if maps.ndim != 2 or maps.shape[1] != self.n:
            raise UsageError(f"splitter maps must have shape (count, {self.n}), got {maps.shape}")
        if maps.size and (maps.min() < 0 or maps.max() >= self.ell):
            raise UsageError(f"splitter maps must land in [{self.ell}]")
        if self.domain is not None and not self.k <= self.domain <= self.n:
            raise UsageError(f"splitter domain {self.domain} outside [{self.k}, {self.n}]")
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    def __len__(self) -> int:
        return int(self.maps.shape[0])

    @property
    def span(self) -> int:
        return self.n if self.domain is None else self.domain

    @property
    def functions(self) -> list[tuple[int, ...]]:
        """Each function as a tuple of 1-based block labels for elements 1..n."""
        return [tuple(int(b) + 1 for b in row) for row in self.maps]


@dataclass(frozen=True, eq=False)
class UniversalFamily:
    u: int
    s: int
    sets: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def matrix(self) -> np.ndarray:
        bits = np.arange(self.u)
        out = np.zeros((len(self.sets), self.u), dtype=bool)
        for row, mask in enumerate(self.sets):
            out[row] = [(mask >> int(b)) & 1 for b in bits]
        return out

    def without(self, index: int) -> "UniversalFamily":
        return UniversalFamily(self.u, self.s, self.sets[:index] + self.sets[index + 1:])


def _pattern(k: int, ell: int) -> np.ndarray:
    floor, rem = divmod(k, ell)
    return np.array([floor + 1] * rem + [floor] * (ell - rem), dtype=np.int64)


def splits(h: Sequence[int], subset: Iterable[int], ell: int, *, relabel: bool = False) -> bool:
    """Does ``h`` split ``subset``?

    ``h[x - 1]`` is the 1-based block of element ``x``.  The literal reading
    wants block ``i`` to hold ⌈k/ℓ⌉ elements for ``i ≤ j`` and ⌊k/ℓ⌋ after;
    with ``relabel`` the blocks may be reordered first.
    """
    elements = sorted(set(subset))
    k = len(elements)
    counts = np.zeros(ell, dtype=np.int64)
    for x in elements:
        if not 1 <= x <= len(h):
            raise UsageError(f"element {x} outside [{len(h)}]")
        block = int(h[x - 1])
        if not 1 <= block <= ell:
            raise UsageError(f"block {block} outside [{ell}]")
        counts[block - 1] += 1
    if relabel:
        counts = np.sort(counts)[::-1]
    return bool(np.array_equal(counts, _pattern(k, ell)))


def _split_rows(row: np.ndarray, sets: np.ndarray, ell: int, relabel: bool) -> np.ndarray:
    count, k = sets.shape
    if count == 0:
        return np.zeros(0, dtype=bool)
    images = row[sets]
    target = _pattern(k, ell)
    if relabel and target.max() <= 1:
        ordered = np.sort(images, axis=1)
        return np.all(np.diff(ordered, axis=1) != 0, axis=1)
    offsets = (np.arange(count, dtype=np.int64) * ell)[:, None]
    counts = np.bincount((images + offsets).ravel(), minlength=count * ell).reshape(count, ell)
    if relabel:
        counts = -np.sort(-counts, axis=1)
    return np.all(counts == target[None, :], axis=1)


def _split_probability(k: int, ell: int) -> float:
    """Chance that a uniform map [n] → [ell] splits a fixed k-set (up to relabeling)."""
    floor, rem = divmod(k, ell)
    arrangements = math.comb(ell, rem)
    multinomial = math.factorial(k) // (math.factorial(floor + 1) ** rem * math.factorial(floor) ** (ell - rem))
    return arrangements * multinomial / float(ell) ** k


def _all_subsets(n: int, k: int) -> np.ndarray:
    total = math.comb(n, k)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.int64, count=total * k)
    return flat.reshape(total, k)


def _subset_chunks(n: int, k: int) -> Iterator[np.ndarray]:
    combos = itertools.combinations(range(n), k)
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _CHUNK_ROWS)), dtype=np.int64)
        if flat.size == 0:
            return
        yield flat.reshape(-1, k)


def _estimated_splitter(n: int, k: int, ell: int, rng: SplitMix64, total: int,
                        max_candidates: int) -> list[np.ndarray]:
    p = _split_probability(k, ell)
    if p <= 0.0:
        raise ConstructionError(f"({n},{k},{ell})-splitter: random maps never split")
    if p >= 1.0:
        return [rng.array(n, ell)]
    # total * (1 - p)^t <= 2^-margin once t reaches (ln total + margin ln 2) / -ln(1 - p).
    need = int(math.ceil((math.log(total) + ESTIMATOR_MARGIN_BITS * math.log(2)) / -math.log1p(-p)))
    if need > max_candidates:
        raise ConstructionError(f"({n},{k},{ell})-splitter would need {need} functions")
    logger.warning("splitter (%d,%d,%d): C(n,k)=%d over the tracking budget, taking %d unchecked functions",
                   n, k, ell, total, need)
    return [rng.array(n, ell) for _ in range(need)]


def _greedy_splitter(
    n: int,
    k: int,
    ell: int,
    tag: int,
    track_budget: int,
    max_candidates: int,
    domain: Optional[int] = None,
) -> SplitterFamily:
    """Random maps kept while they split a still-unsplit k-subset of [domain].

    Subsets are streamed chunk by chunk, so coverage is exact for any
    C(domain, k) up to ``track_budget``; past it the counting estimator
    decides how many maps to draw and the family is marked untracked.
    """
    span = n if domain is None else domain
    rng = SplitMix64.for_params(tag, n, k, ell) if domain is None else SplitMix64.for_params(tag, n, k, ell, span)
    total = math.comb(span, k)
    if total > track_budget:
        estimated = _estimated_splitter(span, k, ell, rng, total, max_candidates)
        return _finish(n, k, ell, estimated, span, domain, tracked=False)
    kept: list[np.ndarray] = []
    drawn = 0
    for chunk in _subset_chunks(span, k):
        open_ = np.ones(chunk.shape[0], dtype=bool)
        for row in kept:
            idx = np.flatnonzero(open_)
            if idx.size == 0:
                break
            open_[idx[_split_rows(row, chunk[idx], ell, relabel=True)]] = False
        while open_.any():
            if drawn >= max_candidates:
                raise ConstructionError(
                    f"({n},{k},{ell})-splitter: {int(open_.sum())} sets of a chunk still unsplit "
                    f"after {max_candidates} candidates"
                )
            candidate = rng.array(span, ell)
            drawn += 1
            idx = np.flatnonzero(open_)
            hits = _split_rows(candidate, chunk[idx], ell, relabel=True)
            if hits.any():
                kept.append(candidate)
                open_[idx[hits]] = False
    logger.debug("splitter (%d,%d,%d) on [%d]: %d functions from %d candidates", n, k, ell, span, len(kept), drawn)
    return _finish(n, k, ell, kept, span, domain, tracked=True)


def _finish(n: int, k: int, ell: int, kept: list[np.ndarray], span: int,
            domain: Optional[int], tracked: bool) -> SplitterFamily:
    maps = np.stack(kept)
    if span < n:
        tail = np.broadcast_to(np.arange(span, n, dtype=np.int64) % ell, (len(kept), n - span))
        maps = np.hstack([maps, tail])
    return SplitterFamily(n, k, ell, maps, tracked=tracked, domain=domain)


def build_outer_splitter(
    n: int,
    k: int,
    *,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> SplitterFamily:
    """An (n, k, k²)-splitter: for every k-set some map is injective on it."""
    if not 1 <= k <= n:
        raise UsageError(f"outer splitter needs 1 <= k <= n, got n={n} k={k}")
    ell = k * k
    if n <= ell:
        return SplitterFamily(n, k, ell, np.arange(n, dtype=np.int64)[None, :])
    return _greedy_splitter(n, k, ell, 1, track_budget, max_candidates)


def build_inner_splitter(
    u: int,
    k: int,
    s: int,
    *,
    domain: Optional[int] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> SplitterFamily:
    """A (u, k, s)-splitter with k = s², splitting every k-set of [domain] (default [u]) s per block."""
    if k != s * s or u < k:
        raise UsageError(f"inner splitter needs k = s^2 <= u, got u={u} k={k} s={s}")
    if domain is not None and not k <= domain <= u:
        raise UsageError(f"inner splitter domain {domain} outside [{k}, {u}]")
    if domain == u:
        domain = None
    span = u if domain is None else domain
    if span == k:
        return SplitterFamily(u, k, s, ((np.arange(u, dtype=np.int64) // s) % s)[None, :], domain=domain)
    return _greedy_splitter(u, k, s, 2, track_budget, max_candidates, domain)


def _candidate_pool(u: int) -> np.ndarray:
    if u <= FULL_POOL_MAX_U:
        masks = np.arange(1 << u, dtype=np.int64)
        return ((masks[:, None] >> np.arange(u)[None, :]) & 1).astype(bool)
    rng = SplitMix64.for_params(3, u)
    pool = np.zeros((UNIVERSAL_POOL_SIZE, u), dtype=bool)
    for row in range(UNIVERSAL_POOL_SIZE):
        word = 0
        for bit in range(u):
            if bit % 64 == 0:
                word = rng.next()
            pool[row, bit] = (word >> (bit % 64)) & 1
    return pool


def _trace_codes(pool: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """``codes[c, d]`` = bits of ``pool[c] ∩ xs[d]`` packed as an int."""
    weights = (1 << np.arange(xs.shape[1], dtype=np.int64))
    return (pool[:, xs].astype(np.int64) * weights[None, None, :]).sum(axis=2)


def build_universal_family(u: int, s: int) -> UniversalFamily:
    """A (u, s)-universal family by greedy set cover over (X, Y ⊆ X) demands, |X| = s."""
    if not 1 <= s <= u:
        raise UsageError(f"universal family needs 1 <= s <= u, got u={u} s={s}")
    xs = _all_subsets(u, s)
    uncovered = np.ones((xs.shape[0], 1 << s), dtype=bool)
    pool = _candidate_pool(u)
    chosen: list[int] = []
    rows = np.arange(xs.shape[0])
    while uncovered.any():
        best, best_gain = -1, 0
        step = max(1, _CHUNK_ROWS * 8 // max(1, xs.shape[0]))
        for start in range(0, pool.shape[0], step):
            codes = _trace_codes(pool[start:start + step], xs)
            gains = uncovered[rows[None, :], codes].sum(axis=1)
            top = int(np.argmax(gains))
            if gains[top] > best_gain:
                best, best_gain = start + top, int(gains[top])
        if best_gain == 0:
            raise ConstructionError(f"({u},{s})-universal family: candidate pool cannot cover all demands")
        chosen.append(best)
        codes = _trace_codes(pool[best:best + 1], xs)[0]
        uncovered[rows, codes] = False
    sets = tuple(_mask_of(pool[c]) for c in chosen)
    logger.debug("universal family (%d,%d): %d sets", u, s, len(sets))
    return UniversalFamily(u, s, sets)


def _mask_of(row: np.ndarray) -> int:
    mask = 0
    for bit in np.flatnonzero(row):
        mask |= 1 << int(bit)
    return mask


def verify_splitter(
    family: SplitterFamily,
    *,
    budget: int = DEFAULT_VERIFY_BUDGET,
    relabel: bool = True,
) -> Verdict:
    """Exhaustive check over the k-subsets of the family's domain."""
    span = family.span
    if math.comb(span, family.k) > budget:
        return Verdict.SKIP
    maps = family.maps[:, :span]
    for chunk in _subset_chunks(span, family.k):
        covered = np.zeros(chunk.shape[0], dtype=bool)
        for row in maps:
            open_idx = np.flatnonzero(~covered)
            if open_idx.size == 0:
                break
            covered[open_idx[_split_rows(row, chunk[open_idx], family.ell, relabel)]] = True
        if not covered.all():
            return Verdict.FAIL
    return Verdict.PASS


def verify_universal(family: UniversalFamily, *, budget: int = DEFAULT_VERIFY_BUDGET) -> Verdict:
    u, s = family.u, family.s
    demands = sum(math.comb(u, t) for t in range(min(s, u) + 1)) * (1 << s)
    if demands > budget:
        return Verdict.SKIP
    matrix = family.matrix
    for size in range(min(s, u) + 1):
        xs = _all_subsets(u, size)
        if size == 0:
            # The empty trace needs any set at all.
            if len(family) == 0:
                return Verdict.FAIL
            continue
        seen = np.zeros((xs.shape[0], 1 << size), dtype=bool)
        if len(family):
            codes = _trace_codes(matrix, xs)
            seen[np.arange(xs.shape[0])[None, :], codes] = True
        if not seen.all():
            return Verdict.FAIL
    return Verdict.PASS


def format_splitter(family: SplitterFamily) -> str:
    head = f"splitter {family.n} {family.k} {family.ell} {len(family)}"
    if family.domain is not None:
        head += f" domain={family.domain}"
    if not family.tracked:
        head += " tracked=0"
    lines = [head]
    lines.extend(" ".join(str(int(b) + 1) for b in row) for row in family.maps)
    return "\n".join(lines) + "\n"


def _splitter_options(fields: list[str], path: Optional[Path]) -> dict:
    options: dict = {}
    for item in fields:
        key, sep, value = item.partition("=")
        if not sep or key not in ("domain", "tracked") or key in options:
            raise ParseError(f"unexpected splitter header field {item!r}", path, 1)
        try:
            number = int(value)
        except ValueError:
            raise ParseError(f"bad value in {item!r}", path, 1) from None
        if key == "tracked" and number not in (0, 1):
            raise ParseError(f"bad value in {item!r}", path, 1)
        options[key] = number if key == "domain" else bool(number)
    return options


def parse_splitter(text: str, path: Optional[Path] = None) -> SplitterFamily:
    """Read ``splitter <n> <k> <ell> <count> [domain=<d>] [tracked=0|1]`` and 1-based rows."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParseError("empty splitter file", path)
    head = lines[0].split()
    if len(head) < 5 or head[0] != "splitter":
        raise ParseError("expected 'splitter <n> <k> <ell> <count>'", path, 1)
    options = _splitter_options(head[5:], path)
    try:
        n, k, ell, count = (int(x) for x in head[1:5])
        rows = [[int(x) - 1 for x in line.split()] for line in lines[1:]]
    except ValueError as exc:
        raise ParseError(f"bad integer: {exc}", path) from None
    if len(rows) != count or any(len(row) != n for row in rows):
        raise ParseError(f"expected {count} rows of {n} block indices", path)
    maps = np.array(rows, dtype=np.int64).reshape(count, n)
    try:
        return SplitterFamily(n, k, ell, maps, **options)
    except UsageError as exc:
        raise ParseError(str(exc), path) from None


def format_universal(family: UniversalFamily) -> str:
    width = max(1, (family.u + 3) // 4)
    lines = [f"universal {family.u} {family.s} {len(family)}"]
    lines.extend(f"{mask:0{width}x}" for mask in family.sets)
    return "\n".join(lines) + "\n"


def parse_universal(text: str, path: Optional[Path] = None) -> UniversalFamily:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParseError("empty universal-family file", path)
    head = lines[0].split()
    if len(head) != 4 or head[0] != "universal":
        raise ParseError("expected 'universal <u> <s> <count>'", path, 1)
    try:
        u, s, count = (int(x) for x in head[1:])
        sets = tuple(int(line.strip(), 16) for line in lines[1:])
    except ValueError as exc:
        raise ParseError(f"bad value: {exc}", path) from None
    if len(sets) != count or any(mask < 0 or mask >> u for mask in sets):
        raise ParseError(f"expected {count} bitsets over [{u}]", path)
    return UniversalFamily(u, s, sets)


class FamilyCache:
    """Families on disk, one text file per parameter tuple.  Unreadable or mismatched entries are rebuilt."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)

    def _path(self, name: str) -> Path:
        return self.directory / f"{name}.txt"

    def _read(self, name: str) -> Optional[str]:
        path = self._path(name)
        try:
            if path.exists():
                return path.read_text(encoding="utf-8")
        except OSError as exc:
            logger.warning("family cache: cannot read %s: %s", path, exc)
        return None

    def _write(self, name: str, text: str) -> None:
        path = self._path(name)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(text, encoding="utf-8")
            tmp.replace(path)
        except OSError as exc:
            logger.warning("family cache: cannot write %s: %s", path, exc)

    def _load_splitter(self, name: str, n: int, k: int, ell: int, domain: Optional[int]) -> Optional[SplitterFamily]:
        text = self._read(name)
        if text is None:
            return None
        try:
            family = parse_splitter(text, self._path(name))
        except DynRepSetError as exc:
            logger.warning("family cache: %s", exc)
            return None
        if (family.n, family.k, family.ell, family.domain) != (n, k, ell, domain):
            logger.warning("family cache: %s holds a (%d,%d,%d) splitter, rebuilding",
                           self._path(name), family.n, family.k, family.ell)
            return None
        return family

    def outer(self, n: int, k: int, **kwargs) -> SplitterFamily:
        name = f"outer-{n}-{k}"
        family = self._load_splitter(name, n, k, k * k, None)
        if family is None:
            family = build_outer_splitter(n, k, **kwargs)
            self._write(name, format_splitter(family))
        return family

    def inner(self, u: int, k: int, s: int, *, domain: Optional[int] = None, **kwargs) -> SplitterFamily:
        if domain == u:
            domain = None
        name = f"inner-{u}-{k}-{s}" if domain is None else f"inner-{u}-{k}-{s}-{domain}"
        family = self._load_splitter(name, u, k, s, domain)
        if family is None:
            family = build_inner_splitter(u, k, s, domain=domain, **kwargs)
            self._write(name, format_splitter(family))
        return family

    def universal(self, u: int, s: int) -> UniversalFamily:
        name = f"universal-{u}-{s}"
        text = self._read(name)
        if text is not None:
            try:
                family = parse_universal(text, self._path(name))
            except DynRepSetError as exc:
                logger.warning("family cache: %s", exc)
            else:
                if (family.u, family.s) == (u, s):
                    return family
                logger.warning("family cache: %s holds a (%d,%d) family, rebuilding", self._path(name), family.u, family.s)
        family = build_universal_family(u, s)
        self._write(name, format_universal(family))
        return family
