from __future__ import annotations

import logging
from concurrent.futures import Executor
from functools import reduce
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from dynrepset.core.factorization import MAX_K, DEFAULT_MAX_COLUMNS, FactorizationContext, build_context
from dynrepset.core.pseudorandom import DEFAULT_TRACK_BUDGET, FamilyCache
from dynrepset.core.repset import Representation, add_reps, convolve, init, query, scale_left, zeros
from dynrepset.core.semiring import INFINITY, MAX_CAP, BooleanSemiring, CappedMinPlus, Semiring
from dynrepset.errors import ParseError, ResourceError, UsageError

from .models import AddGate, ConstGate, Gate, MulGate, SkewedCircuit, VarGate, WeightedDigraph


logger = logging.getLogger(__name__)

# k * w must stay a valid cap for every supported k.
MAX_WEIGHT = MAX_CAP // MAX_K
BRUTE_FORCE_MAX_N = 14
BRUTE_FORCE_MAX_K = 6

Answer = Union[int, float]


def parse_graph_text(text: str, path: Optional[Path] = None) -> WeightedDigraph:
    header: Optional[Tuple[int, int, int]] = None
    edges: List[Tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if fields[0] == "p":
                if header is not None or len(fields) != 5 or fields[1] != "kpath":
                    raise ParseError("expected a single 'p kpath <n> <m> <k>' header", path, lineno)
                header = (int(fields[2]), int(fields[3]), int(fields[4]))
                if header[0] < 1 or header[1] < 0 or header[2] < 1:
                    raise ParseError("header values out of range", path, lineno)
            elif fields[0] == "e":
                if header is None:
                    raise ParseError("edge before header", path, lineno)
                if len(fields) != 4:
                    raise ParseError("expected 'e <i> <j> <w>'", path, lineno)
                i, j, w = int(fields[1]), int(fields[2]), int(fields[3])
                if not (1 <= i <= header[0] and 1 <= j <= header[0]):
                    raise ParseError(f"vertex out of range [1, {header[0]}]", path, lineno)
                if not 0 <= w <= MAX_WEIGHT:
                    raise ParseError(f"weight {w} outside [0, {MAX_WEIGHT}]", path, lineno)
                edges.append((i, j, w))
            else:
                raise ParseError(f"unknown line type {fields[0]!r}", path, lineno)
        except ValueError:
            raise ParseError(f"bad integer in {line!r}", path, lineno) from None
    if header is None:
        raise ParseError("missing 'p kpath' header", path)
    n, m, k = header
    if m != len(edges):
        logger.warning("header announces %d edges, file has %d", m, len(edges))
    return WeightedDigraph(n=n, edges=edges, k=k)


def parse_graph(path: Path) -> WeightedDigraph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_graph_text(text, Path(path))


def format_graph(g: WeightedDigraph, k: Optional[int] = None) -> str:
    lines = [f"p kpath {g.n} {g.m} {k or g.k or 1}"]
    lines.extend(f"e {i} {j} {w}" for i, j, w in g.edges)
    return "\n".join(lines) + "\n"


def random_digraph(n: int, m: int, max_weight: int = 9, seed: int = 0) -> WeightedDigraph:
    """m edges drawn uniformly (self-loops and parallel edges allowed), weights in [0, max_weight]."""
    rng = np.random.default_rng(seed)
    sources = rng.integers(1, n + 1, size=m)
    targets = rng.integers(1, n + 1, size=m)
    weights = rng.integers(0, max_weight + 1, size=m)
    edges = [(int(i), int(j), int(w)) for i, j, w in zip(sources, targets, weights)]
    return WeightedDigraph(n=n, edges=edges)


def kpath_context(
    g: WeightedDigraph,
    k: int,
    semiring: Optional[Semiring] = None,
    *,
    cache: Optional[FamilyCache] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_columns: int = DEFAULT_MAX_COLUMNS,
) -> FactorizationContext:
    """Context over capped min-plus with cap k·max w unless another semiring is given."""
    if semiring is None:
        if k * g.max_weight > MAX_CAP:
            raise UsageError(f"k * max weight = {k * g.max_weight} exceeds the largest cap {MAX_CAP}")
        semiring = CappedMinPlus(cap=k * g.max_weight)
    return build_context(g.n, k, semiring, cache=cache, track_budget=track_budget, max_columns=max_columns)


def _layered_dp(ctx: FactorizationContext, g: WeightedDigraph, k: int,
                executor: Optional[Executor]) -> Representation:
    semiring = ctx.semiring
    incoming = {t: [(u, semiring.element(w) if semiring.kind == "minplus" else semiring.one)
                    for u, w in pairs] for t, pairs in g.in_edges().items()}
    start = init(ctx)
    vertices = list(range(1, g.n + 1))
    layer: Dict[int, Representation] = {t: convolve(ctx, start, t) for t in vertices}

    for p in range(2, k + 1):
        previous = layer

        def extend(t: int) -> Representation:
            acc = zeros(ctx)
            for u, w in incoming[t]:
                if previous[u].is_zero():
                    continue
                acc = add_reps(acc, scale_left(w, convolve(ctx, previous[u], t)))
            return acc

        if executor is None:
            layer = {t: extend(t) for t in vertices}
        else:
            layer = dict(zip(vertices, executor.map(extend, vertices)))
        logger.debug("layer %d: %d live vertices", p, sum(not b.is_zero() for b in layer.values()))
    return reduce(add_reps, layer.values())


def _prepare(g: WeightedDigraph, k: int) -> Optional[Answer]:
    """Answers that need no context, or None."""
    if k < 1:
        raise UsageError(f"k must be positive, got {k}")
    if k > g.n:
        return INFINITY
    if k > MAX_K:
        raise ResourceError(f"k={k} exceeds the supported maximum {MAX_K}")
    if k == 1:
        return 0
    if not g.edges:
        return INFINITY
    return None


def solve_kpath(
    g: WeightedDigraph,
    k: int,
    *,
    ctx: Optional[FactorizationContext] = None,
    cache: Optional[FamilyCache] = None,
    executor: Optional[Executor] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_columns: int = DEFAULT_MAX_COLUMNS,
) -> Answer:
    """Minimum weight of a simple path on k vertices, or INFINITY."""
    direct = _prepare(g, k)
    if direct is not None:
        return direct
    if ctx is None:
        ctx = kpath_context(g, k, cache=cache, track_budget=track_budget, max_columns=max_columns)
    elif ctx.semiring.kind != "minplus" or ctx.semiring.cap < k * g.max_weight or ctx.k_user != k:
        raise UsageError("context does not fit this instance")
    total = _layered_dp(ctx, g, k, executor)
    return query(ctx, total, ()).value


def solve_kpath_decision(
    g: WeightedDigraph,
    k: int,
    *,
    ctx: Optional[FactorizationContext] = None,
    cache: Optional[FamilyCache] = None,
    executor: Optional[Executor] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_columns: int = DEFAULT_MAX_COLUMNS,
) -> bool:
    direct = _prepare(g, k)
    if direct is not None:
        return direct != INFINITY
    if ctx is None:
        ctx = kpath_context(g, k, BooleanSemiring(), cache=cache, track_budget=track_budget, max_columns=max_columns)
    elif ctx.semiring.kind != "boolean" or ctx.k_user != k:
        raise UsageError("context does not fit this instance")
    total = _layered_dp(ctx, g, k, executor)
    return bool(query(ctx, total, ()).value)


def brute_force_kpath(
    g: WeightedDigraph,
    k: int,
    *,
    max_n: int = BRUTE_FORCE_MAX_N,
    max_k: int = BRUTE_FORCE_MAX_K,
) -> Answer:
    """DFS over simple vertex sequences of length k."""
    if k < 1:
        raise UsageError(f"k must be positive, got {k}")
    if k > g.n:
        return INFINITY
    if g.n > max_n or k > max_k:
        raise ResourceError(f"brute force refuses n={g.n} k={k} (limits n<={max_n} k<={max_k})")
    out: Dict[int, List[Tuple[int, int]]] = {v: [] for v in range(1, g.n + 1)}
    for t, pairs in g.in_edges().items():
        for u, w in pairs:
            out[u].append((t, w))
    best = INFINITY
    visited = [False] * (g.n + 1)

    def dfs(v: int, length: int, weight: int) -> None:
        nonlocal best
        if weight >= best:
            return
        if length == k:
            best = weight
            return
        for t, w in out[v]:
            if not visited[t]:
                visited[t] = True
                dfs(t, length + 1, weight + w)
                visited[t] = False

    for v in range(1, g.n + 1):
        visited[v] = True
        dfs(v, 1, 0)
        visited[v] = False
    return best


def kpath_as_circuit(g: WeightedDigraph, k: int) -> SkewedCircuit:
    """Layered circuit whose degree-k multilinear part is the k-path polynomial.

    y[t,1] = x_t and y[t,p] = Σ_u y[u,p-1]·(w_{u,t}·x_t); the right factor of
    every product is a single monomial, so the circuit is 1-skewed.  Without
    any k-walk the output is x_1·x_1, whose multilinear part is empty in every
    semiring.
    """
    from .circuit import build_circuit

    gates: List[Gate] = []
    next_id = 1

    def emit(make) -> int:
        nonlocal next_id
        gates.append(make(next_id))
        next_id += 1
        return next_id - 1

    var = {t: emit(lambda i, t=t: VarGate(i, t)) for t in range(1, g.n + 1)}
    incoming = g.in_edges()
    y = dict(var)
    for _ in range(2, k + 1):
        layer: Dict[int, int] = {}
        for t in range(1, g.n + 1):
            terms = []
            for u, w in incoming[t]:
                if u not in y:
                    continue
                const = emit(lambda i, w=w: ConstGate(i, w))
                weighted = emit(lambda i, c=const, t=t: MulGate(i, c, var[t]))
                terms.append(emit(lambda i, u=u, r=weighted: MulGate(i, y[u], r)))
            if terms:
                layer[t] = emit(lambda i, ops=tuple(terms): AddGate(i, ops))
        y = layer
    if y:
        sink = emit(lambda i: AddGate(i, tuple(y[t] for t in sorted(y))))
    else:
        sink = emit(lambda i: MulGate(i, var[1], var[1]))
    return build_circuit(gates, n_vars=g.n, d=1, k=k, output=sink)
