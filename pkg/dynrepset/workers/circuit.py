from __future__ import annotations

import logging
from concurrent.futures import Executor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from dynrepset.core.factorization import MAX_K, DEFAULT_MAX_COLUMNS, FactorizationContext, build_context
from dynrepset.core.pseudorandom import DEFAULT_TRACK_BUDGET, FamilyCache
from dynrepset.core.repset import Representation, add_reps, convolve_set, init, query, scale_left, scale_right, zeros
from dynrepset.core.semiring import INFINITY, Semiring, SemiringElement
from dynrepset.errors import ParseError, ResourceError, SkewnessError, UsageError, ValidationError

from .models import AddGate, ConstGate, Gate, MulGate, SkewedCircuit, VarGate, operands_of


logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_VARS = 16

Monomials = Optional[List[Tuple[frozenset, SemiringElement]]]


def _const_value(token: str):
    if token.upper() in ("INF", "INFINITY"):
        return INFINITY
    value = int(token)
    if value < 0:
        raise ValueError(token)
    return value


def parse_circuit_text(text: str, path: Optional[Path] = None) -> SkewedCircuit:
    header: Optional[Tuple[int, int, int, int]] = None
    gates: Dict[int, Gate] = {}
    output: Optional[int] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if fields[0] == "p":
                if header is not None or len(fields) != 6 or fields[1] != "circuit":
                    raise ParseError("expected a single 'p circuit <ngates> <nvars> <d> <k>' header", path, lineno)
                header = tuple(int(x) for x in fields[2:])
                if header[1] < 0 or header[2] < 1 or header[3] < 0:
                    raise ParseError("header values out of range", path, lineno)
            elif fields[0] == "g":
                if header is None:
                    raise ParseError("gate before header", path, lineno)
                if len(fields) < 3:
                    raise ParseError("expected 'g <id> <kind> ...'", path, lineno)
                gid, kind, args = int(fields[1]), fields[2], fields[3:]
                if gid in gates:
                    raise ParseError(f"duplicate gate id {gid}", path, lineno)
                if kind == "var":
                    if len(args) != 1:
                        raise ParseError("expected 'var <i>'", path, lineno)
                    var = int(args[0])
                    if not 1 <= var <= header[1]:
                        raise ParseError(f"variable {var} outside [1, {header[1]}]", path, lineno)
                    gates[gid] = VarGate(gid, var)
                elif kind == "const":
                    if len(args) != 1:
                        raise ParseError("expected 'const <value|INF>'", path, lineno)
                    gates[gid] = ConstGate(gid, _const_value(args[0]))
                elif kind == "add":
                    if not args:
                        raise ParseError("add gate without operands", path, lineno)
                    gates[gid] = AddGate(gid, tuple(int(x) for x in args))
                elif kind == "mul":
                    if len(args) != 2:
                        raise ValidationError(f"line {lineno}: mul gate {gid} has {len(args)} operands, expected 2")
                    gates[gid] = MulGate(gid, int(args[0]), int(args[1]))
                else:
                    raise ParseError(f"unknown gate kind {kind!r}", path, lineno)
            elif fields[0] == "output":
                if len(fields) != 2 or output is not None:
                    raise ParseError("expected a single 'output <id>'", path, lineno)
                output = int(fields[1])
            else:
                raise ParseError(f"unknown line type {fields[0]!r}", path, lineno)
        except ValueError:
            raise ParseError(f"bad value in {line!r}", path, lineno) from None
    if header is None:
        raise ParseError("missing 'p circuit' header", path)
    ngates, n_vars, d, k = header
    if ngates != len(gates):
        logger.warning("header announces %d gates, file has %d", ngates, len(gates))
    return build_circuit(list(gates.values()), n_vars=n_vars, d=d, k=k or None, output=output)


def parse_circuit(path: Path) -> SkewedCircuit:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_circuit_text(text, Path(path))


def format_circuit(c: SkewedCircuit) -> str:
    lines = [f"p circuit {len(c.gates)} {c.n_vars} {c.d} {c.k or 0}"]
    for gate in c.gates:
        if isinstance(gate, VarGate):
            lines.append(f"g {gate.id} var {gate.var}")
        elif isinstance(gate, ConstGate):
            lines.append(f"g {gate.id} const {gate.text}")
        elif isinstance(gate, AddGate):
            lines.append(f"g {gate.id} add {' '.join(map(str, gate.operands))}")
        else:
            lines.append(f"g {gate.id} mul {gate.left} {gate.right}")
    lines.append(f"output {c.output}")
    return "\n".join(lines) + "\n"


def build_circuit(
    gates: Sequence[Gate],
    *,
    n_vars: int,
    d: int,
    k: Optional[int] = None,
    output: Optional[int] = None,
) -> SkewedCircuit:
    """Validate the gate DAG and order it topologically.

    With ``output`` given, gates that do not feed it are dropped first.
    """
    by_id = {g.id: g for g in gates}
    graph = nx.DiGraph()
    graph.add_nodes_from(by_id)
    for gate in gates:
        if isinstance(gate, VarGate) and not 1 <= gate.var <= n_vars:
            raise ValidationError(f"gate {gate.id}: variable {gate.var} outside [1, {n_vars}]")
        for op in operands_of(gate):
            if op not in by_id:
                raise ValidationError(f"gate {gate.id} references unknown gate {op}")
            graph.add_edge(op, gate.id)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise ValidationError(f"circuit has a cycle through gates {[a for a, _ in cycle]}")
    if output is not None:
        if output not in by_id:
            raise ValidationError(f"output gate {output} does not exist")
        graph = graph.subgraph(nx.ancestors(graph, output) | {output}).copy()
    sinks = [v for v in graph.nodes if graph.out_degree(v) == 0]
    if len(sinks) != 1:
        raise ValidationError(f"circuit must have a unique sink, found {len(sinks)}: {sorted(sinks)[:10]}")
    order = list(nx.lexicographical_topological_sort(graph))
    return SkewedCircuit(gates=[by_id[g] for g in order], output=sinks[0], d=d, n_vars=n_vars, k=k)


def _merge(terms, semiring: Semiring) -> Dict[frozenset, SemiringElement]:
    out: Dict[frozenset, SemiringElement] = {}
    for variables, coef in terms:
        out[variables] = out[variables] + coef if variables in out else coef
    return {v: c for v, c in out.items() if not c.is_zero}


def _leaf(gate: Gate, semiring: Semiring) -> Dict[frozenset, SemiringElement]:
    if isinstance(gate, VarGate):
        return {frozenset({gate.var}): semiring.one}
    value = semiring.element(gate.value)
    return {} if value.is_zero else {frozenset(): value}


def _product(left, right, semiring: Semiring) -> Dict[frozenset, SemiringElement]:
    # products repeating a variable are not multilinear and are dropped
    return _merge(((a | b, x * y) for a, x in left.items() for b, y in right.items() if not a & b), semiring)


def compute_monomial_lists(c: SkewedCircuit, semiring: Semiring) -> Dict[int, Monomials]:
    """Q_g for every gate: its multilinear monomials when there are at most d of them, else None."""
    q: Dict[int, Optional[Dict[frozenset, SemiringElement]]] = {}
    for gate in c.gates:
        if isinstance(gate, (VarGate, ConstGate)):
            table = _leaf(gate, semiring)
        elif isinstance(gate, AddGate):
            parts = [q[op] for op in gate.operands]
            table = None
            if all(p is not None for p in parts):
                table = _merge(((v, x) for p in parts for v, x in p.items()), semiring)
        else:
            left, right = q[gate.left], q[gate.right]
            if left is None and right is None:
                raise SkewnessError(gate.id)
            table = _product(left, right, semiring) if left is not None and right is not None else None
        if table is not None and len(table) > c.d:
            table = None
        q[gate.id] = table
    return {gid: None if t is None else sorted(t.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
            for gid, t in q.items()}


def _consumers(c: SkewedCircuit) -> Dict[int, int]:
    count = {g.id: 0 for g in c.gates}
    for gate in c.gates:
        for op in set(operands_of(gate)):
            count[op] += 1
    return count


def monomial_sum(
    c: SkewedCircuit,
    k: int,
    semiring: Semiring,
    *,
    ctx: Optional[FactorizationContext] = None,
    cache: Optional[FamilyCache] = None,
    executor: Optional[Executor] = None,
    track_budget: int = DEFAULT_TRACK_BUDGET,
    max_columns: int = DEFAULT_MAX_COLUMNS,
) -> SemiringElement:
    """Sum of the coefficients of the multilinear degree-k monomials of the output polynomial."""
    if not 1 <= k <= c.n_vars:
        raise UsageError(f"need 1 <= k <= n_vars, got k={k} n_vars={c.n_vars}")
    if k > MAX_K:
        raise ResourceError(f"k={k} exceeds the supported maximum {MAX_K}")
    q = compute_monomial_lists(c, semiring)
    if ctx is None:
        ctx = build_context(c.n_vars, k, semiring, cache=cache, track_budget=track_budget, max_columns=max_columns)
    elif ctx.semiring != semiring or ctx.n != c.n_vars or ctx.k_user != k:
        raise UsageError("context does not fit this circuit")
    start = init(ctx)
    remaining = _consumers(c)
    vectors: Dict[int, List[Representation]] = {}

    def small(monomials, p: int) -> Representation:
        acc = zeros(ctx)
        for variables, coef in monomials:
            if len(variables) == p:
                acc = add_reps(acc, scale_left(coef, convolve_set(ctx, start, sorted(variables), executor=executor)))
        return acc

    for gate in c.gates:
        mono = q[gate.id]
        if mono is not None:
            out = [small(mono, p) for p in range(k + 1)]
        elif isinstance(gate, AddGate):
            out = []
            for p in range(k + 1):
                acc = zeros(ctx)
                for op in gate.operands:
                    acc = add_reps(acc, vectors[op][p])
                out.append(acc)
        else:
            assert isinstance(gate, MulGate)
            left_small = q[gate.left] is not None
            small_mono = q[gate.left] if left_small else q[gate.right]
            big = vectors[gate.right] if left_small else vectors[gate.left]
            out = []
            for p in range(k + 1):
                acc = zeros(ctx)
                for variables, coef in small_mono:
                    z = len(variables)
                    if z > p or big[p - z].is_zero():
                        continue
                    moved = convolve_set(ctx, big[p - z], sorted(variables), executor=executor)
                    term = scale_left(coef, moved) if left_small else scale_right(moved, coef)
                    acc = add_reps(acc, term)
                out.append(acc)
        vectors[gate.id] = out
        for op in set(operands_of(gate)):
            remaining[op] -= 1
            if remaining[op] == 0 and op != c.output:
                del vectors[op]
    return query(ctx, vectors[c.output][k], ())


def brute_force_expand(
    c: SkewedCircuit,
    k: int,
    semiring: Semiring,
    *,
    max_vars: int = BRUTE_FORCE_MAX_VARS,
) -> SemiringElement:
    """Expand every gate into its multilinear coefficient table and sum the degree-k part."""
    if c.n_vars > max_vars:
        raise ResourceError(f"brute force refuses n_vars={c.n_vars} (limit {max_vars})")
    tables: Dict[int, Dict[frozenset, SemiringElement]] = {}
    for gate in c.gates:
        if isinstance(gate, (VarGate, ConstGate)):
            table = _leaf(gate, semiring)
        elif isinstance(gate, AddGate):
            table = _merge(((v, x) for op in gate.operands for v, x in tables[op].items()), semiring)
        else:
            table = _product(tables[gate.left], tables[gate.right], semiring)
        # sets only grow under products, so terms above degree k never come back
        tables[gate.id] = {v: x for v, x in table.items() if len(v) <= k}
    acc = semiring.zero
    for variables, coef in tables[c.output].items():
        if len(variables) == k:
            acc = acc + coef
    return acc


def random_skewed_circuit(
    n_vars: int,
    n_gates: int,
    d: int,
    semiring: Semiring,
    seed: int = 0,
    *,
    attempts: int = 100,
) -> SkewedCircuit:
    """A random d-skewed circuit with at most n_gates gates and a unique sink."""
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        gates: List[Gate] = []
        for gid in range(1, n_gates):
            roll = rng.random()
            if gid <= 2 or roll < 0.3:
                if rng.random() < 0.8:
                    gates.append(VarGate(gid, int(rng.integers(1, n_vars + 1))))
                elif semiring.kind == "boolean":
                    gates.append(ConstGate(gid, int(rng.random() < 0.9)))
                else:
                    gates.append(ConstGate(gid, int(rng.integers(0, 10))))
            elif roll < 0.6:
                fan_in = int(rng.integers(1, min(3, gid - 1) + 1))
                ops = rng.choice(np.arange(1, gid), size=fan_in, replace=False)
                gates.append(AddGate(gid, tuple(int(x) for x in ops)))
            else:
                left, right = (int(x) for x in rng.integers(1, gid, size=2))
                gates.append(MulGate(gid, left, right))
        used = {op for g in gates for op in operands_of(g)}
        sinks = [g.id for g in gates if g.id not in used]
        gates.append(AddGate(n_gates, tuple(sinks)))
        circuit = build_circuit(gates, n_vars=n_vars, d=d)
        try:
            compute_monomial_lists(circuit, semiring)
        except SkewnessError:
            continue
        return circuit
    raise UsageError(f"no {d}-skewed circuit found in {attempts} attempts")
