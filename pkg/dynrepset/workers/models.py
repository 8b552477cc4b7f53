from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union


Number = Union[int, float]


@dataclass
class WeightedDigraph:
    n: int
    edges: List[Tuple[int, int, int]]
    k: Optional[int] = None  # from the file header, if any

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_weight(self) -> int:
        return max((w for _, _, w in self.edges), default=0)

    def in_edges(self) -> Dict[int, List[Tuple[int, int]]]:
        """target -> [(source, weight)], parallel edges merged to their minimum weight."""
        best: Dict[Tuple[int, int], int] = {}
        for i, j, w in self.edges:
            if (i, j) not in best or w < best[(i, j)]:
                best[(i, j)] = w
        out: Dict[int, List[Tuple[int, int]]] = {t: [] for t in range(1, self.n + 1)}
        for (i, j), w in sorted(best.items()):
            out[j].append((i, w))
        return out


@dataclass(frozen=True)
class VarGate:
    id: int
    var: int


@dataclass(frozen=True)
class ConstGate:
    id: int
    value: Number  # math.inf for INF; encoded into the evaluation semiring later

    @property
    def text(self) -> str:
        return "INF" if isinstance(self.value, float) and math.isinf(self.value) else str(self.value)


@dataclass(frozen=True)
class AddGate:
    id: int
    operands: Tuple[int, ...]


@dataclass(frozen=True)
class MulGate:
    id: int
    left: int
    right: int


Gate = Union[VarGate, ConstGate, AddGate, MulGate]


def operands_of(gate: Gate) -> Tuple[int, ...]:
    if isinstance(gate, AddGate):
        return gate.operands
    if isinstance(gate, MulGate):
        return (gate.left, gate.right)
    return ()


@dataclass
class SkewedCircuit:
    gates: List[Gate]  # topological order
    output: int
    d: int
    n_vars: int
    k: Optional[int] = None

    def by_id(self) -> Dict[int, Gate]:
        return {g.id: g for g in self.gates}


@dataclass
class RunConfig:
    command: str
    input_path: Optional[Path] = None
    k: Optional[int] = None
    n: Optional[int] = None
    semiring: str = "minplus"
    cap: Optional[int] = None
    seed: int = 1
    budget: int = 10**7
    track_budget: int = 100_000_000
    max_columns: int = 2_000_000
    threads: int = 1
    cache_dir: Optional[Path] = None
    verbosity: int = 0
    run_log: bool = True
    decision: bool = False
    oracle_check: bool = False
    mutate: Optional[str] = None
    max_n: int = 8
    max_k: int = 4
    samples: int = 20
    bench_ns: List[int] = field(default_factory=lambda: [25, 50, 100, 200])
    bench_ks: List[int] = field(default_factory=lambda: [4])


@dataclass
class CheckResult:
    name: str
    params: str
    verdict: str  # PASS | FAIL | SKIP
    elapsed_ms: float = 0.0

    @property
    def line(self) -> str:
        return f"{self.name} {self.params} {self.verdict}"
