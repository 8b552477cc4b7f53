"""dynrepset - dynamic representative sets over idempotent semirings."""

__version__ = "0.1.0"
__author__ = "dynrepset developers"
__description__ = "Dynamic representative sets, k-path and skewed-circuit solvers with brute-force oracles"
