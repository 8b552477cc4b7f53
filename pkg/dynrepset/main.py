import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Dict, List, Optional

from dynrepset import __description__, __version__
from dynrepset.core.factorization import DEFAULT_MAX_COLUMNS, build_context
from dynrepset.core.oracle import DEFAULT_ORACLE_BUDGET
from dynrepset.core.pseudorandom import (
    DEFAULT_TRACK_BUDGET,
    format_splitter,
    format_universal,
    verify_splitter,
    verify_universal,
)
from dynrepset.core.semiring import INFINITY, BooleanSemiring, make_semiring
from dynrepset.errors import EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, DynRepSetError, UsageError
from dynrepset.workers.bench import BENCH_HEADER, run_bench
from dynrepset.workers.circuit import brute_force_expand, monomial_sum, parse_circuit
from dynrepset.workers.kpath import brute_force_kpath, parse_graph, solve_kpath, solve_kpath_decision
from dynrepset.workers.models import RunConfig
from dynrepset.workers.selftest import MUTATIONS, run_selftest
from dynrepset.workers.util import (
    SETTING_TYPES,
    append_run_log,
    coerce_setting,
    family_cache,
    load_settings,
    make_console,
    save_settings,
    setup_logging,
)


logger = logging.getLogger("dynrepset")

DEFAULT_CIRCUIT_CAP = 2**40

# Built-in values for the keys a settings file may override.
DEFAULTS: Dict[str, Any] = {
    "threads": os.cpu_count() or 1,
    "cache_dir": ".dynrepset-cache",
    "budget": DEFAULT_ORACLE_BUDGET,
    "track_budget": DEFAULT_TRACK_BUDGET,
    "max_columns": DEFAULT_MAX_COLUMNS,
    "samples": 20,
    "seed": 1,
    "run_log": True,
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as exceptions instead of exiting."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("--cache-dir", type=Path, help="family cache directory (default: ./.dynrepset-cache)")
    common.add_argument("--no-cache", action="store_true", help="build families in memory only")
    common.add_argument("--no-run-log", action="store_true", help="do not append to the run log")
    common.add_argument("--budget", type=int, help="enumeration budget of oracle and family checks")
    common.add_argument("--track-budget", type=int, help="largest C(n,k) a splitter build tracks exactly")
    common.add_argument("--max-columns", type=int, help="ceiling on the rank r of a context")
    common.add_argument("--seed", type=int, help="seed for random instances")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="dynrepset", description=__description__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    kp = sub.add_parser("kpath", parents=[common], help="minimum-weight simple path on k vertices")
    kp.add_argument("--graph", type=Path, required=True, help="graph file ('p kpath <n> <m> <k>' format)")
    kp.add_argument("--k", type=int, help="path length in vertices (default: from the header)")
    kp.add_argument("--decision", action="store_true", help="only decide whether a k-path exists")
    kp.add_argument("--cap", type=int, help="min-plus cap (default: k times the largest weight)")
    kp.add_argument("--oracle-check", action="store_true", help="compare with a brute-force search")

    ci = sub.add_parser("circuit", parents=[common], help="degree-k multilinear coefficient sum of a skewed circuit")
    ci.add_argument("--file", type=Path, required=True, help="circuit file ('p circuit ...' format)")
    ci.add_argument("--k", type=int, help="monomial degree (default: from the header)")
    ci.add_argument("--semiring", choices=["boolean", "minplus"], default="minplus")
    ci.add_argument("--cap", type=int, help=f"min-plus cap (default: {DEFAULT_CIRCUIT_CAP})")
    ci.add_argument("--oracle-check", action="store_true", help="compare with full expansion")

    fa = sub.add_parser("families", parents=[common], help="build, verify and export pseudo-random families")
    fa.add_argument("--n", type=int, required=True)
    fa.add_argument("--k", type=int, required=True)
    fa.add_argument("--verify", action="store_true", help="check every family exhaustively")
    fa.add_argument("--write", type=Path, help="write the families in cache format to this file")

    st = sub.add_parser("selftest", parents=[common], help="oracle checks on small instances")
    st.add_argument("--max-n", type=int, default=10)
    st.add_argument("--max-k", type=int, default=4)
    st.add_argument("--samples", type=int, help="random instances per sweep unit")
    st.add_argument("--mutate", choices=MUTATIONS, help="inject a defect; its checks must FAIL")

    be = sub.add_parser("bench", parents=[common], help="timing grid, CSV on stdout")
    be.add_argument("--n", type=int, nargs="+", default=[25, 50, 100, 200], dest="ns")
    be.add_argument("--k", type=int, nargs="+", default=[4], dest="ks")

    co = sub.add_parser("config", parents=[common], help="show or persist settings")
    co.add_argument("--show", action="store_true", help="print the effective settings")
    co.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="persist an override")
    return parser


def _pick(args: argparse.Namespace, settings: Dict[str, Any], key: str) -> Any:
    value = getattr(args, key, None)
    if value is not None:
        return value
    return settings.get(key, DEFAULTS[key])


def make_config(args: argparse.Namespace, settings: Dict[str, Any]) -> RunConfig:
    config = RunConfig(
        command=args.command,
        threads=max(1, _pick(args, settings, "threads")),
        cache_dir=Path(_pick(args, settings, "cache_dir")),
        budget=_pick(args, settings, "budget"),
        track_budget=_pick(args, settings, "track_budget"),
        max_columns=_pick(args, settings, "max_columns"),
        seed=_pick(args, settings, "seed"),
        samples=_pick(args, settings, "samples"),
        verbosity=args.verbose,
        run_log=bool(settings.get("run_log", True)) and not args.no_run_log,
    )
    for name in ("n", "k", "cap", "decision", "oracle_check", "mutate", "max_n", "max_k", "ns", "ks"):
        if hasattr(args, name):
            setattr(config, {"ns": "bench_ns", "ks": "bench_ks"}.get(name, name), getattr(args, name))
    config.input_path = getattr(args, "graph", None) or getattr(args, "file", None)
    if args.command == "circuit":
        config.semiring = args.semiring
    if config.budget < 0 or config.track_budget < 0 or config.max_columns < 1:
        raise UsageError("budgets must be non-negative")
    return config


def _executor(config: RunConfig):
    if config.threads <= 1:
        return nullcontext(None)
    return ThreadPoolExecutor(max_workers=config.threads, thread_name_prefix="dynrepset")


def _solver_options(config: RunConfig, cache) -> Dict[str, Any]:
    return {"cache": cache, "track_budget": config.track_budget, "max_columns": config.max_columns}


def _format_answer(value) -> str:
    return "INF" if value == INFINITY else str(value)


def cmd_kpath(config: RunConfig, console, cache) -> int:
    g = parse_graph(config.input_path)
    k = config.k if config.k is not None else g.k
    if k is None:
        raise UsageError("no k given and the graph header has none")
    with _executor(config) as executor:
        if config.decision:
            found = solve_kpath_decision(g, k, executor=executor, **_solver_options(config, cache))
            answer = BooleanSemiring().element(found)
            console.print(f"answer {answer}")
        else:
            ctx = None
            if config.cap is not None and 1 < k <= g.n and g.edges:
                ctx = build_context(g.n, k, make_semiring("minplus", config.cap), **_solver_options(config, cache))
            value = solve_kpath(g, k, ctx=ctx, executor=executor, **_solver_options(config, cache))
            console.print(f"answer {_format_answer(value)}")
    if not config.oracle_check:
        return EXIT_OK
    expected = brute_force_kpath(g, k)
    if config.decision:
        expected_text, ok = str(int(expected != INFINITY)), found == (expected != INFINITY)
    else:
        expected_text, ok = _format_answer(expected), expected == value
    console.print(f"oracle {expected_text} {'match' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_circuit(config: RunConfig, console, cache) -> int:
    c = parse_circuit(config.input_path)
    k = config.k if config.k is not None else c.k
    if k is None:
        raise UsageError("no k given and the circuit header has none")
    if config.semiring == "boolean":
        semiring = make_semiring("boolean")
    else:
        semiring = make_semiring("minplus", config.cap if config.cap is not None else DEFAULT_CIRCUIT_CAP)
    with _executor(config) as executor:
        result = monomial_sum(c, k, semiring, executor=executor, **_solver_options(config, cache))
    console.print(f"answer {result}")
    if not config.oracle_check:
        return EXIT_OK
    expected = brute_force_expand(c, k, semiring)
    ok = expected == result
    console.print(f"oracle {expected} {'match' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_families(config: RunConfig, console, cache, verify: bool, write: Optional[Path]) -> int:
    ctx = build_context(config.n, config.k, BooleanSemiring(), **_solver_options(config, cache))
    families = {"outer": ctx.outer, "inner": ctx.inner}
    for name, family in families.items():
        console.print(f"{name} n={family.n} k={family.k} ell={family.ell} count={len(family)} "
                      f"tracked={'yes' if family.tracked else 'no'}")
    console.print(f"universal u={ctx.fam.u} s={ctx.fam.s} count={len(ctx.fam)}")
    console.print(" ".join(f"{key}={value}" for key, value in ctx.summary().items()))
    failed = False
    if verify:
        for name, family in families.items():
            verdict = verify_splitter(family, budget=config.budget)
            console.print(f"verify {name} {verdict.value}")
            failed |= verdict.value == "FAIL"
        verdict = verify_universal(ctx.fam, budget=config.budget)
        console.print(f"verify universal {verdict.value}")
        failed |= verdict.value == "FAIL"
    if write is not None:
        text = format_splitter(ctx.outer) + format_splitter(ctx.inner) + format_universal(ctx.fam)
        try:
            write.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {write}: {exc.strerror}") from None
        logger.info("families written to %s", write)
    return EXIT_MISMATCH if failed else EXIT_OK


def cmd_selftest(config: RunConfig, console, cache) -> int:
    results = run_selftest(config, cache, on_result=lambda result: console.print(result.line))
    counts = {verdict: sum(r.verdict == verdict for r in results) for verdict in ("PASS", "FAIL", "SKIP")}
    console.print(f"summary pass={counts['PASS']} fail={counts['FAIL']} skip={counts['SKIP']}")
    return EXIT_MISMATCH if counts["FAIL"] else EXIT_OK


def cmd_bench(config: RunConfig, console, cache) -> int:
    console.print(BENCH_HEADER)
    with _executor(config) as executor:
        run_bench(config.bench_ns, config.bench_ks, on_row=lambda row: console.print(row.line),
                  seed=config.seed, executor=executor, cache=cache,
                  track_budget=config.track_budget, max_columns=config.max_columns)
    return EXIT_OK


def cmd_config(args: argparse.Namespace, console, settings: Dict[str, Any]) -> int:
    updates: Dict[str, Any] = {}
    for item in args.set:
        key, sep, text = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in SETTING_TYPES:
            raise UsageError(f"expected KEY=VALUE with KEY one of {', '.join(sorted(SETTING_TYPES))}")
        try:
            updates[key] = coerce_setting(key, text)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if updates:
        if not save_settings(updates):
            raise UsageError("cannot write the settings file")
        settings = {**settings, **updates}
    if args.show or not updates:
        for key in sorted(DEFAULTS):
            console.print(f"{key} {settings.get(key, DEFAULTS[key])}")
    return EXIT_OK


def _run_params(config: RunConfig) -> Dict[str, Any]:
    params = {"input": config.input_path, "k": config.k, "threads": config.threads, "seed": config.seed}
    if config.command == "selftest":
        params.update(max_n=config.max_n, max_k=config.max_k, samples=config.samples, mutate=config.mutate)
    return {key: value for key, value in params.items() if value is not None}


def main(argv: Optional[List[str]] = None) -> int:
    console = make_console()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"dynrepset: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)

    setup_logging(args.verbose)
    settings = load_settings()
    started = time.perf_counter()
    outcome = "ok"
    config: Optional[RunConfig] = None
    try:
        if args.command == "config":
            return cmd_config(args, console, settings)
        config = make_config(args, settings)
        cache = family_cache(config.cache_dir, enabled=not args.no_cache)
        if args.command == "kpath":
            code = cmd_kpath(config, console, cache)
        elif args.command == "circuit":
            code = cmd_circuit(config, console, cache)
        elif args.command == "families":
            code = cmd_families(config, console, cache, args.verify, args.write)
        elif args.command == "selftest":
            code = cmd_selftest(config, console, cache)
        else:
            code = cmd_bench(config, console, cache)
        outcome = "ok" if code == EXIT_OK else "mismatch"
        return code
    except DynRepSetError as exc:
        logger.error("%s", exc)
        outcome = type(exc).__name__
        return exc.exit_code
    finally:
        if config is not None and config.run_log:
            append_run_log(args.command, _run_params(config), outcome, (time.perf_counter() - started) * 1000)


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
