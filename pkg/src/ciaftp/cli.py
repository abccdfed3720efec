"""Command-line front end.

Four subcommands over a shared flag set:

* ``sample``   - N independent exact draws, CSV/JSON rows
* ``validate`` - statistical comparison against the exact oracle, JSON
* ``bench``    - adaptive engine vs. the extended-chain baseline, CSV
* ``inspect``  - static views: dictionary/closure/coefficient tables, or
  the slice and interval layout of one uniform draw

All output is deterministic for a fixed (config, seed) once ``--no-timing``
zeroes the wall-clock fields; every header records the kernel digest, the
RNG algorithm, and the seed actually used.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import secrets
import sys
from typing import List, Optional, Sequence

from . import engine, oracle
from .engine import RNG_ALGORITHM, RngStream, RunRow
from .errors import BudgetError, CiaftpError, KernelSpecError
from .kernels import (
    RenewalSqrtKernel,
    expected_depth_bound,
    kernel_spec_digest,
    load_kernel,
)
from .tries import prefix_closure
from .update_rule import build_slice, interval_table

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ciaftp",
        description="Exact sampling from stationary laws of variable-length "
        "and infinite-memory Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, runs_default: int = 1) -> None:
        p.add_argument("--kernel", required=True, help="kernel spec JSON path")
        p.add_argument("--length", type=int, default=1, metavar="L")
        p.add_argument("--runs", type=int, default=runs_default, metavar="N")
        p.add_argument("--seed", type=int, default=None, metavar="S")
        p.add_argument("--max-iter", type=int, default=engine.DEFAULT_MAX_ITER)
        p.add_argument("--max-depth", type=int, default=engine.DEFAULT_MAX_DEPTH)
        p.add_argument("--max-nodes", type=int, default=engine.DEFAULT_MAX_NODES)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--no-timing", action="store_true", help="zero wall-clock fields")

    p_sample = sub.add_parser("sample", help="draw exact stationary windows")
    common(p_sample, runs_default=1)
    p_sample.add_argument("--trace", default=None, metavar="PATH",
                          help="write per-iteration records to PATH (CSV)")

    p_validate = sub.add_parser("validate", help="compare sample law to the exact oracle")
    common(p_validate, runs_default=10**4)

    p_bench = sub.add_parser("bench", help="adaptive engine vs. extended-chain baseline")
    common(p_bench, runs_default=100)

    p_inspect = sub.add_parser("inspect", help="static kernel / slice views")
    common(p_inspect)
    p_inspect.add_argument("--u", type=float, default=None,
                           help="inspect the slice of this uniform draw")
    p_inspect.add_argument("--context", default=None,
                           help="context word for the interval table (with --u)")
    return parser


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CIAFTP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CiaftpError(f"CIAFTP_SEED={env!r} is not an integer") from None
    seed = secrets.randbits(32)
    print(f"ciaftp: seed not given; using OS-entropy seed {seed}", file=sys.stderr)
    return seed


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _header_lines(args: argparse.Namespace, seed: int, extra: Sequence[str] = ()) -> List[str]:
    lines = [
        f"# ciaftp {args.command}",
        f"# kernel_sha256={kernel_spec_digest(args.kernel)}",
        f"# rng={RNG_ALGORITHM}",
        f"# seed={seed}",
        f"# length={args.length} runs={args.runs}",
        f"# max_iter={args.max_iter} max_depth={args.max_depth} max_nodes={args.max_nodes}",
    ]
    lines.extend(extra)
    return lines


def _run_rows(kernel, args, seed: int, algorithm: str) -> List[RunRow]:
    """Batch runs, optionally split across processes; rows ordered by id."""
    n = args.runs
    jobs = max(1, args.jobs)
    kwargs = dict(
        algorithm=algorithm,
        max_iter=args.max_iter,
        max_depth=args.max_depth,
        max_nodes=args.max_nodes,
        timing=not args.no_timing,
    )
    if jobs == 1 or n < 2 * jobs:
        return engine.run_many(kernel, args.length, seed, 0, n, **kwargs)
    import concurrent.futures

    bounds = [(i * n) // jobs for i in range(jobs + 1)]
    chunks = [(s, e - s) for s, e in zip(bounds, bounds[1:]) if e > s]
    rows: List[RunRow] = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [
            pool.submit(engine.run_many, kernel, args.length, seed, start, count, **kwargs)
            for start, count in chunks
        ]
        for fut in futs:
            rows.extend(fut.result())
    rows.sort(key=lambda r: r.run_id)
    return rows


def _row_dicts(kernel, rows: List[RunRow]) -> List[dict]:
    fmt = kernel.alphabet.format_word
    return [
        {
            "run_id": r.run_id,
            "sample": fmt(r.sample) if r.sample is not None else "",
            "tau": "" if r.tau is None else r.tau,
            "iterations": r.iterations,
            "node_touches": r.node_touches,
            "wall_ns": r.wall_ns,
            "error": r.error or "",
        }
        for r in rows
    ]


def _csv_block(fieldnames: Sequence[str], dicts: List[dict], header: Sequence[str]) -> str:
    import csv

    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    writer.writerows(dicts)
    return buf.getvalue()


def cmd_sample(args: argparse.Namespace) -> int:
    kernel = load_kernel(args.kernel)
    seed = _resolve_seed(args)
    if args.trace is not None:
        return _sample_with_trace(kernel, args, seed)
    rows = _run_rows(kernel, args, seed, "ciaftp")
    dicts = _row_dicts(kernel, rows)
    fields = ("run_id", "sample", "tau", "iterations", "node_touches", "wall_ns", "error")
    if args.format == "csv":
        _emit(_csv_block(fields, dicts, _header_lines(args, seed)), args.out)
    else:
        _emit(
            json.dumps(
                {"meta": _meta_dict(args, seed), "rows": dicts}, indent=2, sort_keys=True
            )
            + "\n",
            args.out,
        )
    failed = [r for r in rows if r.error is not None]
    for r in failed:
        print(f"ciaftp: error: {r.error}: run {r.run_id} exhausted its budget", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def _sample_with_trace(kernel, args, seed: int) -> int:
    """Sequential sampling that also writes per-iteration records."""
    import csv

    rows: List[RunRow] = []
    trace_buf = io.StringIO()
    writer = csv.writer(trace_buf, lineterminator="\n")
    writer.writerow(("run_id", "t", "leaf_count", "depth", "node_touches"))
    for idx in range(args.runs):
        rng = RngStream(seed + idx)
        try:
            result = engine.run(
                kernel,
                args.length,
                rng,
                max_iter=args.max_iter,
                max_depth=args.max_depth,
                max_nodes=args.max_nodes,
                trace=True,
            )
        except BudgetError as exc:
            d = exc.diagnostics
            rows.append(
                RunRow(idx, None, None, d.iterations if d else 0,
                       d.node_touches if d else 0, 0, exc.code)
            )
            if d is not None and d.records:
                for rec in d.records:
                    writer.writerow((idx, rec.t, rec.leaf_count, rec.depth, rec.node_touches))
            continue
        d = result.diagnostics
        rows.append(
            RunRow(idx, result.sample, d.tau, d.iterations, d.node_touches,
                   0 if args.no_timing else d.wall_ns)
        )
        for rec in d.records or ():
            writer.writerow((idx, rec.t, rec.leaf_count, rec.depth, rec.node_touches))
    with open(args.trace, "w", encoding="utf-8") as fh:
        fh.write(trace_buf.getvalue())
    dicts = _row_dicts(kernel, rows)
    fields = ("run_id", "sample", "tau", "iterations", "node_touches", "wall_ns", "error")
    _emit(_csv_block(fields, dicts, _header_lines(args, seed)), args.out)
    failed = [r for r in rows if r.error is not None]
    for r in failed:
        print(f"ciaftp: error: {r.error}: run {r.run_id} exhausted its budget", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def _meta_dict(args: argparse.Namespace, seed: int) -> dict:
    return {
        "command": args.command,
        "kernel_sha256": kernel_spec_digest(args.kernel),
        "rng": RNG_ALGORITHM,
        "seed": seed,
        "length": args.length,
        "runs": args.runs,
        "max_iter": args.max_iter,
        "max_depth": args.max_depth,
        "max_nodes": args.max_nodes,
    }


def cmd_validate(args: argparse.Namespace) -> int:
    kernel = load_kernel(args.kernel)
    seed = _resolve_seed(args)
    report = oracle.validate(
        kernel,
        args.length,
        args.runs,
        seed,
        max_iter=args.max_iter,
        max_depth=args.max_depth,
        max_nodes=args.max_nodes,
    )
    payload = {"meta": _meta_dict(args, seed), "report": report.to_json_dict()}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_bench(args: argparse.Namespace) -> int:
    kernel = load_kernel(args.kernel)
    seed = _resolve_seed(args)
    algorithms = ["ciaftp"]
    if kernel.order is not None:
        algorithms.append("pw_extended")
    fmt = kernel.alphabet.format_word
    dicts: List[dict] = []
    for algo in algorithms:
        for r in _run_rows(kernel, args, seed, algo):
            dicts.append(
                {
                    "algorithm": algo,
                    "seed": seed + r.run_id,
                    "sample": fmt(r.sample) if r.sample is not None else "",
                    "tau": "" if r.tau is None else r.tau,
                    "iterations": r.iterations,
                    "node_touches": r.node_touches,
                    "wall_ns": r.wall_ns,
                    "error": r.error or "",
                }
            )
    fields = ("algorithm", "seed", "sample", "tau", "iterations",
              "node_touches", "wall_ns", "error")
    _emit(_csv_block(fields, dicts, _header_lines(args, seed)), args.out)
    failed = [d for d in dicts if d["error"]]
    return EXIT_FAIL if failed else EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    kernel = load_kernel(args.kernel)
    buf = io.StringIO()
    if args.u is not None:
        _inspect_slice(kernel, args, buf)
    else:
        _inspect_kernel(kernel, args, buf)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _inspect_slice(kernel, args, buf: io.StringIO) -> None:
    u = args.u
    if not 0.0 <= u < 1.0:
        raise CiaftpError(f"--u must lie in [0, 1), got {u!r}")
    slice_ = build_slice(kernel, u, args.max_depth)
    buf.write(f"# slice for u={u!r}\n")
    buf.write(f"# depth={slice_.depth} leaves={slice_.trie.leaf_count()} "
              f"regeneration={slice_.is_regeneration}\n")
    buf.write(slice_.trie.to_text() + "\n")
    if args.context is not None:
        ctx = kernel.alphabet.parse_word(args.context)
    else:
        # deepest leaf: the last place the draw could still be undecided
        ctx = max((s for s, _ in slice_.trie.leaves()), key=len)
    buf.write(f"\n# interval table along context {kernel.alphabet.format_word(ctx) or 'ε'}\n")
    buf.write("level,symbol,alpha,beta\n")
    for iv in interval_table(kernel, ctx, u_cap=u):
        buf.write(f"{iv.level},{iv.symbol},{iv.alpha!r},{iv.beta!r}\n")


def _inspect_kernel(kernel, args, buf: io.StringIO) -> None:
    buf.write(f"# kernel family={kernel.family} ")
    buf.write(f"order={'inf' if kernel.order is None else kernel.order}\n")
    if hasattr(kernel, "trie"):
        trie = kernel.trie
        buf.write("# dictionary\n")
        buf.write(trie.to_text() + "\n")
        closed = sorted(prefix_closure(trie).leaf_contexts())
        fmt = kernel.alphabet.format_word
        buf.write("# prefix closure: {" + ", ".join(fmt(c) or "ε" for c in closed) + "}\n")
        d = trie.depth()
        n_leaves = trie.leaf_count()
        buf.write(
            f"# closure size {len(closed)} <= |D|*depth = {n_leaves}*{d}"
            f" = {n_leaves * d}\n" if d > 0 else "# closure size 1 (memoryless)\n"
        )
    depth_cap = 0
    while depth_cap < args.max_depth and kernel.alphabet.size ** (depth_cap + 1) <= 4096:
        depth_cap += 1
    if isinstance(kernel, RenewalSqrtKernel):
        depth_cap = min(args.max_depth, 64)
    buf.write("# worst-case coupled mass by depth\nk,A_k_min\n")
    for k in range(depth_cap + 1):
        buf.write(f"{k},{kernel.min_mass(k)!r}\n")
        if kernel.min_mass(k) >= 1.0 - 1e-12:
            break
    bound = expected_depth_bound(kernel, args.length)
    buf.write(f"# expected depth bound (window {args.length}): ")
    buf.write(f"{bound.bound!r} finite={bound.sum_finite}\n")


_COMMANDS = {
    "sample": cmd_sample,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "inspect": cmd_inspect,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.length < 1 or args.runs < 1:
        print("ciaftp: error: Usage: --length and --runs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"ciaftp: error: FileNotFound: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KernelSpecError as exc:
        print(f"ciaftp: error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"ciaftp: error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CiaftpError as exc:
        print(f"ciaftp: error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
