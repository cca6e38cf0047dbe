"""Command-line front end.

Every subcommand writes a table (CSV or JSON list of row objects) to
``--out`` or stdout.  Columns whose name starts with ``timing_`` hold
wall-clock measurements and are the only output that varies between runs
with the same arguments.  On error a JSON object ``{"error": code,
"message": ...}`` goes to stdout for ``--format json`` and to stderr
otherwise.

Exit codes: 0 success, 2 usage error, 3 build failed, 4 capacity, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants
from .hypergraph import CapacityError, FuseParams, Hypergraph, generate_er, generate_fuse, mix_int
from .peeler import peel_rounds, peel_sequential, rooted_survival, segment_fractions
from .retrieval import (
    BuildFailed,
    CapacityExceeded,
    FormatError,
    RetrievalParams,
    build,
    deserialize,
    query_many,
    serialize,
    synthetic_keys,
)
from .threshold import (
    DEFAULT_D,
    ThresholdError,
    bracket_threshold,
    consolidation_check,
    erosion_check,
    iterate_p,
    iterate_phat_indicator,
)

EXIT_OK, EXIT_USAGE, EXIT_BUILD, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    args: argparse.Namespace
    fmt: str
    seed: int
    trials: int
    threads: int


# ----------------------------------------------------------------- output

def _fmt(v, fmt="csv"):
    if isinstance(v, (bool, np.bool_)):
        return bool(v) if fmt == "json" else int(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def render(rows, fmt):
    rows = [{k: _fmt(v, fmt) for k, v in row.items()} for row in rows]
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    if rows:
        fields = list(rows[0])
        for row in rows[1:]:
            fields += [k for k in row if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def emit(rows, cfg: RunConfig):
    text = render(rows, cfg.fmt)
    out = getattr(cfg.args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _map_trials(fn, count, threads):
    if threads <= 1 or count <= 1:
        return [fn(t) for t in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def trial_seed(seed, trial):
    return mix_int(seed, trial)


# ----------------------------------------------------------------- graphs

def _validate_graph_args(a, family):
    if a.k < 3:
        raise UsageError(f"--k must be >= 3, got {a.k}")
    if a.n < 1:
        raise UsageError(f"--n must be >= 1, got {a.n}")
    if not a.c > 0:
        raise UsageError(f"--c must be positive, got {a.c}")
    if family == "fuse" and a.ell < 1:
        raise UsageError(f"--ell must be >= 1, got {a.ell}")
    if family == "er" and a.n < a.k:
        raise UsageError("--n must be at least --k for er graphs")


def make_graph(family, k, c, ell, n, seed) -> Hypergraph:
    if family == "fuse":
        return generate_fuse(FuseParams(k, c, ell, n, seed))
    return generate_er(k, n, int(round(c * n)), seed)


def cmd_gen(cfg):
    a = cfg.args
    _validate_graph_args(a, a.family)
    h = make_graph(a.family, a.k, a.c, a.ell, a.n, cfg.seed)
    text = h.to_text()
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)


def _peel_row(h, mode="rounds"):
    res = peel_rounds(h) if mode == "rounds" else peel_sequential(h)
    return {
        "peelable": res.is_peelable,
        "rounds": res.rounds,
        "core_vertices": len(res.core_vertices),
        "core_edges": len(res.core_edges),
    }


def cmd_peel(cfg):
    a = cfg.args
    if a.graph:
        h = Hypergraph.from_text(Path(a.graph).read_text())
    else:
        _validate_graph_args(a, a.family)
        h = make_graph(a.family, a.k, a.c, a.ell, a.n, cfg.seed)
    row = {"vertices": h.num_vertices, "edges": h.num_edges}
    row.update(_peel_row(h, a.mode))
    emit([row], cfg)


def mc_peel(family, k, c, ell, n, trials, seed, threads=1):
    """Per-trial peeling outcomes plus a summary row."""

    def one(t):
        s = trial_seed(seed, t)
        row = {"trial": t, "seed": s}
        row.update(_peel_row(make_graph(family, k, c, ell, n, s)))
        return row

    rows = _map_trials(one, trials, threads)
    summary = {
        "trial": "summary",
        "seed": seed,
        "peelable": sum(r["peelable"] for r in rows) / trials if trials else 0.0,
        "rounds": statistics.fmean(r["rounds"] for r in rows) if rows else 0.0,
        "core_vertices": statistics.fmean(r["core_vertices"] for r in rows) if rows else 0.0,
        "core_edges": statistics.fmean(r["core_edges"] for r in rows) if rows else 0.0,
    }
    return rows + [summary]


def cmd_mc_peel(cfg):
    a = cfg.args
    _validate_graph_args(a, a.family)
    emit(mc_peel(a.family, a.k, a.c, a.ell, a.n, cfg.trials, cfg.seed, cfg.threads), cfg)


# ----------------------------------------------------------------- thresholds

def threshold_report(k, D=DEFAULT_D, tol=1e-4, max_iter=10**7):
    if k < 3:
        raise UsageError(f"--k must be >= 3, got {k}")
    if D < 1 or tol <= 0 or max_iter < 1:
        raise UsageError("--window-D, --tol and --max-iter must be positive")
    br = bracket_threshold(k, D, max_iter, tol)
    ref = constants.ORIENTABILITY.get(k)
    row = {
        "k": k,
        "D": D,
        "lower": br.lower,
        "upper": br.upper,
        "width": br.width,
        "lower_R": br.lower_certificate.iterations,
        "upper_R": br.upper_certificate.iterations,
        "iterations_used": br.iterations_used,
        "undecided": ";".join(repr(u) for u in br.undecided),
        "reference_orientability": "" if ref is None else ref,
        "contains_reference": "" if ref is None else br.contains(ref),
    }
    return br, row


def write_trace(path, br, D, max_iter, every=1):
    k = br.k
    lo = erosion_check(k, br.lower, D, max_iter, trace_every=every)
    hi = consolidation_check(k, br.upper, D, max_iter, trace_every=every)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "c", "r", "value"])
        for kind, res in (("a0", lo), ("b-1", hi)):
            for r, v in res.trace:
                w.writerow([kind, repr(res.c), int(r), repr(float(v))])


def cmd_threshold(cfg):
    a = cfg.args
    br, row = threshold_report(a.k, a.window_D, a.tol, a.max_iter)
    if a.trace:
        write_trace(a.trace, br, a.window_D, a.max_iter, a.trace_every)
    emit([row], cfg)


# ----------------------------------------------------------------- survival

def survival_table(k, c, ell, n, r_max, trials, seed, threads=1):
    """Empirical versus operator survival per round and segment."""
    params = FuseParams(k, c, ell, n, seed)

    def one(t):
        h = generate_fuse(FuseParams(k, c, ell, n, trial_seed(seed, t)))
        res = peel_rounds(h)
        unrooted = np.empty((r_max + 1, params.num_segments))
        for r in range(r_max + 1):
            unrooted[r] = res.survivors_by_round[min(r, res.rounds)] / n
        rooted = segment_fractions(rooted_survival(h, r_max), h.layout)
        return rooted, unrooted

    results = _map_trials(one, trials, threads)
    rooted = np.mean([r for r, _ in results], axis=0)
    unrooted = np.mean([u for _, u in results], axis=0)
    p_rows = iterate_p(k, c, ell, r_max)
    hat_rows = iterate_phat_indicator(k, c, ell, r_max)
    rows = []
    for r in range(r_max + 1):
        for i in range(params.num_segments):
            rows.append({
                "r": r,
                "segment": i,
                "empirical_rooted": float(rooted[r, i]),
                "empirical_unrooted": float(unrooted[r, i]),
                "analytic_p": float(p_rows[r, i]),
                "analytic_phat": float(hat_rows[r, i]),
                "gap": float(abs(rooted[r, i] - p_rows[r, i])),
            })
    return rows


def cmd_survival(cfg):
    a = cfg.args
    _validate_graph_args(a, "fuse")
    if a.rounds < 0:
        raise UsageError("--rounds must be >= 0")
    emit(survival_table(a.k, a.c, a.ell, a.n, a.rounds, cfg.trials, cfg.seed, cfg.threads), cfg)


# ----------------------------------------------------------------- retrieval

def load_keys(source, r_bits, seed=0):
    """Keys and values from ``synthetic:COUNT`` or a newline-delimited key file.

    File keys get the value ``len(key) mod 2**r_bits`` (string-length parity
    for one-bit values).
    """
    if source.startswith("synthetic:"):
        try:
            count = int(source.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad synthetic key source {source!r}") from None
        return synthetic_keys(count, seed, r_bits)
    data = Path(source).read_bytes()
    keys = [ln for ln in data.split(b"\n") if ln]
    mask = (1 << r_bits) - 1
    return keys, [len(key) & mask for key in keys]


def _retrieval_params(a, seed):
    try:
        return RetrievalParams(k=a.k, c=a.c, ell=a.ell, r_bits=a.bits, max_retries=a.max_retries, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _summary_row(s):
    return {
        "m": s.m,
        "n": s.n,
        "cells": s.num_cells,
        "attempts": s.attempts,
        "successful_seed": s.successful_seed,
        "raw_overhead": s.raw_overhead() if s.m else "",
        "total_overhead": s.total_overhead() if s.m else "",
        "bytes": s.serialized_size(),
    }


def cmd_retrieval_build(cfg):
    a = cfg.args
    params = _retrieval_params(a, cfg.seed)
    keys, vals = load_keys(a.keys, a.bits, cfg.seed)
    s = build(zip(keys, vals), params)
    if a.structure:
        Path(a.structure).write_bytes(serialize(s))
    emit([_summary_row(s)], cfg)


def cmd_retrieval_query(cfg):
    a = cfg.args
    s = deserialize(Path(a.structure).read_bytes())
    if a.keys:
        keys, _ = load_keys(a.keys, s.params.r_bits, cfg.seed)
    else:
        keys = [k.encode() for k in a.key]
    vals = query_many(s, keys) if keys else []
    emit([{"key": k.decode(errors="backslashreplace"), "value": int(v)} for k, v in zip(keys, vals)], cfg)


def retrieval_bench(keys, vals, params, trials):
    """Median per-key build and query times over ``trials`` runs."""
    rows = []
    for t in range(trials):
        t0 = time.perf_counter()
        s = build(zip(keys, vals), params)
        t1 = time.perf_counter()
        got = query_many(s, keys)
        t2 = time.perf_counter()
        m = max(len(keys), 1)
        row = {"trial": t}
        row.update(_summary_row(s))
        row["correct"] = bool(np.array_equal(got, np.array(vals, dtype=np.uint64)))
        row["timing_build_us_per_key"] = (t1 - t0) / m * 1e6
        row["timing_query_ns_per_key"] = (t2 - t1) / m * 1e9
        rows.append(row)
    summary = dict(rows[-1]) if rows else {}
    summary["trial"] = "median"
    for col in ("timing_build_us_per_key", "timing_query_ns_per_key"):
        summary[col] = statistics.median(r[col] for r in rows) if rows else 0.0
    summary["correct"] = all(r["correct"] for r in rows)
    return rows + [summary]


def cmd_retrieval_bench(cfg):
    a = cfg.args
    params = _retrieval_params(a, cfg.seed)
    keys, vals = load_keys(a.keys, a.bits, cfg.seed)
    emit(retrieval_bench(keys, vals, params, cfg.trials), cfg)


# ----------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, graph=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    if graph:
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--c", type=float, default=0.9)
        p.add_argument("--ell", type=int, default=100)
        p.add_argument("--n", type=int, default=10**4)


def build_parser():
    parser = _Parser(prog="fusepeel", description="Fuse-graph peeling, thresholds and retrieval.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a graph and dump it as text")
    _common(p)
    p.add_argument("--family", choices=("fuse", "er"), default="fuse")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("peel", help="peel one graph")
    _common(p)
    p.add_argument("--family", choices=("fuse", "er"), default="fuse")
    p.add_argument("--graph", default=None, help="graph dump to read instead of generating")
    p.add_argument("--mode", choices=("rounds", "sequential"), default="rounds")
    p.set_defaults(func=cmd_peel)

    p = sub.add_parser("mc-peel", help="Monte Carlo peelability")
    _common(p)
    p.add_argument("--family", choices=("fuse", "er"), default="fuse")
    p.set_defaults(func=cmd_mc_peel)

    p = sub.add_parser("threshold", help="bracket the erosion/consolidation thresholds")
    _common(p, graph=False)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--window-D", dest="window_D", type=int, default=DEFAULT_D)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=10**7)
    p.add_argument("--trace", default=None)
    p.add_argument("--trace-every", dest="trace_every", type=int, default=1)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("survival", help="empirical versus operator survival per segment")
    _common(p)
    p.add_argument("--rounds", type=int, default=5)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("retrieval", help="retrieval data structure")
    rsub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, func in (("build", cmd_retrieval_build), ("query", cmd_retrieval_query), ("bench", cmd_retrieval_bench)):
        rp = rsub.add_parser(name)
        _common(rp)
        rp.add_argument("--bits", type=int, default=1)
        rp.add_argument("--max-retries", dest="max_retries", type=int, default=100)
        rp.add_argument("--keys", default=None if name == "query" else "synthetic:100000")
        rp.add_argument("--structure", default=None, required=(name == "query"))
        if name == "query":
            rp.add_argument("key", nargs="*")
        rp.set_defaults(func=func)
        rp.set_defaults(c=0.91 if name != "query" else 0.9)
    return parser


def _config(args) -> RunConfig:
    threads = args.threads
    env = os.environ.get("FUSEPEEL_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"FUSEPEEL_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise UsageError("thread count must be >= 1")
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    return RunConfig(args.command, args, args.format, args.seed, args.trials, threads)


def _error(code, message, fmt):
    text = json.dumps({"error": code, "message": message})
    print(text, file=sys.stdout if fmt == "json" else sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = "json" if "--format=json" in argv or any(
        a == "--format" and i + 1 < len(argv) and argv[i + 1] == "json" for i, a in enumerate(argv)) else "csv"
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        args.func(cfg)
    except UsageError as exc:
        _error("usage", str(exc), fmt)
        return EXIT_USAGE
    except BuildFailed as exc:
        _error("build-failed", str(exc), fmt)
        return EXIT_BUILD
    except (CapacityError, CapacityExceeded) as exc:
        _error("capacity", str(exc), fmt)
        return EXIT_CAPACITY
    except (OSError, FormatError) as exc:
        _error("io", str(exc), fmt)
        return EXIT_IO
    except (ThresholdError, ValueError) as exc:
        _error("usage", str(exc), fmt)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
