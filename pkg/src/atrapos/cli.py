"""Command-line front end: ingest, workload generation, fitting, runs, benches."""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
import time

from .engine import ClockMode, Engine, EngineConfig, Variant
from .cache import Policy
from .hin import Hin, load_hin
from .sparse import CostCoefficients, fit_cost_model, spgemm
from .synth import random_sparse
from .workload import (
    Distribution,
    WorkloadSpec,
    build_constraint_universe,
    enumerate_metapaths,
    generate_workload,
    load_workload,
    save_workload,
)

FIT_DIMS = (100, 200, 400, 800)
FIT_DENSITIES = (0.001, 0.01, 0.05, 0.1)
FIT_REPS = 3


def _env_seed(seed: int) -> int:
    env = os.environ.get("ATRAPOS_SEED")
    return int(env) if env else seed


def _parse_mapping(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"expected SYMBOL=PATH, got {pair!r}")
        sym, path = pair.split("=", 1)
        out[sym] = path
    return out


def cmd_ingest(args) -> int:
    hin = load_hin(args.schema, _parse_mapping(args.nodes), _parse_mapping(args.edges))
    hin.save(args.out)
    total_nodes = sum(len(t) for t in hin.node_tables.values())
    total_edges = sum(m.nnz for m in hin.adjacency.values())
    print(f"ingested {total_nodes} nodes, {total_edges} edges -> {args.out}")
    return 0


def cmd_gen_workload(args) -> int:
    hin = Hin.load(args.hin)
    seed = _env_seed(args.seed)
    metapaths = enumerate_metapaths(hin.schema, args.len_min, args.len_max)
    constraints = build_constraint_universe(hin, args.constraints, seed)
    spec = WorkloadSpec(
        metapaths=metapaths,
        constraints=constraints,
        count=args.count,
        restart_p=args.p,
        distribution=Distribution(args.dist),
        alpha=args.alpha,
        seed=seed,
    )
    queries = generate_workload(hin.schema, spec)
    save_workload(queries, args.out, hin.schema)
    print(f"wrote {len(queries)} queries -> {args.out}")
    return 0


def collect_fit_samples(dims, densities, reps, seed):
    rng = random.Random(seed)
    samples = []
    for n in dims:
        for d in densities:
            for _ in range(reps):
                x = random_sparse(rng, n, n, d)
                y = random_sparse(rng, n, n, d)
                t0 = time.perf_counter()
                spgemm(x, y)
                samples.append((x.stats(), y.stats(), time.perf_counter() - t0))
    return samples


def cmd_fit(args) -> int:
    samples = collect_fit_samples(args.dims, args.densities, args.reps, _env_seed(args.seed))
    coeffs = fit_cost_model(samples)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"alpha": coeffs.alpha, "beta": coeffs.beta, "gamma": coeffs.gamma}, fh)
    print(f"fit {len(samples)} samples: alpha={coeffs.alpha:g} beta={coeffs.beta:g} gamma={coeffs.gamma:g}")
    return 0


def load_coeffs(path: str | None) -> CostCoefficients:
    if path is None:
        return CostCoefficients(1.0, 1.0, 1.0)
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return CostCoefficients(data["alpha"], data["beta"], data["gamma"])


def _make_engine(hin, variant: str, policy: str | None, cache_mb: float, coeffs, clock: str) -> Engine:
    config = EngineConfig(
        variant=Variant(variant),
        policy=Policy(policy) if policy else None,
        capacity_bytes=int(cache_mb * 2**20),
        coeffs=coeffs,
        clock=ClockMode(clock),
    )
    return Engine(hin, config)


def cmd_run(args) -> int:
    hin = Hin.load(args.hin)
    coeffs = load_coeffs(args.coeffs)
    engine = _make_engine(hin, args.variant, args.policy, args.cache_mb, coeffs, args.clock)
    queries = load_workload(args.workload, hin.schema)
    report = engine.run_workload(queries)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query", "ms", "op_count", "hits", "evictions", "plan"])
        for r in report.records:
            writer.writerow(
                [r.text, f"{r.seconds * 1e3:.3f}", r.op_count, r.hits, r.evictions, r.plan or r.error]
            )
    print(
        f"{args.variant}: {len(report.records)} queries in {report.total_seconds * 1e3:.1f} ms, "
        f"{report.total_op_count} ops, {report.total_hits} hits, "
        f"{report.total_evictions} evictions -> {args.out}"
    )
    return 1 if report.errors else 0


def cmd_bench(args) -> int:
    hin = Hin.load(args.hin)
    coeffs = load_coeffs(args.coeffs)
    queries = load_workload(args.workload, hin.schema)
    rows = []
    for variant in args.variants.split(","):
        for cache_mb in (float(x) for x in args.cache_mb.split(",")):
            if variant == "hranks" and cache_mb != float(args.cache_mb.split(",")[0]):
                continue  # cacheless variant is independent of cache size
            engine = _make_engine(
                hin, variant, None, cache_mb, coeffs, args.clock
            )
            report = engine.run_workload(queries)
            rows.append(
                {
                    "variant": variant,
                    "policy": engine.config.policy.value if engine.config.policy else "",
                    "cache_mb": cache_mb,
                    "queries": len(report.records),
                    "total_ms": f"{report.total_seconds * 1e3:.3f}",
                    "avg_ms": f"{report.total_seconds * 1e3 / max(1, len(report.records)):.3f}",
                    "op_count": report.total_op_count,
                    "hits": report.total_hits,
                    "evictions": report.total_evictions,
                    "peak_cache_bytes": report.peak_cache_used,
                }
            )
            print(f"bench {variant} cache={cache_mb}MB: {rows[-1]['total_ms']} ms")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atrapos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="schema + CSV files -> binary fixture")
    p.add_argument("--schema", required=True)
    p.add_argument("--nodes", nargs="+", required=True, metavar="SYM=PATH")
    p.add_argument("--edges", nargs="+", required=True, metavar="SYM=PATH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-workload", help="generate a synthetic query workload")
    p.add_argument("--hin", required=True)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--p", type=float, default=0.1, help="session restart probability")
    p.add_argument("--len-min", type=int, default=3)
    p.add_argument("--len-max", type=int, default=5)
    p.add_argument("--dist", choices=["uniform", "zipf"], default="uniform")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constraints", type=int, default=20, help="constraint universe size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("fit-cost-model", help="time random multiplications and fit coefficients")
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=int, nargs="+", default=list(FIT_DIMS))
    p.add_argument("--densities", type=float, nargs="+", default=list(FIT_DENSITIES))
    p.add_argument("--reps", type=int, default=FIT_REPS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("run", help="run one workload under one engine variant")
    p.add_argument("--variant", choices=[v.value for v in Variant], required=True)
    p.add_argument("--policy", choices=[pol.value for pol in Policy])
    p.add_argument("--cache-mb", type=float, default=64.0)
    p.add_argument("--coeffs", help="coefficients JSON from fit-cost-model")
    p.add_argument("--workload", required=True)
    p.add_argument("--hin", required=True)
    p.add_argument("--clock", choices=["wall", "ops"], default="wall")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="matrix of variants x cache sizes, aggregate CSV")
    p.add_argument("--hin", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--variants", default="hranks,cbs1,cbs2,atrapos")
    p.add_argument("--cache-mb", default="4,16,64")
    p.add_argument("--coeffs")
    p.add_argument("--clock", choices=["wall", "ops"], default="wall")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
