"""Benchmark the compiled betweenness kernel against the pure-Python fallback.

Runs the same restricted edge-betweenness workload twice in fresh
interpreters, once per backend (DYPORT_PURE_PYTHON=1 forces the fallback),
and prints a per-size timing table with the speedup. Both runs must produce
bit-identical scores; the benchmark fails loudly if they do not.

Usage:
    python3 benchmarks/bench_betweenness.py
    python3 benchmarks/bench_betweenness.py --sizes 200,400,800 --degree 4
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from dyport.snapshots import SnapshotGraph


def build_graph(n_nodes: int, avg_degree: float, seed: int) -> SnapshotGraph:
    """Random connected graph: a spanning tree plus uniform extra edges."""
    rng = np.random.default_rng(seed)
    ids = tuple(f"n{i:05d}" for i in range(n_nodes))
    edges = set()
    order = rng.permutation(n_nodes)
    for k in range(1, n_nodes):
        parent = order[rng.integers(0, k)]
        a, b = ids[order[k]], ids[parent]
        edges.add((min(a, b), max(a, b)))
    n_extra = max(0, int(n_nodes * avg_degree / 2) - len(edges))
    while n_extra > 0:
        i, j = rng.integers(0, n_nodes, size=2)
        if i == j:
            continue
        a, b = ids[i], ids[j]
        pair = (min(a, b), max(a, b))
        if pair not in edges:
            edges.add(pair)
            n_extra -= 1
    pairs = tuple(sorted(edges))
    return SnapshotGraph(
        year=0,
        node_ids=ids,
        edge_pairs=pairs,
        weights=np.ones(len(pairs), dtype=np.int64),
        token=f"bench-{n_nodes}-{seed}",
    )


def run_workload(sizes: list[int], avg_degree: float, seed: int, repeats: int) -> dict:
    """Time the kernel at each size; return timings and a result digest."""
    from dyport._kernels import BACKEND, edge_betweenness_kernel

    results = {"backend": BACKEND, "sizes": []}
    for n_nodes in sizes:
        g = build_graph(n_nodes, avg_degree, seed)
        indptr, indices, edge_ids = g.csr()
        sources = np.arange(g.n_nodes, dtype=np.int64)
        is_target = np.ones(g.n_nodes, dtype=np.uint8)
        best = float("inf")
        bc = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            bc = edge_betweenness_kernel(
                g.n_nodes, indptr, indices, edge_ids, g.n_edges, sources, is_target
            )
            best = min(best, time.perf_counter() - t0)
        results["sizes"].append(
            {
                "n_nodes": n_nodes,
                "n_edges": g.n_edges,
                "best_s": best,
                "digest": float(bc.sum()).hex(),
            }
        )
    return results


def run_backend(force_pure: bool, args: argparse.Namespace) -> dict:
    """Re-run this script in a worker interpreter pinned to one backend."""
    env = dict(os.environ, DYPORT_PURE_PYTHON="1" if force_pure else "0")
    cmd = [
        sys.executable,
        os.path.abspath(__file__),
        "--worker",
        "--sizes",
        ",".join(str(s) for s in args.sizes),
        "--degree",
        str(args.degree),
        "--seed",
        str(args.seed),
        "--repeats",
        str(args.repeats),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True, env=env)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"worker failed with exit code {proc.returncode}")
    return json.loads(proc.stdout)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        type=lambda s: [int(x) for x in s.split(",")],
        default=[100, 200, 400, 800],
        help="comma-separated node counts (default: 100,200,400,800)",
    )
    parser.add_argument(
        "--degree", type=float, default=4.0, help="average degree (default: 4)"
    )
    parser.add_argument("--seed", type=int, default=0, help="graph seed (default: 0)")
    parser.add_argument(
        "--repeats", type=int, default=3, help="timing repeats, best taken (default: 3)"
    )
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        out = run_workload(args.sizes, args.degree, args.seed, args.repeats)
        json.dump(out, sys.stdout)
        return 0

    pure = run_backend(force_pure=True, args=args)
    fast = run_backend(force_pure=False, args=args)
    if pure["backend"] != "python":
        raise SystemExit(f"expected python backend, worker used {pure['backend']}")
    if fast["backend"] == "python":
        print("compiled kernel unavailable; both runs used the python backend")

    print(f"backends: {fast['backend']} vs {pure['backend']}")
    print(f"{'nodes':>7} {'edges':>7} {'python_s':>10} {fast['backend'] + '_s':>10} {'speedup':>8}")
    for row_fast, row_pure in zip(fast["sizes"], pure["sizes"]):
        if row_fast["digest"] != row_pure["digest"]:
            raise SystemExit(
                f"backend results differ at n={row_fast['n_nodes']}: "
                f"{row_fast['digest']} vs {row_pure['digest']}"
            )
        speedup = row_pure["best_s"] / max(row_fast["best_s"], 1e-12)
        print(
            f"{row_fast['n_nodes']:>7} {row_fast['n_edges']:>7} "
            f"{row_pure['best_s']:>10.4f} {row_fast['best_s']:>10.4f} "
            f"{speedup:>7.1f}x"
        )
    print("results agree across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
