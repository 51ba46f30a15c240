"""Seeded synthetic end-to-end checks for the CLI ``selftest`` command.

Each check prints one pass/fail line; sweep checks also drop their curve
figures and record files into the output directory.  Everything is driven
by one seed, so two selftest invocations produce identical records.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import rerank as rr
from .evaluation import write_report_lines
from .index import build_index


def _instance(rng: np.random.Generator, n: int, correlated: bool = False):
    """One synthetic query: descending sparse scores plus dense scores."""
    sparse = np.sort(rng.normal(0.0, 1.0, size=n))[::-1]
    if correlated:
        dense = 0.75 * sparse + 0.66 * rng.normal(0.0, 1.0, size=n)
    else:
        dense = rng.normal(0.0, 1.0, size=n)
    docs = [f"d{i:06d}" for i in range(n)]
    candidates = list(zip(docs, sparse.tolist()))
    dense_map = dict(zip(docs, dense.tolist()))
    return candidates, dense_map


def check_early_stop_exactness(rng: np.random.Generator, instances: int = 60) -> bool:
    """Bounded early stopping must return the exhaustive top-k scores."""
    for i in range(instances):
        n = int(rng.integers(50, 400))
        k = int(rng.choice([1, 10, 25]))
        candidates, dense = _instance(rng, n)
        scorer = dense.__getitem__
        exhaustive, _, _ = rr.score_candidates(candidates, scorer, alpha=0.5)
        expected = sorted((s for _, s, _ in exhaustive), reverse=True)[:k]
        got_entries, _, _, _ = rr.topk_early_stop(
            candidates, scorer, alpha=0.5, k=k, bound=max(dense.values())
        )
        got = sorted((s for _, s, _ in got_entries), reverse=True)
        if got != expected:
            return False
    return True


def sweep_lookups(rng: np.random.Generator, out_dir: str, k_s: int = 2000,
                  instances: int = 10) -> tuple[bool, list[str]]:
    """Early stopping on correlated scores: fewer lookups, monotone in k.

    Also measures how often the running-max approximation misses the true
    top-k score multiset (informational; the bound-free mode carries no
    exactness guarantee).
    """
    ks = [1, 10, 50, 100, 500]
    totals = {k: 0 for k in ks}
    mismatches = {k: 0 for k in ks}
    for _ in range(instances):
        candidates, dense = _instance(rng, k_s, correlated=True)
        exhaustive, _, _ = rr.score_candidates(candidates, dense.__getitem__, 0.5)
        full_sorted = sorted((s for _, s, _ in exhaustive), reverse=True)
        for k in ks:
            entries, lookups, _, _ = rr.topk_early_stop(
                candidates, dense.__getitem__, alpha=0.5, k=k, bound=None
            )
            totals[k] += lookups
            got = sorted((s for _, s, _ in entries), reverse=True)
            if got != full_sorted[:k]:
                mismatches[k] += 1
    means = {k: totals[k] / instances for k in ks}
    ok = all(means[a] <= means[b] for a, b in zip(ks, ks[1:]))
    ok = ok and means[100] < k_s
    lines = [f"mean_lookups\tk={k}\t{means[k]:.1f}" for k in ks]
    lines += [f"running_max_mismatch_rate\tk={k}\t{mismatches[k] / instances:.3f}" for k in ks]
    lines.append(f"sparse_depth\tall\t{k_s}")
    try:
        from . import plots

        plots.save_curve_figure(
            ks,
            {"mean index lookups": [means[k] for k in ks],
             "sparse depth": [k_s] * len(ks)},
            os.path.join(out_dir, "lookups_vs_k.png"),
            xlabel="cut-off depth k",
            ylabel="lookups per query",
            title=f"early stopping, correlated scores, k_s={k_s}",
            logx=True,
        )
    except Exception:  # figures are best-effort in selftest
        pass
    return ok, lines


def _clustered_index(rng: np.random.Generator, docs: int = 200, dim: int = 16):
    """Documents whose consecutive passages form a few tight clusters."""
    batch = []
    for d in range(docs):
        n_runs = int(rng.integers(1, 4))
        rows = []
        for _ in range(n_runs):
            center = rng.normal(0.0, 1.0, size=dim)
            center /= np.linalg.norm(center)
            for _ in range(int(rng.integers(1, 4))):
                rows.append(center + rng.normal(0.0, 0.02, size=dim))
        batch.append((f"doc{d:05d}", np.stack(rows).astype(np.float32)))
    return build_index(batch)


def sweep_coalescing(rng: np.random.Generator, out_dir: str) -> tuple[bool, list[str]]:
    """Identity at delta=0, full collapse past 2, monotone in between."""
    index = _clustered_index(rng)
    deltas = [0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 1.5, 2.1]
    after = []
    for delta in deltas:
        _, report = index.coalesce(delta)
        after.append(report.vectors_after)
    ok = after[0] == index.num_vectors
    ok = ok and after[-1] == len(index)
    ok = ok and all(a >= b for a, b in zip(after, after[1:]))
    lines = [
        f"vectors_after\tdelta={d:g}\t{a}" for d, a in zip(deltas, after)
    ]
    lines.insert(0, f"vectors_before\tall\t{index.num_vectors}")
    try:
        from . import plots

        plots.save_curve_figure(
            deltas[1:],
            {"vectors after coalescing": after[1:]},
            os.path.join(out_dir, "coalescing_vs_delta.png"),
            xlabel="distance threshold delta",
            ylabel="vectors in index",
            title=f"{len(index)} docs, {index.num_vectors} vectors before",
            logx=True,
        )
    except Exception:
        pass
    return ok, lines


def check_sample_max_bound(rng: np.random.Generator, trials: int = 2000) -> bool:
    """Sample-maximum tail bound: freq[F(max) < 1-eps] <= exp(-2 n eps^2) + margin."""
    for n in (10, 100):
        for eps in (0.05, 0.1):
            maxima = rng.uniform(0.0, 1.0, size=(trials, n)).max(axis=1)
            freq = float(np.mean(maxima < 1.0 - eps))
            if freq > math.exp(-2.0 * n * eps * eps) + 0.02:
                return False
    return True


def check_alpha_identities(rng: np.random.Generator, instances: int = 30) -> bool:
    """alpha=1 keeps the sparse order; alpha=0 orders by dense score."""
    for _ in range(instances):
        n = int(rng.integers(20, 100))
        candidates, dense = _instance(rng, n)
        scorer = dense.__getitem__
        scored, _, _ = rr.score_candidates(candidates, scorer, alpha=1.0)
        ranked = rr.finalize_ranking(scored, n)
        if [d for d, _ in ranked] != [d for d, _ in candidates]:
            return False
        scored, _, _ = rr.score_candidates(candidates, scorer, alpha=0.0)
        ranked = rr.finalize_ranking(scored, n)
        by_dense = sorted(candidates, key=lambda c: -dense[c[0]])
        if [d for d, _ in ranked] != [d for d, _ in by_dense]:
            return False
    return True


def run(seed: int = 42, out_dir: str = "ffrank-selftest") -> int:
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    results: list[tuple[str, bool]] = []

    results.append(("early-stop exactness (true bound)", check_early_stop_exactness(rng)))
    ok, lines = sweep_lookups(rng, out_dir)
    write_report_lines(lines, os.path.join(out_dir, "lookups.tsv"))
    results.append(("lookup reduction and monotonicity", ok))
    ok, lines = sweep_coalescing(rng, out_dir)
    write_report_lines(lines, os.path.join(out_dir, "coalescing.tsv"))
    results.append(("coalescing extremes and monotonicity", ok))
    results.append(("sample-maximum tail bound", check_sample_max_bound(rng)))
    results.append(("alpha=0 / alpha=1 ordering identities", check_alpha_identities(rng)))

    failed = 0
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed += 0 if ok else 1
    print(f"selftest: {len(results) - failed}/{len(results)} checks passed; records in {out_dir}/")
    return 0 if failed == 0 else 1
