"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Lines are repeated in the pytest terminal summary and written to
``acceptance_artifacts/report.txt``. Dataset-dependent criteria read from
``$MLGK_DATA`` (default ``data/``) and fail when a dataset is missing.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from mlgkernel.classifier import cross_validate
from mlgkernel.cli import main as cli_main
from mlgkernel.datasets import dataset_stats, load_tu_dataset, one_hot_features
from mlgkernel.flg import flg_explicit, flg_kernelized
from mlgkernel.gram import format_gram
from mlgkernel.graph import permute, random_graph
from mlgkernel.linalg import bhattacharyya_ratio
from mlgkernel.mlg_exact import MlsParams, gram_exact, mlg_kernel, naive_gram
from mlgkernel.mlg_linearized import PipelineParams, gram_linearized

from conftest import ACCEPTANCE_LINES, DATA_DIR, dataset_available
from oracles import gaussian_overlap_1d, gaussian_overlap_2d, random_spd

ARTIFACTS = Path(__file__).resolve().parents[1] / "acceptance_artifacts"
CV_GRID = [(levels, r0, eta, gamma) for levels in (2, 3) for r0 in (1, 2)
           for eta in (0.01, 0.1) for gamma in (0.01, 0.1)]
PTC_NAMES = ("PTC_MR", "PTC")


def verdict(number, title, ok, detail, seconds):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail} | {seconds:.1f}s"
    print(line)
    ACCEPTANCE_LINES.append(line)
    ARTIFACTS.mkdir(exist_ok=True)
    with open(ARTIFACTS / "report.txt", "a", encoding="utf-8") as f:
        f.write(line + "\n")
    assert ok, line


def load(name):
    return one_hot_features(load_tu_dataset(DATA_DIR, name))


def ptc_name():
    return next((n for n in PTC_NAMES if dataset_available(n)), None)


def rand_graphs(rng, count, n_min, n_max, weighted=False):
    return [random_graph(rng, int(rng.integers(n_min, n_max + 1)), p=0.3, weighted=weighted)
            for _ in range(count)]


def test_criterion_01_kernelization():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        n1, n2 = rng.integers(1, 11, size=2)
        g1, g2 = random_graph(rng, n1, weighted=True), random_graph(rng, n2, weighted=True)
        d = int(rng.integers(1, 7))
        U1, U2 = rng.normal(size=(d, n1)), rng.normal(size=(d, n2))
        eta, gamma = rng.choice([0.01, 0.1, 1.0], size=2)
        a = flg_explicit(g1, U1, g2, U2, eta, gamma)
        b = flg_kernelized(g1, g2, eta=eta, gamma=gamma, payloads1=U1.T, payloads2=U2.T)
        worst = max(worst, abs(a - b))
    elapsed = time.perf_counter() - start
    verdict(1, "kernelized FLG equals explicit FLG", worst <= 1e-8 and elapsed < 60,
            f"200 pairs, max abs diff {worst:.2e} (tol 1e-8)", elapsed)


def test_criterion_02_permutation_invariance():
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    params = MlsParams(levels=2, r0=1)
    worst = 0.0
    for g in rand_graphs(rng, 100, 2, 12):
        worst = max(worst, abs(mlg_kernel(g, permute(g, rng.permutation(g.n)), params) - 1.0))
    elapsed = time.perf_counter() - start
    verdict(2, "MLG permutation invariance", worst <= 1e-9 and elapsed < 300,
            f"100 graphs, max |k(g, pi g) - 1| {worst:.2e} (tol 1e-9)", elapsed)


def criterion_3_gram():
    ds = load("MUTAG")
    params = PipelineParams(levels=2, r0=1, n_samples=100, rank=10, seed=0)
    return gram_linearized(ds.graphs[:100], params)


def test_criterion_03_psd():
    start = time.perf_counter()
    if not dataset_available("MUTAG"):
        verdict(3, "linearized Gram is PSD", False, f"MUTAG missing under {DATA_DIR}", 0.0)
    G = criterion_3_gram()
    lo, hi = G.min_max_eigenvalues()
    elapsed = time.perf_counter() - start
    verdict(3, "linearized Gram is PSD", lo >= -1e-8 * hi and elapsed < 600,
            f"100 MUTAG graphs, eigenvalues [{lo:.3e}, {hi:.3e}]", elapsed)


def test_criterion_04_exact_vs_linearized():
    start = time.perf_counter()
    rng = np.random.default_rng(104)
    graphs = rand_graphs(rng, 10, 1, 8)
    total = sum(g.n for g in graphs)
    exact = gram_exact(graphs, MlsParams(levels=2, r0=1)).values
    lin = gram_linearized(graphs, PipelineParams(levels=2, r0=1, n_samples=total,
                                                 rank=total)).values
    diff = float(np.abs(lin - exact).max())
    elapsed = time.perf_counter() - start
    verdict(4, "linearized equals exact at full sample", diff <= 1e-4 and elapsed < 300,
            f"N = {total}, max entry diff {diff:.2e} (tol 1e-4)", elapsed)


def test_criterion_05_cache_transparency():
    start = time.perf_counter()
    rng = np.random.default_rng(105)
    graphs = rand_graphs(rng, 5, 1, 8)
    params = MlsParams(levels=2, r0=1, dedup=True)
    diff = float(np.abs(gram_exact(graphs, params).values - naive_gram(graphs, params)).max())
    elapsed = time.perf_counter() - start
    verdict(5, "cached recursion equals cache-free recursion", diff <= 1e-12 and elapsed < 300,
            f"5 graphs, max entry diff {diff:.2e} (tol 1e-12)", elapsed)


def test_criterion_06_bhattacharyya_quadrature():
    start = time.perf_counter()
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(50):
        if k % 2 == 0:
            s1, s2 = rng.uniform(0.05, 5.0, size=2)
            diff = abs(bhattacharyya_ratio([[s1]], [[s2]]) - gaussian_overlap_1d(s1, s2))
        else:
            S1, S2 = random_spd(rng, 2, 0.2), random_spd(rng, 2, 0.2)
            diff = abs(bhattacharyya_ratio(S1, S2) - gaussian_overlap_2d(S1, S2))
        worst = max(worst, diff)
    elapsed = time.perf_counter() - start
    verdict(6, "overlap matches numerical quadrature", worst <= 1e-6 and elapsed < 60,
            f"25 1-D + 25 2-D inputs, max abs diff {worst:.2e} (tol 1e-6)", elapsed)


def test_criterion_07_dataset_fidelity():
    start = time.perf_counter()
    parts, ok = [], True
    if dataset_available("MUTAG"):
        st = dataset_stats(load_tu_dataset(DATA_DIR, "MUTAG"))
        good = (st.size == 188 and sorted(st.classes.values()) == [63, 125]
                and abs(st.mean_nodes - 17.9) <= 0.1)
        ok &= good
        parts.append(f"MUTAG {'ok' if good else 'MISMATCH'} ({st.size} graphs, classes "
                     f"{st.classes}, mean nodes {st.mean_nodes:.2f})")
    else:
        ok = False
        parts.append("MUTAG missing")
    if dataset_available("ENZYMES"):
        st = dataset_stats(load_tu_dataset(DATA_DIR, "ENZYMES"))
        good = st.size == 600 and sorted(st.classes.values()) == [100] * 6
        ok &= good
        parts.append(f"ENZYMES {'ok' if good else 'MISMATCH'} ({st.size} graphs, "
                     f"classes {st.classes})")
    else:
        ok = False
        parts.append(f"ENZYMES missing under {DATA_DIR}")
    elapsed = time.perf_counter() - start
    verdict(7, "dataset fidelity", ok and elapsed < 10, "; ".join(parts), elapsed)


def sweep_accuracy(ds):
    best = None
    rows = []
    for levels, r0, eta, gamma in CV_GRID:
        params = PipelineParams(levels=levels, r0=r0, eta=eta, gamma=gamma, seed=0)
        G = gram_linearized(ds.graphs, params)
        report = cross_validate(G, ds.labels, seed=0)
        rows.append(f"{ds.name} L={levels} r0={r0} eta={eta} gamma={gamma}: {report.summary()}")
        if best is None or report.mean > best[1].mean:
            best = ((levels, r0, eta, gamma), report)
    ARTIFACTS.mkdir(exist_ok=True)
    (ARTIFACTS / f"cv_{ds.name}.txt").write_text("\n".join(rows) + "\n")
    return best


def test_criterion_08_classification():
    start = time.perf_counter()
    parts, ok = [], True
    targets = [("MUTAG", 0.80), (ptc_name() or "PTC_MR", 0.55)]
    for name, target in targets:
        if not dataset_available(name):
            ok = False
            parts.append(f"{name} missing under {DATA_DIR}")
            continue
        (levels, r0, eta, gamma), report = sweep_accuracy(load(name))
        good = report.mean >= target
        ok &= good
        parts.append(f"{name} best {report.summary()} at L={levels} r0={r0} eta={eta} "
                     f"gamma={gamma} (target >= {100 * target:.0f})")
    elapsed = time.perf_counter() - start
    verdict(8, "cross-validated accuracy", ok and elapsed < 7200, "; ".join(parts), elapsed)


def test_criterion_09_throughput():
    start = time.perf_counter()
    if not dataset_available("ENZYMES"):
        verdict(9, "ENZYMES Gram throughput", False, f"ENZYMES missing under {DATA_DIR}", 0.0)
    ds = load("ENZYMES")
    threads = os.cpu_count() or 1
    G = gram_linearized(ds.graphs, PipelineParams(), threads=threads)
    elapsed = time.perf_counter() - start
    ARTIFACTS.mkdir(exist_ok=True)
    (ARTIFACTS / "throughput.txt").write_text(
        f"dataset=ENZYMES\ngraphs={G.size}\nthreads={threads}\nwall_seconds={elapsed:.1f}\n")
    verdict(9, "ENZYMES Gram throughput", elapsed < 3600,
            f"{G.size}x{G.size} Gram with {threads} threads", elapsed)


def cli_gram_bytes(tmp_path, tag, name, levels, r0, eta, gamma, threads):
    out = tmp_path / f"{tag}.csv"
    code = cli_main(["gram", "--dataset", str(DATA_DIR), "--name", name, "--mode", "linearized",
                     "--levels", str(levels), "--radius", str(r0), "--eta", str(eta),
                     "--gamma", str(gamma), "--seed", "0", "--threads", str(threads),
                     "--out", str(out)], environ={})
    assert code == 0
    return out.read_bytes()


def test_criterion_10_determinism(tmp_path):
    start = time.perf_counter()
    parts, ok = [], True
    if dataset_available("MUTAG"):
        same = format_gram(criterion_3_gram()) == format_gram(criterion_3_gram())
        ok &= same
        parts.append(f"criterion 3 Gram {'identical' if same else 'DIFFERS'}")
    else:
        ok = False
        parts.append("MUTAG missing")
    for name in ("MUTAG", ptc_name() or "PTC_MR"):
        if not dataset_available(name):
            ok = False
            parts.append(f"{name} missing under {DATA_DIR}")
            continue
        differing = 0
        for k, cfg in enumerate(CV_GRID):
            a = cli_gram_bytes(tmp_path, f"{name}{k}a", name, *cfg, threads=1)
            b = cli_gram_bytes(tmp_path, f"{name}{k}b", name, *cfg, threads=1)
            c = cli_gram_bytes(tmp_path, f"{name}{k}c", name, *cfg, threads=3)
            differing += not (a == b == c)
        ok &= differing == 0
        parts.append(f"{name} {len(CV_GRID)} grid Gram files "
                     f"{'identical' if not differing else f'{differing} DIFFER'} "
                     "across reruns and thread counts")
    elapsed = time.perf_counter() - start
    verdict(10, "byte-identical reruns", ok, "; ".join(parts), elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
