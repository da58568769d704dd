"""Command-line front end.

Subcommands: ``gram`` (write a Gram matrix file), ``check`` (self-check
suite on random fixtures), ``cv`` (cross-validated accuracy) and ``stats``
(dataset summary).

Settings are layered: built-in defaults, then a ``key=value`` file given by
``--config``, then the header of a Gram file given by ``--replay``, then
``MLGK_<KEY>`` environment variables, then command-line flags.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time

import numpy as np

from . import classifier
from .datasets import dataset_stats, load_tu_dataset, one_hot_features
from .errors import DatasetFormatError
from .flg import flg_explicit, flg_kernelized, s_matrix_explicit
from .gram import GramMatrix, format_gram, read_gram
from .graph import permute, random_graph
from .linalg import cholesky
from .mlg_exact import MlsParams, gram_exact, naive_gram
from .mlg_linearized import PipelineParams, gram_linearized

log = logging.getLogger("mlgkernel")

ENV_PREFIX = "MLGK_"


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in _floats(text))


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _mode(text):
    if text not in ("exact", "linearized"):
        raise ValueError(f"mode must be exact or linearized, got {text!r}")
    return text


# key -> (parser, default)
SETTINGS = {
    "dataset": (str, "data"),
    "name": (str, "MUTAG"),
    "subsample": (int, 0),
    "mode": (_mode, "linearized"),
    "levels": (int, 2),
    "radius": (int, 1),
    "eta": (float, 0.1),
    "gamma": (float, 0.1),
    "tau": (float, 1e-8),
    "samples": (int, 100),
    "rank": (int, 10),
    "seed": (int, 0),
    "threads": (int, 1),
    "out": (str, ""),
    "c_grid": (_floats, classifier.DEFAULT_C_GRID),
    "folds": (int, 10),
    "repeats": (int, 10),
    "inner_folds": (int, 3),
    "gram": (str, ""),
    "sweep": (_bool, False),
    "grid_levels": (_ints, (1, 2, 3, 4)),
    "grid_radius": (_ints, (1, 2, 3, 4)),
    "grid_eta": (_floats, (0.01, 0.1, 1.0)),
    "grid_gamma": (_floats, (0.01, 0.1, 1.0)),
    "inject": (str, "none"),
}

# settings that determine the contents of a Gram file
GRAM_KEYS = ("dataset", "name", "subsample", "mode", "levels", "radius", "eta", "gamma",
             "tau", "samples", "rank", "seed")


class UsageError(Exception):
    pass


def _normalize_key(key):
    return key.strip().lower().replace("-", "_")


def _coerce(key, value, source):
    if key not in SETTINGS:
        raise UsageError(f"{source}: unknown setting {key!r}")
    try:
        return SETTINGS[key][0](value)
    except ValueError as exc:
        raise UsageError(f"{source}: bad value for {key}: {exc}") from None


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key = _normalize_key(key)
            out[key] = _coerce(key, value.strip(), f"{path}:{lineno}")
    return out


def read_replay_header(path):
    """Gram-determining settings recorded in a Gram file header."""
    try:
        meta = read_gram(path).metadata
    except OSError as exc:
        raise UsageError(f"cannot read Gram file: {exc}") from None
    return {k: _coerce(k, meta[k], path) for k in GRAM_KEYS if k in meta}


def read_env(environ):
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = _normalize_key(name[len(ENV_PREFIX):])
            out[key] = _coerce(key, value, f"environment variable {name}")
    return out


def resolve_settings(args, environ=None):
    """Merge defaults < config file < replay header < environment < flags."""
    environ = os.environ if environ is None else environ
    cfg = {k: default for k, (_, default) in SETTINGS.items()}
    if args.config:
        cfg.update(read_config_file(args.config))
    if getattr(args, "replay", None):
        cfg.update(read_replay_header(args.replay))
    cfg.update(read_env(environ))
    for key in SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = _coerce(key, value, f"--{key.replace('_', '-')}")
    return cfg


# -- helpers ------------------------------------------------------------------

def load_dataset(cfg):
    ds = load_tu_dataset(cfg["dataset"], cfg["name"])
    ds = one_hot_features(ds)
    k = cfg["subsample"]
    if k and k < len(ds):
        rng = np.random.default_rng(np.random.SeedSequence([cfg["seed"], 7]))
        ds = ds.subset(np.sort(rng.choice(len(ds), size=k, replace=False)))
    return ds


def compute_gram(graphs, cfg):
    if cfg["mode"] == "exact":
        params = MlsParams(levels=cfg["levels"], r0=cfg["radius"], eta=cfg["eta"],
                           gamma=cfg["gamma"], tau=cfg["tau"])
        return gram_exact(graphs, params, threads=cfg["threads"])
    params = PipelineParams(levels=cfg["levels"], r0=cfg["radius"], eta=cfg["eta"],
                            gamma=cfg["gamma"], tau=cfg["tau"], n_samples=cfg["samples"],
                            rank=cfg["rank"], seed=cfg["seed"])
    return gram_linearized(graphs, params, threads=cfg["threads"])


def gram_file_text(gram, cfg, n_graphs):
    """Header records every Gram-determining setting plus derived counts.

    Nothing run-dependent goes into the file: not the wall time, and not the
    raw evaluation count, which can include duplicate work when threads race
    on the same cache entry.
    """
    meta = {k: cfg[k] for k in GRAM_KEYS}
    meta["graphs"] = n_graphs
    for k in ("ranks", "cache_entries"):
        if k in gram.metadata:
            meta[k] = gram.metadata[k]
    return format_gram(GramMatrix(gram.values, meta))


# -- subcommands --------------------------------------------------------------

def cmd_gram(cfg, out=sys.stdout):
    ds = load_dataset(cfg)
    start = time.perf_counter()
    gram = compute_gram(ds.graphs, cfg)
    wall = time.perf_counter() - start
    text = gram_file_text(gram, cfg, len(ds))
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        with open(cfg["out"] + ".time", "w", encoding="utf-8") as f:
            f.write(f"wall_seconds={wall:.3f}\nthreads={cfg['threads']}\n")
    else:
        out.write(text)
    lo, hi = gram.min_max_eigenvalues()
    print(f"{len(ds)}x{len(ds)} Gram, eigenvalues [{lo:.3e}, {hi:.3e}], "
          f"wall time {wall:.2f} s", file=sys.stderr)
    return 0


def _random_graphs(rng, count, n_max, n_min=2, n_labels=3, weighted=False):
    return [random_graph(rng, int(rng.integers(n_min, n_max + 1)), p=0.35,
                         n_labels=n_labels, weighted=weighted) for _ in range(count)]


def run_checks(seed=0, inject="none"):
    """Property suite on random fixtures; returns ``[(name, ok, detail)]``."""
    results = []
    ss = np.random.SeedSequence(seed).spawn(8)

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))

    # S matrices are symmetric positive definite
    rng = np.random.default_rng(ss[0])
    worst_asym, pd_ok = 0.0, True
    for k, g in enumerate(_random_graphs(rng, 20, 10, weighted=True)):
        U = rng.normal(size=(4, g.n))
        S = s_matrix_explicit(g, U, 0.1, 0.1)
        if inject == "symmetry" and k == 0:
            S[0, 1] += 1.0
        worst_asym = max(worst_asym, float(np.abs(S - S.T).max()))
        try:
            cholesky(0.5 * (S + S.T))
        except ArithmeticError:
            pd_ok = False
    record("s_matrix_symmetric_pd", worst_asym <= 1e-12 and pd_ok,
           f"max |S - S^T| = {worst_asym:.2e}, positive definite: {pd_ok}")

    # kernelized FLG equals the explicit-feature FLG
    rng = np.random.default_rng(ss[1])
    worst = 0.0
    for _ in range(50):
        g1, g2 = _random_graphs(rng, 2, 10, n_min=1, weighted=True)
        d = int(rng.integers(1, 7))
        U1, U2 = rng.normal(size=(d, g1.n)), rng.normal(size=(d, g2.n))
        eta, gamma = rng.choice([0.01, 0.1, 1.0], size=2)
        a = flg_explicit(g1, U1, g2, U2, eta, gamma)
        b = flg_kernelized(g1, g2, eta=eta, gamma=gamma, payloads1=U1.T, payloads2=U2.T)
        worst = max(worst, abs(a - b))
    record("flg_kernelization", worst <= 1e-8, f"max |explicit - kernelized| = {worst:.2e}")

    # FLG is symmetric, in (0, 1], and 1 on identical inputs
    rng = np.random.default_rng(ss[2])
    worst = 0.0
    in_range = True
    for _ in range(30):
        g1, g2 = _random_graphs(rng, 2, 8)
        ab = flg_kernelized(g1, g2)
        ba = flg_kernelized(g2, g1)
        aa = flg_kernelized(g1, g1)
        worst = max(worst, abs(ab - ba), abs(aa - 1.0))
        in_range &= 0.0 < ab <= 1.0 + 1e-12
    record("flg_symmetry_normalization", worst <= 1e-9 and in_range,
           f"max deviation {worst:.2e}, values in (0, 1]: {in_range}")

    # MLG is invariant to vertex relabeling
    rng = np.random.default_rng(ss[3])
    params = MlsParams(levels=2, r0=1)
    worst = 0.0
    for g in _random_graphs(rng, 10, 9):
        h = permute(g, rng.permutation(g.n))
        worst = max(worst, abs(gram_exact([g, h], params).values[0, 1] - 1.0))
    record("mlg_permutation_invariance", worst <= 1e-9, f"max |k(g, pi g) - 1| = {worst:.2e}")

    # memoized recursion equals the plain recursion
    rng = np.random.default_rng(ss[4])
    graphs = _random_graphs(rng, 3, 6)
    fast = gram_exact(graphs, params).values
    slow = naive_gram(graphs, params)
    diff = float(np.abs(fast - slow).max())
    record("mlg_cache_transparency", diff <= 1e-12, f"max |cached - naive| = {diff:.2e}")

    # exact and linearized Grams: PSD, and equal when every vertex is sampled
    rng = np.random.default_rng(ss[5])
    graphs = _random_graphs(rng, 6, 7)
    exact = gram_exact(graphs, params)
    lo, hi = exact.min_max_eigenvalues()
    record("mlg_exact_psd", lo >= -1e-8 * hi, f"eigenvalues [{lo:.2e}, {hi:.2e}]")
    total = sum(g.n for g in graphs)
    full = gram_linearized(graphs, PipelineParams(levels=2, r0=1, n_samples=total,
                                                  rank=total, seed=seed))
    diff = float(np.abs(full.values - exact.values).max())
    record("linearized_matches_exact", diff <= 1e-4,
           f"N = {total}, max |linearized - exact| = {diff:.2e}")

    rng = np.random.default_rng(ss[6])
    graphs = _random_graphs(rng, 12, 10)
    lin = gram_linearized(graphs, PipelineParams(levels=2, r0=1, n_samples=30, rank=8,
                                                 seed=seed))
    lo, hi = lin.min_max_eigenvalues()
    record("mlg_linearized_psd", lo >= -1e-8 * hi, f"eigenvalues [{lo:.2e}, {hi:.2e}]")
    return results


def cmd_check(cfg, out=sys.stdout):
    if cfg["inject"] not in ("none", "symmetry"):
        raise UsageError(f"unknown fault injection mode {cfg['inject']!r}")
    results = run_checks(cfg["seed"], cfg["inject"])
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<30} {detail}", file=out)
    failed = [name for name, ok, _ in results if not ok]
    summary = {"passed": len(results) - len(failed), "failed": len(failed),
               "failures": failed, "seed": cfg["seed"]}
    print("SUMMARY " + json.dumps(summary), file=out)
    return 1 if failed else 0


def _cv_one(ds, cfg, gram=None):
    if gram is None:
        gram = compute_gram(ds.graphs, cfg)
    return classifier.cross_validate(
        gram, ds.labels, C_grid=cfg["c_grid"], folds=cfg["folds"], repeats=cfg["repeats"],
        seed=cfg["seed"], inner_folds=cfg["inner_folds"], threads=cfg["threads"])


def _print_report(ds, cfg, report, out):
    print(f"{'dataset':<10} {'graphs':>6} {'classes':>7}  {'mode':<10} accuracy", file=out)
    print(f"{ds.name:<10} {len(ds):>6} {len(report.classes):>7}  {cfg['mode']:<10} "
          f"{report.summary()}", file=out)
    values, counts = np.unique(report.chosen_C, return_counts=True)
    chosen = ", ".join(f"{v:g}:{c}" for v, c in zip(values, counts))
    print(f"folds={cfg['folds']} repeats={cfg['repeats']} chosen C counts {{{chosen}}}",
          file=out)
    if report.psd_shift:
        print(f"Gram repaired with {report.psd_shift:.3e}*I", file=out)


def cmd_cv(cfg, out=sys.stdout):
    ds = load_dataset(cfg)
    if cfg["gram"]:
        gram = read_gram(cfg["gram"])
        if gram.size != len(ds):
            raise DatasetFormatError(
                f"Gram file has {gram.size} rows but the dataset has {len(ds)} graphs")
        _print_report(ds, cfg, _cv_one(ds, cfg, gram), out)
        return 0
    if not cfg["sweep"]:
        _print_report(ds, cfg, _cv_one(ds, cfg), out)
        return 0
    print(f"{'levels':>6} {'radius':>6} {'eta':>6} {'gamma':>6}  accuracy", file=out)
    best = None
    for levels, radius, eta, gamma in itertools.product(
            cfg["grid_levels"], cfg["grid_radius"], cfg["grid_eta"], cfg["grid_gamma"]):
        run = dict(cfg, levels=levels, radius=radius, eta=eta, gamma=gamma)
        report = _cv_one(ds, run)
        print(f"{levels:>6} {radius:>6} {eta:>6g} {gamma:>6g}  {report.summary()}",
              file=out, flush=True)
        if best is None or report.mean > best[1].mean:
            best = (run, report)
    run, report = best
    print(f"best: levels={run['levels']} radius={run['radius']} eta={run['eta']:g} "
          f"gamma={run['gamma']:g}  {report.summary()}", file=out)
    return 0


def cmd_stats(cfg, out=sys.stdout):
    ds = load_dataset(cfg)
    st = dataset_stats(ds)
    classes = " ".join(f"{k}:{v}" for k, v in st.classes.items())
    print(f"{'dataset':<10} {'size':>5} {'classes':>7} {'alphabet':>8} {'nodes':>7} "
          f"{'edges':>7} {'arcs':>7} {'diameter':>8}", file=out)
    print(f"{ds.name:<10} {st.size:>5} {len(st.classes):>7} {st.label_alphabet:>8} "
          f"{st.mean_nodes:>7.2f} {st.mean_edges:>7.2f} {st.mean_edges_directed:>7.2f} "
          f"{st.mean_diameter:>8.2f}", file=out)
    print(f"class sizes: {classes}", file=out)
    return 0


COMMANDS = {"gram": cmd_gram, "check": cmd_check, "cv": cmd_cv, "stats": cmd_stats}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--replay", help="reuse the settings recorded in a Gram file header")
    common.add_argument("--dataset", help="directory holding the dataset files")
    common.add_argument("--name", help="dataset name, e.g. MUTAG")
    common.add_argument("--subsample", type=int, help="use a seeded random subset of graphs")
    common.add_argument("--mode", choices=("exact", "linearized"))
    common.add_argument("--levels", type=int)
    common.add_argument("--radius", type=int, help="radius of the first-level neighborhoods")
    common.add_argument("--eta", type=float, help="Laplacian regularizer")
    common.add_argument("--gamma", type=float, help="covariance regularizer")
    common.add_argument("--tau", type=float, help="relative eigenvalue cutoff")
    common.add_argument("--samples", type=int, help="sampled vertices per level")
    common.add_argument("--rank", type=int, help="retained eigenpairs per level")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mlgkernel", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("gram", parents=[common], help="write a Gram matrix file")
    p.add_argument("--out", help="output path (default: stdout)")
    p = sub.add_parser("check", parents=[common], help="run the self-check suite")
    p.add_argument("--inject", choices=("none", "symmetry"),
                   help="deliberately corrupt one S matrix")
    p = sub.add_parser("cv", parents=[common], help="cross-validated SVM accuracy")
    p.add_argument("--c-grid", dest="c_grid", help="comma-separated SVM C values")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--inner-folds", dest="inner_folds", type=int)
    p.add_argument("--gram", help="use a precomputed Gram file instead of computing one")
    p.add_argument("--sweep", action="store_const", const=True,
                   help="sweep the parameter grids and report the best")
    p.add_argument("--grid-levels", dest="grid_levels")
    p.add_argument("--grid-radius", dest="grid_radius")
    p.add_argument("--grid-eta", dest="grid_eta")
    p.add_argument("--grid-gamma", dest="grid_gamma")
    sub.add_parser("stats", parents=[common], help="print dataset statistics")
    return parser


def main(argv=None, environ=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_settings(args, environ)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mlgkernel: error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, out=out)
    except UsageError as exc:
        print(f"mlgkernel: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"mlgkernel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
