import numpy as np
import pytest

from mlgkernel.errors import InvalidInputError
from mlgkernel.gram import format_gram
from mlgkernel.mlg_exact import MlsParams, gram_exact
from mlgkernel.mlg_linearized import (PipelineParams, gram_linearized, linearized_pipeline,
                                      sample_vertices)

from conftest import random_graphs


def full_params(total, **kw):
    return PipelineParams(n_samples=total, rank=total, **kw)


def test_full_sample_reproduces_exact(rng):
    graphs = random_graphs(rng, 6, 7, n_min=2)
    total = sum(g.n for g in graphs)
    for eta in (0.01, 0.1, 1.0):
        lin = gram_linearized(graphs, full_params(total, eta=eta, gamma=eta))
        exact = gram_exact(graphs, MlsParams(levels=2, r0=1, eta=eta, gamma=eta))
        np.testing.assert_allclose(lin.values, exact.values, atol=1e-9)


def test_error_shrinks_with_samples(rng):
    graphs = random_graphs(rng, 8, 8, n_min=3)
    total = sum(g.n for g in graphs)
    exact = gram_exact(graphs, MlsParams()).values
    errs = []
    for n in (total // 8, total // 2, total):
        lin = gram_linearized(graphs, PipelineParams(n_samples=n, rank=n, seed=1)).values
        errs.append(np.abs(lin - exact).max())
    assert errs[-1] <= 1e-9
    assert errs[0] > errs[-1]


def test_gram_unit_diagonal_and_psd(rng):
    graphs = random_graphs(rng, 15, 10, n_min=2)
    G = gram_linearized(graphs, PipelineParams(n_samples=20, rank=6))
    np.testing.assert_allclose(np.diag(G.values), 1.0, atol=1e-12)
    assert np.array_equal(G.values, G.values.T)
    assert G.is_psd(1e-8)


def test_deterministic_and_thread_independent(rng):
    graphs = random_graphs(rng, 10, 9, n_min=2)
    params = PipelineParams(n_samples=15, rank=5, seed=3)
    a = format_gram(gram_linearized(graphs, params))
    b = format_gram(gram_linearized(graphs, params, threads=3))
    c = format_gram(gram_linearized(graphs, PipelineParams(n_samples=15, rank=5, seed=4)))
    assert a == b
    assert a != c


def test_level_records(rng):
    graphs = random_graphs(rng, 5, 8, n_min=3)
    levels, S, layout = linearized_pipeline(graphs, PipelineParams(levels=3, n_samples=10,
                                                                   rank=4))
    assert [lv.level for lv in levels] == [1, 2, 3]
    for lv in levels:
        assert lv.features.shape == (layout.total, lv.rank)
        assert len(set(lv.sample.tolist())) == 10
        assert np.all(np.diff(lv.eigenvalues) <= 0)
    assert S.shape == (5, levels[-1].rank, levels[-1].rank)


def test_samples_are_nested_prefixes():
    small = sample_vertices(50, 5, np.random.default_rng(9))
    large = sample_vertices(50, 20, np.random.default_rng(9))
    assert np.array_equal(small, large[:5])


def test_sampling_is_uniform():
    # every id is drawn with probability n/N; counts are Binomial(draws, n/N)
    N, n, draws = 20, 5, 4000
    rng = np.random.default_rng(0)
    counts = np.zeros(N)
    for _ in range(draws):
        s = sample_vertices(N, n, rng)
        assert len(set(s.tolist())) == n
        counts[s] += 1
    p = n / N
    sd = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 5 * sd)


def test_invalid_params():
    with pytest.raises(InvalidInputError):
        PipelineParams(n_samples=3, rank=5)
    with pytest.raises(InvalidInputError):
        PipelineParams(rank=0, n_samples=1)
    with pytest.raises(InvalidInputError):
        sample_vertices(4, 5, 0)


def test_too_many_samples(rng):
    graphs = random_graphs(rng, 2, 3)
    with pytest.raises(InvalidInputError):
        gram_linearized(graphs, PipelineParams(n_samples=100, rank=10))
