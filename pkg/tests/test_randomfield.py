"""KL sampling, the CDF map, embeddings, and Monte-Carlo norms."""

import math

import numpy as np
import pytest
from scipy import stats

import entrokit as ek


def gaussian_j2(j_max=64):
    return ek.KLMeasure.from_config(
        {"lambda": "j^-2a", "alpha": 1.0, "J": j_max, "law": "gaussian"})


# -- measures ---------------------------------------------------------------


def test_measure_validation():
    with pytest.raises(ValueError):
        ek.KLMeasure([], "gaussian")
    with pytest.raises(ValueError):
        ek.KLMeasure([1.0, 2.0], "gaussian")  # increasing
    with pytest.raises(ValueError):
        ek.KLMeasure([1.0, 0.0], "gaussian")  # nonpositive
    with pytest.raises(ValueError):
        ek.KLMeasure([1.0], "cauchy")


def test_density_bound_definition():
    g = ek.KLMeasure([4.0, 1.0], "gaussian")
    assert g.density_bound == pytest.approx(2.0)  # sqrt(lambda_1) dominates
    u = ek.KLMeasure([0.01], "uniform")
    assert u.density_bound == pytest.approx(1 / (2 * math.sqrt(3)))


def test_uniform_law_unit_variance():
    m = ek.KLMeasure([1.0], "uniform")
    draws = ek.sample(m, seed=5, count=200000)
    assert np.var(draws) == pytest.approx(1.0, abs=0.02)


# -- sampling --------------------------------------------------------------


def test_sample_second_moment():
    m = ek.KLMeasure([1.0, 0.25], "gaussian")
    draws = ek.sample(m, seed=11, count=100000)
    nsq = np.sum(draws**2, axis=1)
    se = np.std(nsq, ddof=1) / math.sqrt(len(nsq))
    assert abs(np.mean(nsq) - 1.25) <= 3 * se


def test_sample_determinism():
    m = gaussian_j2(8)
    a = ek.sample(m, seed=42, count=16)
    b = ek.sample(m, seed=42, count=16)
    assert a.tobytes() == b.tobytes()
    c = ek.sample(m, seed=43, count=16)
    assert a.tobytes() != c.tobytes()


def test_sample_count_validation():
    with pytest.raises(ValueError):
        ek.sample(gaussian_j2(4), seed=0, count=0)


def test_torus_synthesis_parseval():
    # grid mean of u^2 equals the coefficient norm for band-limited fields
    m = ek.KLMeasure([1.0, 0.5, 0.25, 0.125], "gaussian")
    coeffs = ek.sample(m, seed=21, count=16)
    fields = ek.synthesize_torus(coeffs, resolution=32)
    grid_norms = np.mean(fields**2, axis=1)
    assert np.allclose(grid_norms, np.sum(coeffs**2, axis=1), atol=1e-12)


def test_torus_synthesis_constant_mode():
    field = ek.synthesize_torus(np.array([[0.4]]), resolution=8)
    assert np.allclose(field, 0.4)


# -- the CDF map -------------------------------------------------------------


def test_cdf_map_symmetry_point():
    m = gaussian_j2(4)
    assert ek.cdf_map(m, np.zeros((1, 4)), 1)[0, 0] == pytest.approx(0.5)


def test_cdf_map_uniform_endpoint():
    m = ek.KLMeasure([2.0], "uniform")
    top = math.sqrt(3 * 2.0)  # sqrt(lambda_1) * sqrt(3)
    assert ek.cdf_map(m, np.array([[top]]), 1)[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("law", ["gaussian", "uniform"])
def test_cdf_map_marginal_uniformity(law):
    m = ek.KLMeasure(np.arange(1, 5, dtype=float)[::-1], law)
    coords = ek.cdf_map(m, ek.sample(m, seed=3, count=10000), 2)
    for axis in range(2):
        assert stats.kstest(coords[:, axis], "uniform").pvalue > 0.01


def test_cdf_map_dim_validation():
    m = gaussian_j2(4)
    with pytest.raises(ek.DimensionExceedsTruncation):
        ek.cdf_map(m, np.zeros((1, 4)), 5)


# -- grid functions and embedding ----------------------------------------------


def test_grid_function_multilinear_exactness():
    # multilinear data is reproduced exactly between nodes
    f = ek.GridFunction01.from_callable(
        lambda x: 2.0 * x[:, 0] * x[:, 1] - x[:, 1], 2, 4)
    pts = np.array([[0.13, 0.77], [0.5, 0.25], [1.0, 1.0]])
    expect = 2.0 * pts[:, 0] * pts[:, 1] - pts[:, 1]
    assert np.allclose(f(pts), expect, atol=1e-12)


def test_grid_function_quadrature_exact_for_multilinear():
    f = ek.GridFunction01.from_callable(lambda x: x[:, 0], 1, 8)
    assert f.quadrature_abs_pow(1, refine=1) == pytest.approx(0.5, abs=1e-14)


def test_embed_constant():
    m = gaussian_j2(8)
    emb = ek.embed(ek.GridFunction01.constant(0.7), m)
    vals = emb(ek.sample(m, seed=9, count=50))
    assert np.allclose(vals, 0.7)
    est = ek.lp_norm_mc(emb, m, 2, 1000, seed=1)
    assert est.estimate == pytest.approx(0.7, abs=1e-12) and est.stderr == 0.0


def test_embed_range_containment():
    m = gaussian_j2(8)
    f = ek.GridFunction01.from_callable(lambda x: x[:, 0] ** 2, 1, 16)
    emb = ek.embed(f, m)
    vals = emb(ek.sample(m, seed=2, count=2000))
    assert vals.min() >= f.values.min() - 1e-12
    assert vals.max() <= f.values.max() + 1e-12


def test_coordinate_function_moments():
    m = gaussian_j2()
    f = ek.GridFunction01.from_callable(lambda x: x[:, 0], 1, 16, lipschitz=1.0)
    emb = ek.embed(f, m)
    est1 = ek.lp_norm_mc(emb, m, 1, 100000, seed=5)
    assert abs(est1.estimate - 0.5) <= 3 * est1.stderr  # integral of x on [0,1]
    est2 = ek.lp_norm_mc(emb, m, 2, 100000, seed=5)
    assert abs(est2.estimate - math.sqrt(1 / 3)) <= 3 * est2.stderr


def test_lp_norm_validation():
    m = gaussian_j2(4)
    emb = ek.embed(ek.GridFunction01.constant(1.0), m)
    with pytest.raises(ValueError):
        ek.lp_norm_mc(emb, m, math.inf, 1000, seed=0)
    with pytest.raises(ValueError):
        ek.lp_norm_mc(emb, m, 2, 50, seed=0)


# -- isometry -----------------------------------------------------------------


def test_isometry_constant_zscore_zero():
    rep = ek.isometry_check(ek.GridFunction01.constant(0.7), gaussian_j2(8),
                            2, 1000, seed=1)
    assert rep.zscore == 0.0


def test_isometry_coordinate_function():
    f = ek.GridFunction01.from_callable(lambda x: x[:, 0], 1, 16, lipschitz=1.0)
    rep = ek.isometry_check(f, gaussian_j2(), 2, 100000, seed=5)
    assert abs(rep.zscore) <= 3
    assert rep.quad_moment == pytest.approx(1 / 3, abs=1e-4)


def test_isometry_bump_member():
    code = ek.gilbert_varshamov(4)
    fam = ek.build_bump_family(2, 2, 24, code)
    f = ek.GridFunction01(2, fam.member_on_nodes(1), lipschitz=1.0)
    rep = ek.isometry_check(f, gaussian_j2(), 2, 100000, seed=8)
    assert abs(rep.zscore) <= 3


def test_moment_zscore_degenerate_cases():
    assert ek.randomfield.moment_zscore(0.5, 0.5 + 1e-15, 0.0) == 0.0
    assert ek.randomfield.moment_zscore(1.0, 0.0, 0.0) == math.inf
    assert ek.randomfield.moment_zscore(1.0, 0.0, 0.5) == pytest.approx(2.0)


# -- Lipschitz transport ---------------------------------------------------------


def test_transport_quotient_within_declared_bound():
    m = gaussian_j2()
    f = ek.GridFunction01.from_callable(lambda x: x[:, 0], 1, 16, lipschitz=1.0)
    emb = ek.embed(f, m)
    bound = emb.lipschitz_bound
    assert bound == pytest.approx(m.density_bound / math.sqrt(m.eigenvalues[0]))
    assert ek.transport_quotient_max(emb, 10000, seed=9) <= bound + 1e-9


def test_transport_quotient_d1_bump():
    m = gaussian_j2()
    code = ek.greedy_sign_code(2, 1, 2)
    fam = ek.build_bump_family(1, 2, 16, code)
    f = ek.GridFunction01(1, fam.member_on_nodes(0), lipschitz=1.0)
    emb = ek.embed(f, m)
    assert ek.transport_quotient_max(emb, 10000, seed=4) <= emb.lipschitz_bound + 1e-9
