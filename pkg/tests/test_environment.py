import math

import numpy as np
import pytest

from rstre.environment import (Bounded, Environment, Gaussian, NegExpInv,
                               PowerTail, Uniform01, UnsupportedLawError,
                               WeightedGraphView, bernstein_tail_bound,
                               edge_weight, inverse_cdf, law_to_string,
                               open_subgraph, paley_zygmund_lower_bound,
                               parse_law, sample_environment, weight_stats)
from rstre.graph import MultiGraph, build_complete
from rstre.rng import keyed_uniforms


def test_sample_environment_uniform_bounds():
    g = build_complete(20)
    env = sample_environment(Uniform01(), g, 5)
    assert np.all((env.omega >= 0) & (env.omega <= 1))


def test_sample_environment_deterministic():
    g = build_complete(12)
    e1 = sample_environment(Uniform01(), g, 123)
    e2 = sample_environment(Uniform01(), g, 123)
    assert np.array_equal(e1.omega, e2.omega)
    e3 = sample_environment(Uniform01(), g, 124)
    assert not np.array_equal(e1.omega, e3.omega)


def test_keyed_uniform_mean_clt():
    # CLT oracle: mean of 1e6 uniforms is within 0.002 of 1/2 (about 7 sigma)
    u = keyed_uniforms(99, "clt", np.arange(10 ** 6))
    assert abs(u.mean() - 0.5) < 0.002


def test_keyed_uniforms_order_independent():
    ids = np.arange(1000)
    u1 = keyed_uniforms(1, "x", ids)
    u2 = keyed_uniforms(1, "x", ids[::-1])[::-1]
    assert np.array_equal(u1, u2)


def test_edge_weight_values():
    g = MultiGraph(2, [(0, 1)])
    assert edge_weight(Environment(g, np.array([0.7])), 0, 0.0) == 1.0
    assert abs(edge_weight(Environment(g, np.array([1.0])), 0, 1.0)
               - math.exp(-1)) < 1e-15
    assert abs(edge_weight(Environment(g, np.array([-1.0])), 0, 2.0)
               - math.e ** 2) < 1e-12


def test_inverse_cdf_uniform():
    assert inverse_cdf(Uniform01(), 0.3) == 0.3


def test_inverse_cdf_power_tail_alpha_one_reduces_to_uniform():
    law = PowerTail(alpha=1, c_mu=1, rho=1)
    assert inverse_cdf(law, 0.25) == 0.25


def test_inverse_cdf_power_tail_alpha_two():
    law = PowerTail(alpha=2, c_mu=1, rho=1)
    assert abs(inverse_cdf(law, 0.25) - 0.5) < 1e-15


def test_power_tail_inverse_cdf_identity_on_pinned_range():
    law = PowerTail(alpha=1.7, c_mu=0.8, rho=0.9)
    ts = np.linspace(0, law.rho, 200)
    back = law.inverse_cdf(law.cdf(ts))
    assert np.max(np.abs(back - ts)) < 1e-12


def test_power_tail_requires_consistent_mass():
    with pytest.raises(ValueError):
        PowerTail(alpha=1, c_mu=2.0, rho=1.0)


def test_neg_exp_inv_support_and_inverse():
    law = NegExpInv()
    ps = np.linspace(0.05, 1.0, 50)
    xs = law.inverse_cdf(ps)
    assert np.all(xs <= -math.e + 1e-9)
    assert np.allclose(law.cdf(xs), ps, atol=1e-12)


def test_open_subgraph_extremes():
    g = build_complete(5)
    env = sample_environment(Uniform01(), g, 8)
    full, _ = open_subgraph(g, env, Uniform01(), 1.0)
    assert full.m == g.m
    empty, _ = open_subgraph(g, env, Uniform01(), 0.0)
    assert empty.m == 0


def test_open_subgraph_threshold():
    g = MultiGraph(3, [(0, 1), (1, 2)])
    env = Environment(g, np.array([0.2, 0.7]))
    sub, emap = open_subgraph(g, env, Uniform01(), 0.5)
    assert sub.m == 1 and emap[0] == 0 and emap[1] is None


def test_open_subgraph_monotone_coupling():
    g = build_complete(10)
    env = sample_environment(Uniform01(), g, 77)
    prev = set()
    for p in np.linspace(0, 1, 21):
        _, emap = open_subgraph(g, env, Uniform01(), p)
        kept = {e for e in range(g.m) if emap[e] is not None}
        assert prev <= kept
        prev = kept


def test_weight_stats_uniform_beta_one():
    st = weight_stats(Uniform01(), 1.0)
    assert abs(st.xi - (1 - math.exp(-1))) < 1e-14
    second = (1 - math.exp(-2)) / 2
    assert abs(st.sigma2 - (second - st.xi ** 2)) < 1e-14


def test_weight_stats_uniform_small_beta_limit():
    st = weight_stats(Uniform01(), 1e-9)
    assert abs(st.xi - 1.0) < 1e-8
    assert st.sigma2 < 1e-9


def test_weight_stats_uniform_bounded_by_inverse_beta():
    assert weight_stats(Uniform01(), 10.0).xi <= 0.1


def test_weight_stats_power_tail_matches_uniform_special_case():
    # alpha = c_mu = rho = 1 is the uniform law; quadrature vs closed form
    st_u = weight_stats(Uniform01(), 3.7)
    st_p = weight_stats(PowerTail(alpha=1, c_mu=1, rho=1), 3.7)
    assert abs(st_u.xi - st_p.xi) < 1e-10
    assert abs(st_u.sigma2 - st_p.sigma2) < 1e-10


def test_weight_stats_bounded_law():
    st = weight_stats(Bounded(0.5, 1.5), 2.0)
    expect = (math.exp(-1.0) - math.exp(-3.0)) / 2.0
    assert abs(st.xi - expect) < 1e-14
    assert abs(st.K - math.exp(-1.0)) < 1e-14


def test_weight_stats_rejects_gaussian():
    with pytest.raises(UnsupportedLawError):
        weight_stats(Gaussian(), 2.0)
    with pytest.raises(UnsupportedLawError):
        weight_stats(NegExpInv(), 2.0)


def test_bernstein_bound_reference_value():
    val = bernstein_tail_bound(900, 1.0, 1.0, Uniform01())
    assert abs(val - 2 * math.exp(-100)) < 1e-60


def test_bernstein_bound_vacuous_at_zero_delta():
    assert bernstein_tail_bound(100, 1e-12, 1.0, Uniform01()) > 2 - 1e-9


def test_bernstein_bound_monotone():
    vals_m = [bernstein_tail_bound(m, 0.5, 2.0, Uniform01())
              for m in (10, 100, 1000)]
    assert vals_m[0] > vals_m[1] > vals_m[2]
    vals_b = [bernstein_tail_bound(100, 0.5, b, Uniform01())
              for b in (1.0, 5.0, 50.0)]
    assert vals_b[0] < vals_b[1] < vals_b[2]


def test_bernstein_bound_power_tail_is_valid():
    # validity oracle: simulate the deviation frequency and compare
    law = PowerTail(alpha=2, c_mu=1, rho=1)
    bound = bernstein_tail_bound(2000, 0.3, 4.0, law)
    rng = np.random.default_rng(0)
    st = weight_stats(law, 4.0)
    hits = 0
    trials = 300
    for _ in range(trials):
        om = law.inverse_cdf(rng.random(2000))
        s = np.exp(-4.0 * om).sum()
        hits += abs(s - 2000 * st.xi) >= 0.3 * 2000 * st.xi
    freq = hits / trials
    assert freq <= bound + 3 * math.sqrt(max(bound * (1 - bound), 1e-9) / trials)


@pytest.mark.parametrize("beta", [1.0, 10.0, 100.0])
@pytest.mark.parametrize("delta", [0.1, 0.3])
def test_bernstein_deviation_frequency(beta, delta):
    # statistical test at 99 percent confidence: the empirical deviation
    # frequency stays below the stated tail bound
    m, trials = 10 ** 5, 60
    st = weight_stats(Uniform01(), beta)
    bound = bernstein_tail_bound(m, delta, beta, Uniform01())
    rng = np.random.default_rng(int(beta * 1000 + delta * 10))
    hits = 0
    for _ in range(trials):
        s = np.exp(-beta * rng.random(m)).sum()
        hits += abs(s - m * st.xi) >= delta * m * st.xi
    assert hits / trials <= bound + 2.6 * math.sqrt(
        max(bound * (1 - bound), 1.0 / trials) / trials)


@pytest.mark.parametrize("t", [0.0, 0.5])
def test_paley_zygmund_floor(t):
    beta = 2.5
    st = weight_stats(Uniform01(), beta)
    second = st.sigma2 + st.xi ** 2
    floor = paley_zygmund_lower_bound(st.xi, second, t)
    rng = np.random.default_rng(17)
    z = np.exp(-beta * rng.random(10 ** 5))
    emp = float((z > t * st.xi).mean())
    se = math.sqrt(emp * (1 - emp) / 10 ** 5)
    assert emp + 3 * se + 1e-12 >= floor


def test_parse_law_round_trip():
    for text in ("uniform01", "power_tail alpha=2 c_mu=1 rho=1",
                 "gaussian mean=0 variance=1", "bounded a=0 b=1",
                 "neg_exp_inv"):
        law = parse_law(text)
        assert parse_law(law_to_string(law)) == law


def test_weighted_view_rescaling_is_invariant_for_probability():
    # the scaled weights shift the log range; w * R stays put
    from rstre.electric import kirchhoff_edge_probability

    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 3)
    small = WeightedGraphView(g, env.omega, 2.0)
    big = WeightedGraphView(g, env.omega, 2000.0)
    assert big.scaled_weights()[1] != 0.0
    p_small = kirchhoff_edge_probability(small, 0)
    assert 0.0 <= p_small <= 1.0
    p_big = kirchhoff_edge_probability(big, 0)
    assert 0.0 <= p_big <= 1.0


def test_environment_requires_finite_values():
    g = MultiGraph(2, [(0, 1)])
    with pytest.raises(ValueError):
        Environment(g, np.array([math.inf]))
