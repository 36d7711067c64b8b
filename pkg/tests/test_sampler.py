import math
import os

import numpy as np
import pytest
from scipy.stats import chisquare, ks_2samp

from rstre.environment import (Environment, Uniform01, WeightedGraphView,
                               sample_environment)
from rstre.graph import (GraphError, MultiGraph, build_box, build_complete,
                         build_from_edge_list)
from rstre.rng import RngStream
from rstre.sampler import (DEFAULT_STEP_CAP, NonterminationSuspected,
                           TooLargeError, TreeSampler, aldous_broder_sample,
                           complete_edge_ids, complete_mst, complete_omega,
                           complete_wilson, enumerate_spanning_trees,
                           exact_tree_law, gap_restricted_view,
                           gibbs_sequential_sample, kruskal_mst,
                           lazy_random_walk, loop_erase,
                           matrix_tree_count, matrix_tree_partition_function,
                           mst_mass_exact, pair_list_diameter, prim_mst,
                           wilson_sample)

DATA = os.path.join(os.path.dirname(__file__), "data")


# --------------------------------------------------------------------------
# walks and loop erasure
# --------------------------------------------------------------------------

def test_lazy_walk_immediate_stop():
    g = MultiGraph(2, [(0, 1)])
    wg = WeightedGraphView(g, np.zeros(1), 0.0)
    path = lazy_random_walk(wg, 0, lambda v, p: True, RngStream(0))
    assert path == [0]


def test_lazy_walk_single_edge_mean_hitting_steps():
    # oracle: the lazy kernel moves across the single edge with probability
    # one half per step, so the hitting step count is geometric with mean 2
    g = MultiGraph(2, [(0, 1)])
    wg = WeightedGraphView(g, np.zeros(1), 0.0)
    s = RngStream(1)
    total = 0
    runs = 20000
    for _ in range(runs):
        path = lazy_random_walk(wg, 0, lambda v, p: v == 1, s)
        total += len(path) - 1
    mean = total / runs
    sigma = math.sqrt(2.0 / runs)  # geometric(1/2) variance
    assert abs(mean - 2.0) < 4 * sigma


def test_lazy_walk_one_step_kernel_on_weighted_star():
    g = MultiGraph(4, [(0, 1), (0, 2), (0, 3)])
    omega = np.array([0.1, 0.7, 0.3])
    beta = 1.4
    wg = WeightedGraphView(g, omega, beta)
    w = np.exp(-beta * omega)
    s = RngStream(5)
    counts = np.zeros(4)
    trials = 200000
    for _ in range(trials):
        path = lazy_random_walk(wg, 0, lambda v, p: len(p) == 2, s)
        counts[path[1]] += 1
    for v in (1, 2, 3):
        expect = 0.5 * w[v - 1] / w.sum()
        se = math.sqrt(expect * (1 - expect) / trials)
        assert abs(counts[v] / trials - expect) < 4 * se


def test_lazy_walk_step_cap():
    g = MultiGraph(3, [(0, 1), (1, 2)])
    wg = WeightedGraphView(g, np.zeros(2), 0.0)
    with pytest.raises(NonterminationSuspected):
        lazy_random_walk(wg, 0, lambda v, p: False, RngStream(2), step_cap=50)


def test_loop_erase_self_avoiding_identity():
    assert loop_erase([3, 1, 4, 2]) == [3, 1, 4, 2]


def test_loop_erase_reference_cases():
    # worked out by hand from the chronological erasure rule
    assert loop_erase([0, 1, 0, 2]) == [0, 2]
    assert loop_erase([0, 1, 2, 1, 3]) == [0, 1, 3]


def test_loop_erase_matches_stack_erasure():
    # the forward largest-index rule agrees with the classic stack algorithm
    def stack_erase(path):
        out, where = [], {}
        for v in path:
            if v in where:
                for x in out[where[v] + 1:]:
                    del where[x]
                del out[where[v] + 1:]
            else:
                where[v] = len(out)
                out.append(v)
        return out

    rng = np.random.default_rng(0)
    for _ in range(300):
        path = rng.integers(0, 6, size=rng.integers(1, 30)).tolist()
        assert loop_erase(path) == stack_erase(path)


def test_loop_erase_endpoints_and_self_avoidance():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 25))
        path = rng.integers(0, 5, size=n).tolist()
        out = loop_erase(path)
        assert out[0] == path[0] and out[-1] == path[-1]
        assert len(set(out)) == len(out)


# --------------------------------------------------------------------------
# exact laws and enumeration
# --------------------------------------------------------------------------

def test_enumerate_k3():
    assert len(enumerate_spanning_trees(build_complete(3))) == 3


def test_enumerate_k4_cayley():
    assert len(enumerate_spanning_trees(build_complete(4))) == 16


def test_enumerate_grid_matches_matrix_tree():
    g = build_box(1, 2)
    assert len(enumerate_spanning_trees(g)) == 192 == matrix_tree_count(g)


def test_enumerate_cap():
    with pytest.raises(TooLargeError):
        enumerate_spanning_trees(build_complete(8), cap=1000)


def test_partition_function_unweighted_k3():
    wg = WeightedGraphView(build_complete(3), np.zeros(3), 0.0)
    assert abs(matrix_tree_partition_function(wg) - math.log(3)) < 1e-12


def test_partition_function_weighted_k3_closed_form():
    g = build_complete(3)
    w = np.array([0.4, 1.7, 2.2])
    wg = WeightedGraphView(g, -np.log(w), 1.0)
    want = math.log(w[0] * w[1] + w[0] * w[2] + w[1] * w[2])
    assert abs(matrix_tree_partition_function(wg) - want) < 1e-12


def test_partition_function_grid_beta_zero():
    wg = WeightedGraphView(build_box(1, 2), np.zeros(12), 0.0)
    assert abs(matrix_tree_partition_function(wg) - math.log(192)) < 1e-10


def test_exact_tree_law_uniform_at_beta_zero():
    wg = WeightedGraphView(build_complete(4), np.linspace(0, 1, 6), 0.0)
    law = exact_tree_law(wg)
    assert np.allclose(law.probs, 1 / 16)
    assert abs(law.probs.sum() - 1) < 1e-12


def test_exact_tree_law_concentrates_on_mst():
    g = MultiGraph(2, [(0, 1), (0, 1), (0, 1)])
    omega = np.array([0.1, 1.0, 10.0])
    law = exact_tree_law(WeightedGraphView(g, omega, 200.0))
    assert law.probs[law.index_of((0,))] > 0.999999


def test_exact_tree_law_marginals_match_kirchhoff():
    from rstre.electric import kirchhoff_edge_probability
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 21)
    wg = WeightedGraphView(g, env.omega, 1.0)
    law = exact_tree_law(wg)
    marg = law.edge_marginals()
    for e in range(g.m):
        assert abs(marg[e] - kirchhoff_edge_probability(wg, e)) < 1e-9


def test_gibbs_scale_invariance():
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 30)
    law1 = exact_tree_law(WeightedGraphView(g, env.omega, 2.0))
    law2 = exact_tree_law(WeightedGraphView(g, env.omega + 5.0, 2.0))
    assert np.allclose(law1.probs, law2.probs, atol=1e-12)


def test_mst_probability_increases_with_beta():
    rng = np.random.default_rng(7)
    for trial in range(20):
        g = build_complete(5)
        omega = rng.random(g.m)
        probs = []
        for beta in np.arange(0.0, 5.01, 0.5):
            law = exact_tree_law(WeightedGraphView(g, omega, beta))
            mf = kruskal_mst(g, Environment(g, omega))
            probs.append(law.probs[law.index_of(mf.edges)])
        assert all(b > a for a, b in zip(probs, probs[1:]))


def test_cayley_ratio_bound():
    # the two-point probability ratio over a doubling of beta never exceeds
    # the total tree count
    rng = np.random.default_rng(8)
    for n in (5, 6, 7):
        g = build_complete(n)
        omega = rng.random(g.m)
        mf = kruskal_mst(g, Environment(g, omega))
        for beta in (0.5, 1.0, 3.0):
            l1 = exact_tree_law(WeightedGraphView(g, omega, beta))
            l2 = exact_tree_law(WeightedGraphView(g, omega, 2 * beta))
            i = l1.index_of(mf.edges)
            ratio = l2.probs[i] / l1.probs[i]
            assert ratio <= n ** (n - 2) * (1 + 1e-9)


# --------------------------------------------------------------------------
# MST algorithms
# --------------------------------------------------------------------------

def test_kruskal_diamond_fixture():
    g, omega = build_from_edge_list(os.path.join(DATA, "diamond_fixture.txt"))
    mf = kruskal_mst(g, Environment(g, omega))
    # edges (0,1), (0,2), (0,3) in the file ordering
    assert mf.edges == (0, 1, 2)
    assert mf.connected and not mf.ties_perturbed


def test_prim_three_parallel_edges():
    g = MultiGraph(2, [(0, 1), (0, 1), (0, 1)])
    mf = prim_mst(g, Environment(g, np.array([0.1, 1.0, 10.0])))
    assert mf.edges == (0,)


def test_kruskal_path_graph():
    g = MultiGraph(4, [(0, 1), (1, 2), (2, 3)])
    mf = kruskal_mst(g, Environment(g, np.array([0.5, 0.1, 0.9])))
    assert mf.edges == (0, 1, 2)


def test_kruskal_star():
    g = MultiGraph(4, [(0, 1), (0, 2), (0, 3)])
    mf = prim_mst(g, Environment(g, np.array([0.5, 0.1, 0.9])))
    assert mf.edges == (0, 1, 2)


def test_kruskal_equals_prim_on_random_instances():
    rng = np.random.default_rng(9)
    for trial in range(100):
        g = build_complete(int(rng.integers(3, 9)))
        env = Environment(g, rng.random(g.m))
        assert kruskal_mst(g, env).edges == prim_mst(g, env).edges


def test_kruskal_disconnected_forest_flag():
    g = MultiGraph(4, [(0, 1), (2, 3)])
    mf = kruskal_mst(g, Environment(g, np.array([0.3, 0.8])))
    assert not mf.connected and mf.edges == (0, 1)
    with pytest.raises(GraphError):
        mf.tree


def test_kruskal_tie_flag():
    g = build_complete(3)
    mf = kruskal_mst(g, Environment(g, np.array([0.5, 0.5, 0.9])))
    assert mf.ties_perturbed


def test_mst_is_argmin_over_enumeration():
    rng = np.random.default_rng(10)
    for trial in range(20):
        g = build_complete(5)
        omega = rng.random(g.m)
        mf = kruskal_mst(g, Environment(g, omega))
        best = min(enumerate_spanning_trees(g),
                   key=lambda t: sum(omega[e] for e in t))
        assert mf.edges == best


def test_mst_max_tree_weight_on_complete_graph():
    # almost surely every tree disorder sits below 3 log n / n
    n, hits, trials = 200, 0, 40
    for seed in range(trials):
        g = build_complete(n)
        env = sample_environment(Uniform01(), g, seed)
        mf = kruskal_mst(g, env)
        hits += max(env.omega[e] for e in mf.edges) <= 3 * math.log(n) / n
    assert hits / trials >= 0.95


# --------------------------------------------------------------------------
# tree samplers against the exact law
# --------------------------------------------------------------------------

def test_wilson_tree_input_graph_returns_it():
    g = MultiGraph(4, [(0, 1), (1, 2), (1, 3)])
    wg = WeightedGraphView(g, np.array([0.3, 0.6, 0.9]), 1.0)
    t = wilson_sample(wg, RngStream(3))
    assert t.edges == (0, 1, 2)


def test_wilson_uniform_k3_frequencies():
    g = build_complete(3)
    wg = WeightedGraphView(g, np.zeros(3), 0.0)
    ts = TreeSampler(wg)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    counts = np.zeros(3)
    s = RngStream(4)
    samples = 30000
    for _ in range(samples):
        counts[idx[ts.wilson_edges(s)]] += 1
    freq = counts / samples
    assert np.all(np.abs(freq - 1 / 3) < 0.011)


def test_wilson_weighted_k4_chi_square():
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 77)
    wg = WeightedGraphView(g, env.omega, 1.0)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    ts = TreeSampler(wg)
    counts = np.zeros(16)
    s = RngStream(5)
    samples = 100000
    for _ in range(samples):
        counts[idx[ts.wilson_edges(s)]] += 1
    assert chisquare(counts, law.probs * samples).pvalue > 0.001


def test_wilson_order_invariance():
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 78)
    wg = WeightedGraphView(g, env.omega, 1.0)
    ts = TreeSampler(wg)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    samples = 40000
    c1, c2 = np.zeros(16), np.zeros(16)
    s1, s2 = RngStream(6), RngStream(7)
    order = [2, 0, 3, 1]
    for _ in range(samples):
        c1[idx[ts.wilson_edges(s1)]] += 1
        c2[idx[ts.wilson_edges(s2, root=2, order=order)]] += 1
    assert chisquare(c1, c2 * (c1.sum() / c2.sum())).pvalue > 0.001


def test_aldous_broder_single_edge():
    g = MultiGraph(2, [(0, 1)])
    wg = WeightedGraphView(g, np.array([0.4]), 1.0)
    assert aldous_broder_sample(wg, RngStream(8)).edges == (0,)


def test_aldous_broder_uniform_k3():
    g = build_complete(3)
    wg = WeightedGraphView(g, np.zeros(3), 0.0)
    ts = TreeSampler(wg)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    counts = np.zeros(3)
    s = RngStream(9)
    samples = 30000
    for _ in range(samples):
        counts[idx[ts.aldous_broder_edges(s)]] += 1
    assert chisquare(counts, np.full(3, samples / 3)).pvalue > 0.001


def test_wilson_vs_aldous_broder_two_sample():
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 79)
    wg = WeightedGraphView(g, env.omega, 1.3)
    ts = TreeSampler(wg)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    s1, s2 = RngStream(10), RngStream(11)
    samples = 30000
    a = np.array([idx[ts.wilson_edges(s1)] for _ in range(samples)])
    b = np.array([idx[ts.aldous_broder_edges(s2)] for _ in range(samples)])
    assert ks_2samp(a, b).pvalue > 0.001


def test_gibbs_sequential_matches_exact_law():
    g = build_complete(4)
    env = sample_environment(Uniform01(), g, 80)
    wg = WeightedGraphView(g, env.omega, 1.0)
    law = exact_tree_law(wg)
    idx = {t: i for i, t in enumerate(law.trees)}
    counts = np.zeros(16)
    s = RngStream(12)
    samples = 8000
    for _ in range(samples):
        counts[idx[gibbs_sequential_sample(wg, s).edges]] += 1
    assert chisquare(counts, law.probs * samples).pvalue > 0.001


def test_gibbs_sequential_extreme_beta_returns_mst():
    g = build_complete(6)
    env = sample_environment(Uniform01(), g, 81)
    wg = WeightedGraphView(g, env.omega, 1e6)
    mf = kruskal_mst(g, env)
    for k in range(5):
        t = gibbs_sequential_sample(wg, RngStream(13, k))
        assert t.edges == mf.edges


def test_gap_restriction_preserves_law():
    g = build_complete(6)
    env = sample_environment(Uniform01(), g, 82)
    wg = WeightedGraphView(g, env.omega, 40.0)
    sub, keep, bound = gap_restricted_view(wg, slack=3.0)
    assert bound < 1.0
    # laws agree up to the reported bound: compare restricted exact law mass
    law = exact_tree_law(wg)
    law_sub = exact_tree_law(sub)
    table = {}
    for t, p in zip(law_sub.trees, law_sub.probs):
        table[tuple(sorted(keep[e] for e in t))] = p
    tv = 0.5 * sum(abs(p - table.get(t, 0.0))
                   for t, p in zip(law.trees, law.probs))
    tv += 0.5 * sum(p for t, p in table.items()
                    if t not in set(law.trees))
    assert tv <= bound + 1e-12


def test_mst_mass_exact_matches_enumeration():
    g = build_complete(5)
    env = sample_environment(Uniform01(), g, 83)
    for beta in (0.5, 3.0, 20.0):
        wg = WeightedGraphView(g, env.omega, beta)
        law = exact_tree_law(wg)
        mf = kruskal_mst(g, env)
        want = law.probs[law.index_of(mf.edges)]
        assert abs(mst_mass_exact(wg) - want) < 1e-10


# --------------------------------------------------------------------------
# implicit complete-graph samplers
# --------------------------------------------------------------------------

def test_complete_edge_ids_match_build_complete():
    n = 9
    g = build_complete(n)
    us = np.array([u for u, _ in g.endpoints])
    vs = np.array([v for _, v in g.endpoints])
    assert np.array_equal(complete_edge_ids(n, us, vs), np.arange(g.m))


def test_complete_omega_matches_explicit_environment():
    n = 17
    g = build_complete(n)
    env = sample_environment(Uniform01(), g, 555)
    us = np.array([u for u, _ in g.endpoints])
    vs = np.array([v for _, v in g.endpoints])
    assert np.array_equal(env.omega, complete_omega(n, 555, us, vs))


def test_complete_mst_matches_kruskal():
    for n, seed in ((12, 1), (40, 2), (100, 3)):
        g = build_complete(n)
        env = sample_environment(Uniform01(), g, seed)
        mf = kruskal_mst(g, env)
        explicit = sorted(g.endpoints[e] for e in mf.edges)
        implicit = sorted(tuple(sorted(p)) for p in complete_mst(n, seed))
        assert explicit == implicit


def test_complete_wilson_marginals():
    n, beta, seed = 7, 1.0, 44
    g = build_complete(n)
    env = sample_environment(Uniform01(), g, seed)
    wg = WeightedGraphView(g, env.omega, beta)
    from rstre.electric import edge_inclusion_probabilities
    marg = edge_inclusion_probabilities(wg)
    idx = g.edge_index()
    counts = np.zeros(g.m)
    s = RngStream(14)
    samples = 15000
    for _ in range(samples):
        for (u, v) in complete_wilson(n, beta, seed, s):
            a, b = (u, v) if u < v else (v, u)
            counts[idx[(a, b)][0]] += 1
    emp = counts / samples
    se = np.sqrt(marg * (1 - marg) / samples)
    assert np.all(np.abs(emp - marg) < 4.5 * se + 1e-9)


def test_pair_list_diameter():
    pairs = [(0, 1), (1, 2), (2, 3)]
    assert pair_list_diameter(4, pairs) == 3
    star = [(0, i) for i in range(1, 5)]
    assert pair_list_diameter(5, star) == 2
