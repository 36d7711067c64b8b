import math

import numpy as np
import pytest

from rstre.electric import effective_resistance
from rstre.environment import (Environment, Uniform01, WeightedGraphView,
                               sample_environment)
from rstre.graph import (GraphError, MultiGraph, build_complete,
                         build_random_regular, connected_components)
from rstre.reduction import (conjugate_parameter, export_kernel, graph_excess,
                             kernel_coupling_check, kernel_decompose,
                             kernel_view, kernel_weight_law_stats,
                             largest_component_vertices,
                             sample_contiguous_giant,
                             subcritical_cluster_bound, tv_restricted_laws,
                             two_core)
from rstre.rng import RngStream
from rstre.sampler import kruskal_mst


def theta_graph():
    # two hubs joined by three length-2 paths
    return MultiGraph(5, [(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)])


def test_two_core_of_tree_is_empty():
    g = MultiGraph(4, [(0, 1), (1, 2), (2, 3)])
    core, kept_v, kept_e = two_core(g)
    assert core.n == 0 and core.m == 0


def test_two_core_strips_pendants():
    g = MultiGraph(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    core, kept_v, _ = two_core(g)
    assert core.n == 3 and core.m == 3
    assert kept_v == [0, 1, 2]


def test_two_core_theta_graph_is_itself():
    core, _, _ = two_core(theta_graph())
    assert core.n == 5 and core.m == 6


def test_two_core_idempotent():
    rng = np.random.default_rng(0)
    for trial in range(10):
        n = int(rng.integers(5, 15))
        edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(2 * n, 2))
                 if a != b]
        g = MultiGraph(n, edges)
        core1, _, _ = two_core(g)
        core2, _, _ = two_core(core1)
        assert core1.n == core2.n and sorted(core1.endpoints) == sorted(core2.endpoints)


def test_kernel_theta_graph():
    g = theta_graph()
    env = Environment(g, np.zeros(6))
    dec = kernel_decompose(g, env, 1.0)
    assert dec.kernel.n == 2 and dec.kernel.m == 3
    assert np.allclose(dec.kernel_weights, 0.5)   # series of two unit edges
    assert all(len(p) == 2 for p in dec.phi)


def test_kernel_disjoint_cycle_dropped():
    g = MultiGraph(8, [(0, 1), (1, 2), (2, 0),                # bare triangle
                       (3, 4), (4, 5), (3, 5), (3, 6), (5, 6), (6, 7), (3, 7)])
    env = Environment(g, np.linspace(0.1, 1.0, g.m))
    dec = kernel_decompose(g, env, 1.0)
    dropped_edges = {e for cyc in dec.dropped_cycles for e in cyc}
    assert {0, 1, 2} <= dropped_edges
    assert all(dec.kernel.degree(v) >= 3 for v in range(dec.kernel.n))


def test_kernel_of_min_degree_three_graph_is_identity():
    g = build_complete(5)
    env = sample_environment(Uniform01(), g, 4)
    dec = kernel_decompose(g, env, 2.0)
    assert dec.kernel.n == 5 and dec.kernel.m == 10
    w = np.exp(-2.0 * env.omega)
    assert np.allclose(np.sort(dec.kernel_weights), np.sort(w))
    assert all(len(p) == 1 for p in dec.phi)


def test_kernel_idempotent():
    g = theta_graph()
    env = Environment(g, np.linspace(0.2, 0.9, 6))
    dec = kernel_decompose(g, env, 1.0)
    env2 = Environment(dec.kernel, -np.log(dec.kernel_weights))
    dec2 = kernel_decompose(dec.kernel, env2, 1.0)
    assert dec2.kernel.n == dec.kernel.n and dec2.kernel.m == dec.kernel.m


def test_kernel_resistance_preserved():
    # between kernel vertices the series-law weights reproduce the two-core
    # resistances exactly
    for seed in range(10):
        g = build_random_regular(8, 3, RngStream(seed, "resist"))
        env = sample_environment(Uniform01(), g, seed)
        beta = 1.0 + seed / 5
        core, core_v, core_e = two_core(g)
        dec = kernel_decompose(g, env, beta)
        if dec.kernel.m == 0:
            continue
        kv = kernel_view(dec)
        core_view = WeightedGraphView(core, env.omega[list(core_e)], beta)
        vlookup = {v: i for i, v in enumerate(core_v)}
        for a in range(dec.kernel.n):
            for b in range(a + 1, dec.kernel.n):
                r_kernel = effective_resistance(kv, [a], [b])
                ca = vlookup[dec.kernel_vertices[a]]
                cb = vlookup[dec.kernel_vertices[b]]
                r_core = effective_resistance(core_view, [ca], [cb])
                assert abs(r_kernel - r_core) < 1e-9


def test_kernel_coupling_theta_graph():
    g = theta_graph()
    rep = kernel_coupling_check(g, Environment(g, np.zeros(6)), 1.0)
    assert rep.max_marginal_gap < 1e-9
    assert rep.max_sequential_gap < 1e-9


def test_kernel_coupling_identity_case():
    g = build_complete(5)
    env = sample_environment(Uniform01(), g, 5)
    rep = kernel_coupling_check(g, env, 1.0)
    assert rep.max_marginal_gap < 1e-9


def test_kernel_coupling_random_instances():
    count = 0
    for seed in range(40):
        g = build_random_regular(8, 3, RngStream(seed, "couple"))
        env = sample_environment(Uniform01(), g, 100 + seed)
        rep = kernel_coupling_check(g, env, 1.0 + (seed % 4))
        assert rep.max_marginal_gap < 1e-9
        assert rep.max_sequential_gap < 1e-9
        count += 1
    assert count == 40


def test_export_kernel_files(tmp_path):
    g = theta_graph()
    dec = kernel_decompose(g, Environment(g, np.zeros(6)), 1.0)
    core_p = tmp_path / "core.txt"
    ker_p = tmp_path / "kernel.txt"
    phi_p = tmp_path / "phi.txt"
    export_kernel(dec, core_p, ker_p, phi_p)
    assert core_p.read_text().splitlines()[0] == "5"
    assert len(phi_p.read_text().splitlines()) == 3


def test_conjugate_parameter_fixed_point():
    assert conjugate_parameter(0.0) == 1.0


def test_conjugate_parameter_residual():
    mu = conjugate_parameter(0.1)
    assert abs(mu * math.exp(-mu) - 1.1 * math.exp(-1.1)) <= 1e-12
    assert 0 < mu < 1


@pytest.mark.parametrize("eps", [0.01, 0.03, 0.05])
def test_conjugate_parameter_taylor(eps):
    mu = conjugate_parameter(eps)
    assert abs(mu - (1 - eps + 2 * eps * eps / 3)) <= 5 * eps ** 3


def test_contiguous_giant_structure():
    g, params = sample_contiguous_giant(5000, 0.25, RngStream(3))
    assert g.is_connected() is False or g.n > 0   # components allowed
    assert 0 < params.mu_star < 1
    assert params.kernel_degrees.min() >= 3
    assert params.kernel_degrees.sum() % 2 == 0


def test_contiguous_giant_path_lengths():
    # geometric path replacement has mean one over (1 - mu)
    stream = RngStream(6)
    n, eps = 20000, 0.2
    mu = conjugate_parameter(eps)
    lengths = []
    for _ in range(8):
        g, params = sample_contiguous_giant(n, eps, stream)
        kernel_edge_count = params.kernel_degrees.sum() // 2
        # total path edges = core edges; infer mean length
        core, _, _ = two_core(g)
        if kernel_edge_count:
            lengths.append(core.m / kernel_edge_count)
    mean = float(np.mean(lengths))
    assert abs(mean - 1 / (1 - mu)) < 3 * np.std(lengths) / math.sqrt(len(lengths)) + 0.3


def test_contiguous_giant_total_size():
    hits, runs = 0, 30
    n, eps = 10 ** 4, 0.2
    stream = RngStream(7)
    for _ in range(runs):
        g, params = sample_contiguous_giant(n, eps, stream)
        ratio = params.total_vertices / (2 * eps * n)
        hits += (1 / 3 <= ratio <= 3)
    assert hits >= 0.9 * runs


def test_kernel_weight_law_stats_bounds():
    mu = conjugate_parameter(0.2)
    st = kernel_weight_law_stats(2e4, 1.3e-4, mu, 50000, RngStream(8),
                                 n=10 ** 4, C=64)
    assert st.lower_bound_ok == st.samples
    assert st.sandwich_ok >= (1 - 1e-3) * st.samples


def test_kernel_weight_degenerate_length():
    # mu -> 0 forces single-term sums
    st = kernel_weight_law_stats(10.0, 0.1, 1e-9, 2000, RngStream(9), n=100)
    assert st.mean_path_length == 1.0
    assert st.lower_bound_ok == st.samples == st.sandwich_ok


def test_graph_excess_values():
    assert graph_excess(MultiGraph(3, [(0, 1), (1, 2)])) == -1
    assert graph_excess(build_complete(3)) == 0
    assert graph_excess(theta_graph()) == 1


def test_tv_restricted_laws_small_instance():
    g = build_complete(6)
    env = sample_environment(Uniform01(), g, 11)
    tv, bound = tv_restricted_laws(g, env, 60.0, 0.3, 0.8)
    assert tv <= 1e-6
    assert tv <= bound


def test_tv_restricted_laws_equal_thresholds_vacuous_bound():
    g = build_complete(5)
    env = sample_environment(Uniform01(), g, 12)
    tv, bound = tv_restricted_laws(g, env, 5.0, 0.5, 0.5)
    assert 0.0 <= tv <= 1.0
    assert bound == 5 ** 4


def test_tv_restricted_laws_bounded_on_random_instances():
    rng = np.random.default_rng(13)
    done = 0
    seed = 0
    while done < 30:
        seed += 1
        g = build_complete(int(rng.integers(5, 7)))
        env = sample_environment(Uniform01(), g, 1000 + seed)
        p0 = float(rng.uniform(0.2, 0.5))
        p1 = float(rng.uniform(p0, 0.9))
        beta = float(rng.uniform(10, 60))
        try:
            tv, bound = tv_restricted_laws(g, env, beta, p0, p1)
        except ValueError:
            continue  # containment failed for this draw
        assert tv <= bound + 1e-12
        done += 1


def test_subcritical_percolation_cluster_bound():
    # percolation below the critical density on a bounded-degree graph keeps
    # every cluster logarithmic; zero failures allowed at this size
    s = 0.4
    n = 10 ** 4
    d = 4
    g = build_random_regular(n, d, RngStream(20))
    bound = subcritical_cluster_bound(s, n, k=1.0)
    p = (1 - s) / (d - 1)
    rng = np.random.default_rng(21)
    for trial in range(200):
        keep = rng.random(g.m) < p
        sub = MultiGraph(n, [g.endpoints[e] for e in np.nonzero(keep)[0]])
        census = connected_components(sub)
        assert census.sizes[0] <= bound


def test_mst_max_degree_logarithmic():
    from rstre.sampler import complete_mst
    n = 1000
    limit = 60 * math.log(n)
    for seed in range(100):
        pairs = complete_mst(n, 5000 + seed)
        deg = np.zeros(n, dtype=int)
        for u, v in pairs:
            deg[u] += 1
            deg[v] += 1
        assert deg.max() <= limit


def test_snapshot_containment_frequency():
    # the largest cluster at one snapshot usually sits inside the next one;
    # slightly supercritical percolation of a sparse regular graph
    n, eps = 3000, 0.22   # eps^3 n = 32
    d = 4
    hits, runs = 0, 40
    for seed in range(runs):
        gr = build_random_regular(n, d, RngStream(40, seed))
        env = sample_environment(Uniform01(), gr, 70 + seed)
        q0 = (1 + eps) / (d - 1)
        q1 = (1 + math.sqrt(5 / 4) * eps) / (d - 1)
        sub0 = MultiGraph(n, [gr.endpoints[e] for e in range(gr.m)
                              if env.omega[e] <= q0])
        sub1 = MultiGraph(n, [gr.endpoints[e] for e in range(gr.m)
                              if env.omega[e] <= q1])
        c0 = set(largest_component_vertices(sub0))
        c1 = set(largest_component_vertices(sub1))
        hits += c0 <= c1
    assert hits >= 0.9 * runs
