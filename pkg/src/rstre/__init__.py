"""Random spanning trees in random environment.

Weighted uniform spanning trees with conductances exp(-beta * omega_e) for
i.i.d. edge disorder omega: samplers, electric-network identities, exact
small-graph laws, observables, graph reductions, lattice boxes, and a seeded
experiment harness.
"""

__version__ = "0.1.0"

from .environment import (Bounded, Environment, Gaussian, NegExpInv,
                          PowerTail, Uniform01, WeightedGraphView,
                          sample_environment)
from .graph import (MultiGraph, SpanningTree, build_box, build_complete,
                    build_from_edge_list, build_random_regular,
                    connected_components, contract_edges, delete_edges,
                    restricted_subtree, tree_diameter)
from .rng import RngStream
from .sampler import (TreeSampler, aldous_broder_sample, exact_tree_law,
                      enumerate_spanning_trees, gibbs_sequential_sample,
                      kruskal_mst, matrix_tree_partition_function, prim_mst,
                      wilson_sample)

__all__ = [name for name in dir() if not name.startswith("_")]
