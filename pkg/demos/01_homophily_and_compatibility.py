"""Why a compatibility matrix says more than a homophily score.

Two graphs can share the same edge homophily while wiring their classes
together in completely different ways. The compatibility matrix (row r =
neighbor-class distribution of class r) separates the two regimes; the
scalar collapses them.
"""

import numpy as np

from compatgnn import (edge_homophily, generate_graph, make_synth_spec,
                       node_homophily, observed_cm)
from compatgnn.synth import pairwise_tv


def show(name, g):
    cm = observed_cm(g)
    print(f"\n{name}: {g.n_nodes} nodes, {g.n_edges} edges")
    print(f"  edge homophily {edge_homophily(g):.3f}, "
          f"node homophily {node_homophily(g):.3f}")
    print(f"  min pairwise row TV {pairwise_tv(cm.m):.3f}")
    with np.printoptions(precision=2, suppress=True):
        print("  observed compatibility matrix:")
        for row in cm.m:
            print("   ", row)


def main():
    # same homophily level, opposite off-diagonal structure
    for pattern in ("easy", "hard"):
        spec = make_synth_spec(1500, 5, 0.3, pattern, 12.0, seed=1)
        show(f"h=0.3 {pattern}", generate_graph(spec))

    print("\nBoth graphs sit at edge homophily ~0.3. In the easy graph the "
          "remaining mass\nconcentrates on two adjacent classes, so rows stay "
          "far apart in TV distance and\nneighborhoods remain informative. "
          "In the hard graph the mass spreads uniformly,\nrows nearly "
          "coincide, and neighbor labels carry almost no class signal.")


if __name__ == "__main__":
    main()
