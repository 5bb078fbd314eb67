"""Monte Carlo lab for random walks indexed by critical Galton-Watson trees,
branching random walks, and the discretized Brownian snake, with quantitative
checks of the scaling limits (range, local times, distant-point hitting)."""

from . import gw_trees, harness, indexed_walk, lattice, limits, snake

__version__ = "0.1.0"

__all__ = ["gw_trees", "harness", "indexed_walk", "lattice", "limits",
           "snake", "__version__"]
