"""d2dpipe — pipeline path finding over opportunistic device-to-device worker graphs.

The package models a pool of mobile workers as a weighted undirected graph,
trims that graph with adjacency-matrix-power scores, searches it for the best
resource-feasible pipeline path under a table of configuration strategies,
analyses how long a formed pipeline survives millimetre-wave blockage, and
ships Monte Carlo + discrete-event harnesses that exercise the whole chain.

Subpackages / modules
---------------------
graph        immutable worker-graph model and elementary link/path metrics
trimming     adjacency-matrix-power graph reduction
pathfinder   strategy table, forward search / backward tracing, best path
stability    blockage survival closed forms and Monte Carlo oracle
pool_sim     beta-distributed random-pool experiment harness
session_sim  discrete-event simulation of a running pipeline session
cli          ``d2dpipe`` command-line entry point
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
