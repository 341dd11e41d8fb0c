"""Node-level differentially private graph neural network training.

Budget is spent in three places: Laplace noise on the first sum
aggregation, randomization of the adjacency matrix, and randomized response
on training labels. Everything after those mechanisms is post-processing.
"""

from napgnn.experiment import ExperimentConfig, SyntheticSpec, run_experiment, sweep
from napgnn.graph import Graph, generate_power_law, load_graph

__all__ = [
    "ExperimentConfig",
    "Graph",
    "SyntheticSpec",
    "generate_power_law",
    "load_graph",
    "run_experiment",
    "sweep",
]
__version__ = "0.1.0"
