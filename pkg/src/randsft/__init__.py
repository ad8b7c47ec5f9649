"""Random subshifts of finite type: edge shifts, their random subgraphs, and limit laws."""

from .errors import CapExceeded, ConfigError, ConvergenceError, GraphError, NotIrreducibleError
from .graph_core import (
    Graph,
    build_graph,
    cycle_graph,
    full_graph,
    golden_mean_graph,
    n_block_graph,
    power_graph,
    resolve_graph,
)
from .invariants import AtLeast, condition_report, invariant_report
from .limit_laws import emptiness_bounds, i_infinity_pmf, limit_entropy, orbit_counts, zeta_inverse
from .random_sft import exact_enumerate, realize, sample_omega
from .spectral import perron_data, spectral_radius, zeta_eval

__version__ = "0.1.0"

__all__ = [
    "AtLeast",
    "CapExceeded",
    "ConfigError",
    "ConvergenceError",
    "Graph",
    "GraphError",
    "NotIrreducibleError",
    "build_graph",
    "condition_report",
    "cycle_graph",
    "emptiness_bounds",
    "exact_enumerate",
    "full_graph",
    "golden_mean_graph",
    "i_infinity_pmf",
    "invariant_report",
    "limit_entropy",
    "n_block_graph",
    "orbit_counts",
    "perron_data",
    "power_graph",
    "realize",
    "resolve_graph",
    "sample_omega",
    "spectral_radius",
    "zeta_eval",
    "zeta_inverse",
]
