"""Block-sparse dictionary learning with automatic block-structure recovery."""

from .coding import CodingBudget, bomp, code_matrix, omp
from .core import (
    BlockDictError,
    BlockStructure,
    DimensionMismatch,
    FormatError,
    InfeasibleConfig,
    InvalidStructure,
    SingularLeastSquares,
    ZeroColumn,
    ZeroSignal,
    block_sparsity,
    normalize_columns,
    read_matrix,
    read_structure,
    write_matrix,
    write_structure,
)
from .experiments import ExperimentSpec, run_experiment, summarize
from .framework import LearnConfig, LearnResult, learn_block_dictionary
from .metrics import block_distance, recovery_percentage, representation_error
from .sac import block_sparsity_objective, sac_cluster
from .synth import (
    add_noise,
    generate_block_structure,
    generate_dictionary,
    generate_signals,
    oracle_run,
    perturbed_dictionary,
)
from .update import (
    EmptySupport,
    bksvd_block_update,
    bksvd_learn,
    bksvd_pass,
    ksvd_atom_update,
    ksvd_learn,
    ksvd_pass,
    mod_update,
)

__all__ = [
    "BlockDictError", "BlockStructure", "CodingBudget", "DimensionMismatch", "EmptySupport",
    "ExperimentSpec", "FormatError", "InfeasibleConfig", "InvalidStructure",
    "LearnConfig", "LearnResult", "SingularLeastSquares", "ZeroColumn", "ZeroSignal",
    "add_noise", "bksvd_block_update", "bksvd_learn", "bksvd_pass", "block_distance",
    "block_sparsity", "block_sparsity_objective", "bomp", "code_matrix",
    "generate_block_structure", "generate_dictionary", "generate_signals",
    "ksvd_atom_update", "ksvd_learn", "ksvd_pass", "learn_block_dictionary",
    "mod_update", "normalize_columns", "omp", "oracle_run", "perturbed_dictionary",
    "read_matrix", "read_structure", "recovery_percentage", "representation_error",
    "run_experiment", "sac_cluster", "summarize", "write_matrix", "write_structure",
]
