"""elmerge: train random-feature (ELM) networks by closed-form ridge
regression, and train large ones piecewise.

The optimal output weight of a concatenated network is an explicit linear
transform of its subnetworks' optimal weights.  This package implements the
direct solvers, the exact two-block merge in both size regimes, recursive
hierarchical training, block-incremental growth, and a benchmarking CLI.
"""

from .model import (
    Activation,
    RandomFeatureMap,
    compute_hidden_matrix,
    concat_feature_maps,
    generate_feature_map,
    load_weights,
    save_weights,
    split_feature_map,
)
from .solvers import (
    DEFAULT_ALPHA,
    FactorizationError,
    IncrementalState,
    MergeMatrices,
    MergeOperands,
    RidgeConfig,
    build_merge_operands,
    build_Z_symmetric,
    hierarchical_train,
    incremental_add,
    incremental_init,
    merge_dual,
    merge_primal,
    solve_auto,
    solve_dual,
    solve_primal,
)
from .data import (
    DataFormatError,
    Dataset,
    load_csv,
    load_idx,
    normalize_minmax,
    one_hot,
    save_csv,
    synthetic_blobs,
)
from .evaluation import (
    BenchReport,
    CompareConfig,
    MethodRun,
    classify,
    error_rate,
    frobenius_diff,
    predict,
    relative_frobenius_diff,
    run_comparison,
)

__version__ = "0.1.0"
