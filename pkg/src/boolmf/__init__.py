"""Boolean matrix factorization toolkit.

Approximates a binary (or [0,1]-valued) matrix X by the Boolean product
min(1, WH) of two binary factors, by alternating exact Boolean
least-squares solves, multistart initialization, and optimal recombination
of rank-one factors pooled across solutions.
"""

from .matrices import (
    BinaryMatrix,
    FactorMeta,
    Factorization,
    RealMatrix,
    boolean_product,
    reconstruction_error,
)
from .boolls import (
    BoolLsInstance,
    BoolLsResult,
    SolveBudget,
    brute_force_column,
    solve_column,
    solve_matrix,
)
from .ao import AoConfig, AoTrace, ao_bmf, ao_bmf_row_init, safety_reinit
from .initializers import (
    InitKind,
    InitStrategy,
    NmfConfig,
    binarize,
    binarize_at,
    init_nmf,
    init_random_slices,
    nmf,
    normalize_scale,
)
from .combine import (
    CombineResult,
    RankOneFactor,
    RankOnePool,
    combine,
    ms_ao,
    ms_comb_ao,
    ms_comb_ao_detailed,
    pool_insert,
    selection_to_factors,
)
from .bench import (
    DatasetManifest,
    RunReport,
    load_dataset,
    load_manifest,
    render_table,
    run_benchmark,
)
from .io import (
    MatrixFormatError,
    export_features,
    load_matrix,
    save_factorization,
    save_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "AoConfig",
    "AoTrace",
    "BinaryMatrix",
    "BoolLsInstance",
    "BoolLsResult",
    "CombineResult",
    "DatasetManifest",
    "FactorMeta",
    "Factorization",
    "InitKind",
    "InitStrategy",
    "MatrixFormatError",
    "NmfConfig",
    "RankOneFactor",
    "RankOnePool",
    "RealMatrix",
    "RunReport",
    "SolveBudget",
    "ao_bmf",
    "ao_bmf_row_init",
    "binarize",
    "binarize_at",
    "boolean_product",
    "brute_force_column",
    "combine",
    "export_features",
    "init_nmf",
    "init_random_slices",
    "load_dataset",
    "load_manifest",
    "load_matrix",
    "ms_ao",
    "ms_comb_ao",
    "ms_comb_ao_detailed",
    "nmf",
    "normalize_scale",
    "pool_insert",
    "reconstruction_error",
    "render_table",
    "run_benchmark",
    "safety_reinit",
    "save_factorization",
    "save_matrix",
    "selection_to_factors",
    "solve_column",
    "solve_matrix",
]
