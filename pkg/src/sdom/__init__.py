"""Numerical workbench for sparse domination of multilinear singular
integral operators on dyadic grids.

The package measures, on finite grids, the objects a sparse domination
argument is made of: kernel regularity constants, discrete operator
truncations, grand maximal gaps, the stopping-time construction of a
1/2-sparse cube family with verified witnesses, the resulting empirical
domination constants, and multilinear weight characteristics.
"""

__version__ = "0.1.0"

from .bank import BankSpec, make_bank, single_input
from .builder import (
    BuilderNodeStats,
    DominationReport,
    LemmaReport,
    adaptive_threshold,
    build_sparse_family,
    cz_select,
    domination_constant,
    lemma_pointwise_check,
)
from .grid import (
    DyadicCube,
    GridCube,
    GridFunction,
    GridSpec,
    cell_box,
    children,
    cube_cell_count,
    cube_flat_indices,
    cube_measure,
    cube_values,
    local_average,
    masked_to,
    support_in,
    triple_cube,
)
from .kernels import (
    EstimateReport,
    KernelSpec,
    Modulus,
    SamplePlan,
    SingularPointError,
    bilinear_odd_kernel,
    custom_kernel,
    dini_norm,
    dini_synthetic_kernel,
    eval_kernel,
    h2_constant,
    hormander_constant,
    mpt_kernel,
    mpt_truncated_kernel,
    omega_profile,
    x_independent_kernel,
    zero_kernel,
)
from .maximal import (
    ALL_GRID_CUBES,
    DYADIC,
    CubeFamilyMode,
    MTBoundReport,
    best_of_shifted,
    grand_maximal,
    local_grand_maximal,
    m_delta,
    mt_pointwise_bound_check,
    multilinear_maximal,
    shifted_modes,
)
from .operators import (
    OperatorSpec,
    WeakNormReport,
    apply,
    apply_truncated,
    lp_norm,
    weak_norm,
    weak_quasi_norm,
)
from .parallel import get_thread_count, parallel_map, set_thread_count
from .sparse import (
    InvariantViolation,
    SparseEntry,
    SparseFamily,
    SparsityReport,
    carleson_sum,
    sparse_eval,
    verify_witness_sparsity,
)
from .weights import (
    WeightTuple,
    WeightedReport,
    power_weight,
    trend_correlation,
    vec_ap_characteristic,
    weighted_norm_ratio,
)
