"""Fast treecode summation of the 1.5-dimensional disc-model electric field.

N axial disc charges are evaluated at arbitrary targets in O(N log N) via a
binary tree with Taylor far-field expansions, a computable truncation-error
bound, and an O(N^2) direct-summation oracle for validation.
"""

from .charges import (
    Charge,
    ChargeSystem,
    DensitySpec,
    ImageSpec,
    from_density,
    from_particles,
    sign_term_all,
    with_images,
)
from .direct import FieldResult, evaluate_direct
from .kernel import (
    DiscKernel,
    PChoice,
    TruncationBound,
    bound_value,
    choose_p,
    contour_max,
    phi,
    phi_derivatives,
    truncation_bound,
)
from .metrics import (
    BenchRecord,
    DepthScanRecord,
    ErrorReport,
    TimingStats,
    bench,
    depth_scan,
    error_report,
    random_instance,
    single_cell_errors,
)
from .tree import EvalConfig, Tree, TreeNode, build, evaluate_all, evaluate_point, well_separated

__version__ = "0.1.0"

__all__ = [
    "BenchRecord",
    "Charge",
    "ChargeSystem",
    "DensitySpec",
    "DepthScanRecord",
    "DiscKernel",
    "ErrorReport",
    "EvalConfig",
    "FieldResult",
    "ImageSpec",
    "PChoice",
    "TimingStats",
    "Tree",
    "TreeNode",
    "TruncationBound",
    "bench",
    "bound_value",
    "build",
    "choose_p",
    "contour_max",
    "depth_scan",
    "error_report",
    "evaluate_all",
    "evaluate_direct",
    "evaluate_point",
    "from_density",
    "from_particles",
    "phi",
    "phi_derivatives",
    "random_instance",
    "sign_term_all",
    "single_cell_errors",
    "truncation_bound",
    "well_separated",
    "with_images",
]
