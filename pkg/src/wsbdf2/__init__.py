"""Variable-step weighted and shifted BDF2 time stepping for linear parabolic problems."""

from .integrator import (
    DenseProblem,
    ScalarProblem,
    SolutionTrace,
    SpatialProblem,
    check_dissipation,
    check_l2_stability,
    consistency_error,
    energy_trace,
    wsbdf2_solve,
)
from .kernels import (
    apply_D2,
    build_doc_explicit,
    build_doc_recursive,
    build_kernels,
    check_orthogonality,
)
from .mesh import Mesh, case1_mesh, geometric_mesh, random_mesh, uniform_mesh, validate_mesh
from .ratio_bounds import (
    a_stability_root,
    h_function,
    lk_recursion,
    psd_oracle,
    psd_oracle_ratios,
    r_optimal,
    r_suboptimal,
)
from .spectral2d import SpectralLaplacian, build_laplacian, cgl_nodes, cheb_diff_matrix, discrete_l2_norm

__version__ = "0.1.0"
