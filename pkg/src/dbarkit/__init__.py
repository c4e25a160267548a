"""D-bar inverse scattering at negative energy on the unit disk."""

from dbarkit.core import (
    DbarError,
    ExceptionalPointSuspected,
    GuardBandError,
    IllConditionedSystem,
    InvalidArgument,
    NumericalFailure,
    PeriodicGrid,
    ReducedZeta,
    WellPosednessError,
    energy_sqrt,
    exp_factor,
    exp_zeta,
    lambda_to_zeta,
    reduce_zeta,
)
from dbarkit.faddeev import (
    QuadratureSpec,
    faddeev_kernel,
    green_G,
    green_faddeev,
    green_reduced,
    truncation_limits,
)
from dbarkit.lippmann import (
    CGOField,
    PotentialField,
    scattering_at,
    scattering_direct,
    solve_mu,
)
from dbarkit.forward import (
    DiskMesh,
    DNMatrix,
    add_noise,
    assemble_dn,
    disk_mesh,
    dn_homogeneous,
    read_dn_csv,
    write_dn_csv,
)
from dbarkit.bie import (
    BoundaryTrace,
    ScatteringGrid,
    TruncationSpec,
    assemble_single_layer,
    scattering_from_dn,
    scattering_single,
    solve_boundary_psi,
    truncate_scattering,
)
from dbarkit.dbar import DbarSolution, apply_T, apply_cauchy, solve_dbar
from dbarkit.reconstruct import (
    ReconstructionResult,
    reconstruct_conductivity,
    reconstruct_potential,
)

__version__ = "0.1.0"
