"""Parameter identification pipeline for the relaxed micromorphic model.

Static stage: constrained least-squares fit of the micro elasticity
constants, the rotational coupling modulus and the curvature coefficient
against finite-element energies of microstructured specimens of several
sizes.  Dynamic stage: cut-off inversion plus dispersion-curve fitting of
the micro-inertia coefficients against Bloch-Floquet reference bands.
"""

from .tensors import (
    BaseMaterial,
    RmmStaticParams,
    StiffnessOrderingError,
    TetragonalElasticity,
    e_from_micro_macro,
    macro_from_micro_e,
    round_trip_check,
)
from .geometry import RectOp, UnitCellGeometry, paper_like_cell, solid_square_cell
from .mesh import StructuredMesh, build_mesh
from .fem import (
    AffineLoadCase,
    RmmField,
    RmmOperator,
    SingularSystemError,
    energy_sensitivities,
    solve_elasticity,
    solve_rmm,
)

__version__ = "0.1.0"
