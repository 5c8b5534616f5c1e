"""Lattice gradient flows of symmetric matrix fields under repulsive potentials.

The package discretizes maps from a periodic lattice into symmetric ``l x l``
matrices, evolves them by the gradient flow of kinetic plus potential energy
and measures the monotone quantities and regularity estimates such flows obey.

Modules
-------
lattice       periodic lattice domains, balls, shells and cylinders
fields        symmetric matrix fields and winding initial data
potentials    repulsive potential families, energies and Hessian bounds
flow          spectral time stepping, residuals and dissipation checks
monotonicity  density ratios, the elliptic and parabolic monotone quantities
regularity    Moser bounds, epsilon-regularity scans, bad sets and sweeps
io, config    snapshot/CSV files and TOML run configuration
cli           the ``repflow`` command
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DivergenceError,
    EmptyRegionError,
    FormatError,
    RepflowError,
    UndefinedRatioError,
)
from .fields import SymmetricMatrixField, grassmannian_winding_field  # noqa: E402
from .flow import FlowConfig, Trajectory, run_flow  # noqa: E402
from .lattice import LatticeDomain, build_domain  # noqa: E402
from .potentials import PotentialSpec, energy_density, make_potential, total_energy  # noqa: E402

__all__ = [
    "ConfigurationError",
    "DivergenceError",
    "EmptyRegionError",
    "FlowConfig",
    "FormatError",
    "LatticeDomain",
    "PotentialSpec",
    "RepflowError",
    "SymmetricMatrixField",
    "Trajectory",
    "UndefinedRatioError",
    "__version__",
    "build_domain",
    "energy_density",
    "grassmannian_winding_field",
    "make_potential",
    "run_flow",
    "total_energy",
]
