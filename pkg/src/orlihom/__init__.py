"""Numerical homogenization of Orlicz-growth integral energies."""

__version__ = "0.1.0"

from .field import (
    ConfigurationError,
    LatticeField,
    constant_field,
    periodic_field,
    sample_lattice_field,
    shift_field,
    value_at,
)
from .integrand import (
    DoublePhase,
    ElementField,
    ExponentWindow,
    IntegrandSpec,
    NonconvexSpec,
    PowerRadial,
    VariableExponent,
    check_doubling,
    eval_density,
    luxemburg_norm,
    modular,
    radial_slope,
    validate_structure,
)
from .mesh import CubeMesh, DiscreteEnergy, assemble_energy, assemble_gradient
from .solver import SolverConfig, SolveReport, cutoff_value, minimize_energy, truncate_field
from .homogenize import (
    check_stationarity,
    check_subadditivity,
    gamma_cell,
    mu_over_cube,
    mu_rescaled_unit_cube,
    phi_estimate,
    zeta_estimate,
)
from .verify import analytic_oracle, brute_force_gamma, structural_suite
from .estimators import PeriodicHomogenizer, StochasticHomogenizer
