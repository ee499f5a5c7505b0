"""Porous medium equation with growth in the stiff-pressure limit.

Finite-volume PME solver, radial Hele-Shaw front reference, explicit barriers
and the harness that compares them as the stiffness exponent grows.
"""

__version__ = "0.1.0"

from .config import load_config, parse_scenario, scenario_from_dict, scenario_hash
from .errors import (BarrierConstructionError, ConfigurationError, ContractWarning, DomainError,
                     FrontLogicError, NumericalError, ScenarioError, SolverError, TruncationWarning)
from .model import (INFINITE, ExteriorDensity, GrowthLaw, Omega0, RadialShape, Scenario,
                    density_from_pressure, growth_rate, pressure_from_density, velocity_coefficient)
from .pme import SolverConfig, Trajectory, barenblatt_exact, matched_initial_density, run, run_lockstep
from .front import FrontSetup, FrontTrajectory, run_front
from .harness import comparison_check, l1_contraction_check, m_sweep, perimeter_series

__all__ = [
    "INFINITE", "BarrierConstructionError", "ConfigurationError", "ContractWarning", "DomainError",
    "ExteriorDensity", "FrontLogicError", "FrontSetup", "FrontTrajectory", "GrowthLaw",
    "NumericalError", "Omega0", "RadialShape", "Scenario", "ScenarioError", "SolverConfig",
    "SolverError", "Trajectory", "TruncationWarning", "barenblatt_exact", "comparison_check",
    "density_from_pressure", "growth_rate", "l1_contraction_check", "load_config", "m_sweep",
    "matched_initial_density", "parse_scenario", "perimeter_series", "pressure_from_density",
    "run", "run_front", "run_lockstep", "scenario_from_dict", "scenario_hash", "velocity_coefficient",
]
