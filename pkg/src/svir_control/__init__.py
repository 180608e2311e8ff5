"""Optimal social-distancing control of the SVIR epidemic model."""
from .costs import CostBreakdown, CostSpec, SocialCost, evaluate_costs, running_cost
from .errors import (DomainError, InstabilityError, InvalidInputError, NonConvergenceError,
                     NumericalError, SvirError)
from .fbs import FbsConfig, SolutionPath, evaluate_constant_policy, solve, sweep_parameter
from .model import (Equilibrium, ModelParams, SvirState, TimeGrid, controlled_rhs,
                    disease_free_equilibrium, endemic_equilibrium, integrate_forward,
                    reproduction_number)

__version__ = "0.1.0"
