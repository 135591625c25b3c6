"""Simulation and optimization toolkit for wireless-powered multicell
massive-MIMO NOMA networks: channel generation with optional estimation error,
harvest-then-transmit link metrics, energy-efficiency maximization through a
fractional-programming outer loop around distributed consensus ADMM, and
brute-force/Monte-Carlo oracles for validation."""

__version__ = "0.1.0"

from .admm import (AdmmDivergenceError, AdmmState, admm_solve,
                   augmented_lagrangian, global_update, local_update,
                   multiplier_update, residual, round_antennas)
from .channel import (degradation_coefficient, estimate_channels,
                      generate_channels, harvested_energy_imperfect,
                      harvested_energy_perfect, path_loss_alpha)
from .config import (NetworkConfig, PowerModel, SolverParams, config_from_dict,
                     config_hash, dbm_to_watts, load_config)
from .dinkelbach import (DinkelbachError, DinkelbachResult, dinkelbach_solve,
                         finalize_allocation, subtractive_objective)
from .kernels import backend_name
from .metrics import (EEReport, check_constraints, decoding_order,
                      energy_efficiency, rate, total_energy, total_throughput)
from .oracle import (GridBudgetError, GridSpec, brute_force_optimum,
                     numerical_hessian, rate_distribution_check,
                     trimmed_sum_distribution_check)
from .scenario import Allocation, Scenario, build_scenario, uniform_allocation
