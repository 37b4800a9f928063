"""Point-vortex bursts and collapses, certified weak solutions and random bursting.

Modules:

- ``core``: configurations, Biot-Savart velocities, first integrals.
- ``selfsimilar``: the explicit self-similar burst and its linearization.
- ``coords``: rescaled coordinates in which a burst is a regular problem.
- ``burst_solver``: fixed-point construction of bursts under external fields.
- ``dynamics``: regular integration, collapse detection and merging, events.
- ``nburst``: bursts among moving background vortices and in the unit disk.
- ``weakform``: weak-formulation residuals and the energy ledger.
- ``markov``: bursts at Poisson times with merge-on-collapse continuation.
- ``fileio``, ``scenario``, ``plotting``, ``cli``: file formats and front end.
"""

from .burst_solver import GammaConfig, solve_burst
from .core import VortexConfiguration, free_velocity, hamiltonian, moment_of_inertia
from .dynamics import EventTrajectory, IntegrationConfig, SystemSpec, integrate, simulate
from .nburst import NBurstProblem, solve_disk_burst, solve_nburst
from .selfsimilar import params_for
from .weakform import energy_ledger, standard_battery, weak_residual

__all__ = [
    "EventTrajectory",
    "GammaConfig",
    "IntegrationConfig",
    "NBurstProblem",
    "SystemSpec",
    "VortexConfiguration",
    "energy_ledger",
    "free_velocity",
    "hamiltonian",
    "integrate",
    "moment_of_inertia",
    "params_for",
    "simulate",
    "solve_burst",
    "solve_disk_burst",
    "solve_nburst",
    "standard_battery",
    "weak_residual",
]

__version__ = "0.1.0"
