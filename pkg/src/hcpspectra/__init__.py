"""Semiclassical ionization spectra of Rydberg atoms kicked by half-cycle pulses.

Core pipeline: the WKB initial state defines a two-branch Lagrangian manifold
(`manifold`); an instantaneous kick or a finite pulse (`pulse`) launches
classical trajectories that the pure-Coulomb analytics propagate to the
detector (`kepler`, `trajectories`); branch enumeration on constant-energy
loci (`search`) feeds classical/primitive/uniform spectra (`spectrum`); an
independent partial-wave calculation (`oracle`) provides the exact quantum
answer in the impulse limit.  `runs`, `cli` and `service` wrap everything for
batch and HTTP use.
"""

from .model import (
    KickParams,
    RydbergState,
    ScalingTransform,
    apply_scaling,
    au_to_energy,
    critical_energy,
    energy_to_au,
    scaled_strength,
)
from .manifold import ManifoldPoint, eikonal, manifold_amplitude, manifold_momentum, manifold_phase_w, radial_momentum
from .kepler import CoulombOrbit, asymptotic_momentum, conserved_quantities
from .trajectories import TrajectoryResult, impulse_trajectory, morse_index
from .pulse import PulseModel, calibrate_e0, integrate_through_pulse, pulse_trajectory
from .search import CatastropheReport, EnergyShellCurve, detect_catastrophes, energy_shell, find_branches, pulse_energy_shell
from .spectrum import SpectrumPoint, assemble_spectrum, primitive_point, uniform_point
from .oracle import bound_radial, coulomb_continuum, kick_matrix_elements, oracle_spectrum, unitarity_report

__version__ = "0.1.0"
