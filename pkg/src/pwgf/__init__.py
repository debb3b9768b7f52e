"""Particle Wasserstein gradient flows for Gross-Pitaevskii ground states.

A product of boundary-preserving Neural ODE maps pushes a fixed reference
measure on ``(-L, L)^d`` forward; its parameters follow a natural gradient
of the GP energy estimated at a fixed particle set.  A finite-difference H1
Sobolev flow provides reference energies and consumes PWGF warm starts.
"""
from .descent import EXPERIMENTS, PwgfConfig, RunRecord, best_map, pwgf_step, run, setup
from .energy import EnergyBreakdown, energy, energy_gradient
from .h1 import FdProblem, fd_energy, h1_solve, h1_step
from .metric import assemble_metric, natural_direction
from .net import NetworkParams, n_params, net_eval
from .potentials import Potential, exact_1d, make_potential
from .reconstruct import GridFunction, interpolate_to_fd, reconstruct_u
from .reference import ParticleSet, ReferenceDensity, sample_sign_symmetric
from .transport import TransportMap, integrate_augmented, parameter_jacobian

__all__ = [
    "EXPERIMENTS", "PwgfConfig", "RunRecord", "best_map", "pwgf_step", "run", "setup",
    "EnergyBreakdown", "energy", "energy_gradient",
    "FdProblem", "fd_energy", "h1_solve", "h1_step",
    "assemble_metric", "natural_direction",
    "NetworkParams", "n_params", "net_eval",
    "Potential", "exact_1d", "make_potential",
    "GridFunction", "interpolate_to_fd", "reconstruct_u",
    "ParticleSet", "ReferenceDensity", "sample_sign_symmetric",
    "TransportMap", "integrate_augmented", "parameter_jacobian",
]
