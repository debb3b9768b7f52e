"""Particle estimators of the Gross-Pitaevskii energy in density form.

With ``x_i = T(z_i)``::

    F_Q = 1/(8N) sum_i sum_k s_ki^2      (Fisher information, s = score)
    F_V = 1/(2N) sum_i V(x_i)
    F_R = beta/(4N) sum_i rho(x_i)

Scalar reductions use ``math.fsum`` so the estimate does not depend on
particle order.  Gradients are reduced per sign pattern for symmetric
particle sets so that mirrored contributions cancel exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potentials import Potential
from .reference import ParticleSet
from .transport import (TransportMap, axis_jacobians, density_at_particles,
                        integrate_augmented, reverse_axis, score_at_particles)


@dataclass(frozen=True)
class EnergyBreakdown:
    F_Q: float
    F_V: float
    F_R: float

    @property
    def E(self) -> float:
        return self.F_Q + self.F_V + self.F_R

    @property
    def lam(self) -> float:
        return eigenvalue(self)


def eigenvalue(e: EnergyBreakdown) -> float:
    """Lagrange multiplier ``2E + 2F_R``."""
    return 2.0 * e.E + 2.0 * e.F_R


def _beta(potential, beta):
    return potential.beta if beta is None else float(beta)


def _components(particles, aug, potential, beta):
    N = particles.N
    s = score_at_particles(particles, aug)
    V, gV = potential(aug.w)
    rho = density_at_particles(particles, aug)
    e = EnergyBreakdown(F_Q=math.fsum((s * s).sum(axis=1)) / (8.0 * N),
                        F_V=math.fsum(V) / (2.0 * N),
                        F_R=beta * math.fsum(rho) / (4.0 * N))
    return e, s, gV, rho


def energy(tmap: TransportMap, particles: ParticleSet, potential: Potential,
           beta: float | None = None) -> EnergyBreakdown:
    aug = integrate_augmented(tmap, particles)
    return _components(particles, aug, potential, _beta(potential, beta))[0]


def _groups(particles: ParticleSet) -> int:
    return 1 if particles.n_base is None else 2 ** particles.d


def reduce_groups(sums: np.ndarray, particles: ParticleSet, axis: int) -> np.ndarray:
    """Combine per-sign-block gradient sums of the axis-``axis`` network.

    Blocks differing only in the sign of coordinate ``axis`` are added first,
    so contributions that are odd in that coordinate cancel to exactly zero.
    """
    if particles.n_base is None:
        return sums.sum(axis=0)
    d = particles.d
    x = sums.reshape((2,) * d + (sums.shape[-1],)).sum(axis=axis)
    return x.reshape(-1, sums.shape[-1]).sum(axis=0)


def energy_gradient(tmap: TransportMap, particles: ParticleSet, potential: Potential,
                    beta: float | None = None, with_jacobian: bool = False):
    """Energy, its exact gradient and optionally the per-axis map Jacobians.

    Returns ``(EnergyBreakdown, grad)`` or ``(EnergyBreakdown, grad, jacobians)``
    where ``jacobians[k]`` has shape ``(N, M1)``.
    """
    beta = _beta(potential, beta)
    aug = integrate_augmented(tmap, particles, keep_tape=True)
    e, s, gV, rho = _components(particles, aug, potential, beta)
    N = particles.N
    if gV is None or gV.shape != aug.w.shape:
        raise ValueError("potential must return a gradient of shape (P, d)")
    grad = np.empty(tmap.M)
    for k in range(tmap.d):
        sk, Jk = s[:, k], aug.J[:, k]
        aw = gV[:, k] / (2.0 * N)
        aell = -(sk * sk) / (4.0 * N) - beta * rho / (4.0 * N)
        adell = -sk / (4.0 * N * Jk)
        sums = reverse_axis(tmap.axis_params(k), tmap.L, tmap.n_ode, aug.tape[k],
                            aw, aell, adell, groups=_groups(particles))
        grad[tmap.block(k)] = reduce_groups(sums, particles, k)
    if with_jacobian:
        return e, grad, axis_jacobians(tmap, particles, aug)
    return e, grad


def density_energy_1d(rho, drho, V, beta: float, a: float, b: float) -> EnergyBreakdown:
    """Energy functionals of a 1D density on ``(a, b)`` by adaptive quadrature.

    ``rho``, ``drho`` and ``V`` are scalar callables; the Fisher integrand
    ``rho'^2 / rho`` is taken as zero where ``rho`` vanishes.
    """
    from scipy.integrate import quad

    def fisher(x):
        r = rho(x)
        return drho(x) ** 2 / r if r > 0 else 0.0
    opts = dict(limit=200, epsabs=1e-13, epsrel=1e-13)
    return EnergyBreakdown(F_Q=quad(fisher, a, b, **opts)[0] / 8.0,
                           F_V=quad(lambda x: V(x) * rho(x), a, b, **opts)[0] / 2.0,
                           F_R=beta * quad(lambda x: rho(x) ** 2, a, b, **opts)[0] / 4.0)
