# coding: utf-8

# # The H1 Sobolev gradient flow on its own
#
# Each step preconditions the energy gradient with (-Laplacian + I)^-1
# (a sine transform does it exactly), projects onto the tangent space of
# the unit sphere in the same inner product and renormalises.

import numpy as np

from pwgf.h1 import FdProblem, constant_init, fd_energy, h1_solve, laplace_ground_mode
from pwgf.potentials import make_potential

# Sanity check with V = 0, beta = 0: the first Dirichlet mode is exact.

free = FdProblem(2, 63, 1.0, np.zeros((63, 63)), 0.0)
E, lam = fd_energy(laplace_ground_mode(free), free)
print("free problem: lambda_h = %.8f, 2 * (4/h^2) sin^2(pi h / 4L) = %.8f"
      % (lam, 2 * 4 / free.h ** 2 * np.sin(np.pi * free.h / 4) ** 2))

# The 2D lattice problem from a constant start.

prob = FdProblem.from_potential(make_potential("lattice2d"), 200)
res = h1_solve(constant_init(prob), prob, tol=1e-12)
print("2D n=200: E*_h = %.5f  lambda*_h = %.5f  (%d steps)" % (res.E, res.lam, len(res.history) - 1))
for k, E, lam, r, tau in res.history[:6]:
    print("  step %d  E = %.6f  residual = %.2e" % (k, E, r))
print("min(u) = %.2e > 0" % res.u.min())
