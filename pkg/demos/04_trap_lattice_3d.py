# coding: utf-8

# # Three dimensions: harmonic trap plus optical lattice
#
# V = |x|^2 + 100 sum_k sin^2(pi x_k / 4) on (-8, 8)^3, beta = 1600.  A
# 99^3 FD grid already has about a million unknowns, so a good start
# matters.  This demo takes a while (ten minutes or so on one core).

import numpy as np

from pwgf.experiments import fd_problem, initial_guess, make_config, run_pwgf
from pwgf.h1 import fd_energy, h1_solve

cfg = make_config("gpe3d", seed=0)
res = run_pwgf(cfg, callback=lambda log, tm: log.k % 50 == 0 and print(
    "k=%3d  E=%.3f  accepted=%s" % (log.k, log.E, log.accepted)))
print("best particle energy %.2f" % res.record.best_E)

prob = fd_problem(cfg)
for kind in ("constant", "random", "warm"):
    print("%-8s  E0 = %.2f" % (kind, fd_energy(initial_guess(kind, prob, res.grid), prob)[0]))

# Ten H1 steps from the warm start.

h1 = h1_solve(initial_guess("warm", prob, res.grid), prob, max_steps=10)
for k, E, lam, r, tau in h1.history:
    print("  step %2d  E = %.3f" % (k, E))
