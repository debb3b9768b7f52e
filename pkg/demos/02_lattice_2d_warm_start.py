# coding: utf-8

# # Warm starting a finite-difference solver in 2D
#
# V = 2 sin^2(pi x/4) sin^2(pi y/4) on (-16, 16)^2, beta = 10.  The
# particle flow is cheap and only roughly right; the H1 Sobolev flow on a
# 200 x 200 grid is accurate but needs a starting guess.  Here we compare
# three guesses.  Takes two to three minutes.

import numpy as np

from pwgf.experiments import fd_problem, initial_guess, make_config, run_pwgf, warmstart
from pwgf.h1 import fd_energy

cfg = make_config("gpe2d", seed=0)
print("training the transport map (%d particles, %d steps)..." % (cfg.pwgf.N, cfg.pwgf.K))
res = run_pwgf(cfg)
print("best particle energy %.4f after %.0f s" % (res.record.best_E, res.record.wall_time))

# The map is evaluated on a 40 x 40 grid and interpolated bilinearly onto
# the FD grid.

prob = fd_problem(cfg)
for kind in ("constant", "random", "warm"):
    E0, lam0 = fd_energy(initial_guess(kind, prob, res.grid), prob)
    print("%-8s  E0 = %.4f" % (kind, E0))

# Now run H1 to convergence from each guess.  steps_to_tol counts steps
# until the energy is within 1e-4 of the converged constant-one value.

rows, E_ref = warmstart(cfg, res.grid)
print("reference E*_h = %.5f" % E_ref)
for r in rows:
    print("%-8s  |E1 - E*| = %.2e   steps to 1e-4: %s" % (r["init"], r["E1_gap"], r["steps_to_tol"]))
