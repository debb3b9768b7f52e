# coding: utf-8

# # How much do N, H and the number of Euler steps matter?
#
# Vary one 1D hyperparameter at a time and look at the smallest L2 error
# reached along the run.  Each run is about a minute, so this takes a
# while; trim the value lists to go faster.

from pwgf.experiments import ablation, make_config

cfg = make_config("gpe1d")
for axis, values in (("N", [1000, 3000, 10000]), ("H", [5, 10, 20]), ("N_ODE", [10, 80])):
    for r in ablation(cfg, axis, values):
        print("%-5s = %-6d  best |u-u*| = %.4f  final = %.4f  E = %.4f"
              % (axis, r["value"], r["best_err"], r["final_err"], r["best_E"]))
