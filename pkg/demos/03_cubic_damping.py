"""Cubic damping near the origin: decay slows to the algebraic rate (1 + t)^(-1).

A 32x32 version of the reference cubic scenario, plus the comparison ODE
bound built from the fitted stabilization constant.

Run:  python3 demos/03_cubic_damping.py
"""
import numpy as np

from structacoustics import runner
from structacoustics.config import resolve, scenario

cfg = resolve(scenario("B"), ["geometry.dims=[32, 32]"])
res = runner.run_simulation(cfg)
dec = runner.decay_analysis(res.ledger, res.well, res.geom, res.params, cfg)

prof, fit = dec["profile"], dec["fit"]
print(f"majorant exponents {prof['nu1']}, {prof['nu2']} -> beta = {prof['beta']}, b = {prof['b']}")
print(f"log-log slope on [{fit['window'][0]:.1f}, {fit['window'][1]:.1f}]: {fit['loglog_slope']:.3f}")
print(f"sup calE (1 + t)^b = {fit['envelope_sup']:.4g}  vs  calE(0) = {res.ledger.calE[0]:.4g}")

chk = dec["stabilization_check"]
print(f"R(T) = calE / Phi(D) at T = {np.round(chk['T'], 2).tolist()}: {np.array(chk['ratios'])}")
if chk["notice"]:
    print("note:", chk["notice"])

env = dec["envelope"]
t, E, bound = map(np.asarray, (env["t"], env["calE"], env["sigma_bound"]))
print(f"calE(t) <= sigma(t/T - 1) everywhere: {env['bound_holds']}")
for i in np.linspace(0, t.size - 1, 5).astype(int):
    print(f"t = {t[i]:5.1f}   calE = {E[i]:.4e}   bound = {bound[i]:.4e}")
