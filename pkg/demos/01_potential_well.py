"""Potential well of a small grid: embedding constants, the radius s*, the
depth d, and how states are labelled along a ray.

Run:  python3 demos/01_potential_well.py
"""
import numpy as np

from structacoustics import build_geometry, ModelParams
from structacoustics import well as wl

geom = build_geometry("reduced-2D", 24)
params = ModelParams(p=3.0, q=3.0)

# Best constants in |u|_{p+1}^{p+1} <= K1 |grad u|^{p+1} (and the plate analogue),
# found by normalised ascent from 16 random starts.
well, emb, depth = wl.compute_well_geometry(geom, params, seed=0)
print(f"K1 = {emb.K1:.6g}   K2 = {emb.K2:.6g}")
print(f"restart spread K1: {np.ptp(emb.restarts_K1) / emb.K1:.1e}")

# s* is where Lambda(s) peaks; Lambda(s*) is a lower bound for the depth.
print(f"s* = {well.s_star:.6g}   Lambda(s*) = {well.lambda_at_sstar:.6g}   d_est = {well.d_est:.6g}")
print(f"delta = {well.delta:.4g}   xi = {well.xi():.4f}   Lambda(s* - delta) = {well.lambda_delta:.6g}")

# Walk outward along the direction of the extremal field: the label flips from
# the stable part W1 to W2 once, passing the Nehari manifold on the way.
u = emb.u_field / np.sqrt(emb.u_field @ (geom.stiffness_u @ emb.u_field))
w = np.zeros(geom.n_w)
for lam in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
    c = wl.classify_vec(lam * u, lam * w, well, geom, params)
    print(f"lam = {lam:5.1f}   J = {c.J:10.4g}   N = {c.nehari:11.4g}   {c.label}")
