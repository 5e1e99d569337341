"""Linear damping: the energy of a datum inside the well decays exponentially.

A 32x32 version of the reference linear scenario; the full 64x64 run is
``structacoustics decay --config configs/scenario_a.json``.

Run:  python3 demos/02_linear_damping.py
"""
import numpy as np

from structacoustics import runner
from structacoustics.config import resolve, scenario

cfg = resolve(scenario("A"), ["geometry.dims=[32, 32]"])
res = runner.run_simulation(cfg)
ini = res.report["initial"]
print(f"initial datum: label {ini['label']}, calE(0) = {ini['calE0']:.4g}, "
      f"scale {ini['scale']:.4g} = 0.4 x {ini['max_admissible_amplitude']:.4g}")

led = res.ledger
print(f"{len(led)} ledger rows, max |energy identity residual| = {np.abs(led.residual).max():.2e}")
for i in np.linspace(0, len(led) - 1, 6).astype(int):
    print(f"t = {led.t[i]:5.2f}   calE = {led.calE[i]:.5e}   D = {led.D[i]:.5e}   {led.label[i]}")

dec = runner.decay_analysis(led, res.well, res.geom, res.params, cfg)
fit = dec["fit"]
print(f"branch {dec['profile']['branch']}: rate {fit['rate']:.4f}, R2 {fit['r2']:.6f}")
print("global-existence claims:", res.report["theorem31"]["claims"])
