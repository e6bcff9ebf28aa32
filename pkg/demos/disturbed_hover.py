"""
Hover under unknown disturbances
================================

Runs the shipped disturbed-hover scenario twice, with and without the
twelve learners, and compares the tracking error and the learned
disturbance estimate. Takes about half a minute per run.
"""

from pathlib import Path
import warnings

import numpy as np

from slicequad import ScenarioConfig, load_config, run_scenario

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "disturbed_hover.yaml")
off = cfg.to_dict()
off["learning"] = False

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    log, m = run_scenario(cfg)
    log_off, m_off = run_scenario(ScenarioConfig.from_dict(off))

print("terminal position RMS, learning on : %.4f m" % m.terminal_rms_e_x)
print("terminal position RMS, learning off: %.4f m" % m_off.terminal_rms_e_x)
print("fitted envelope: beta %.2f 1/s, epsilon %.4f" % (m.nes_beta, m.nes_epsilon))

# the estimates stay inside their boxes but need not reach the true values
print("final mass estimates   ", np.round(m.m_hat, 3), "true", cfg.vehicle.m)
print("final inertia estimates", np.round(m.J_hat, 4), "true", cfg.vehicle.J)

# horizontal disturbance against its RBF estimate, sampled once a second.
# The force law multiplies the estimate by m_hat, so with m_hat below m the
# slice settles near (m / m_hat) * phi rather than phi itself
t = log.t
for k in np.searchsorted(t, np.arange(20.0, 30.0, 1.0)):
    print("t=%5.1f  phi_x1 %+6.3f  estimate %+6.3f"
          % (t[k], log.block("phix")[k, 0], log.block("phibx")[k, 0]))
