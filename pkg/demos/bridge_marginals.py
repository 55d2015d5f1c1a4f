"""
Bridges between two graph states
================================

A bridge pins a diffusion at both ends of a time window. Simulate many
scalar bridges from 0 to 2 and compare the midpoint spread with the
closed-form Gaussian.
"""
import numpy as np

from hogdiff import sde

sched = sde.NoiseSchedule(theta_min=1.0, theta_max=1.0, sigma2=1.0)
seg = sde.BridgeSegment(0.0, 1.0, 0.0, 2.0, sched)

rng = np.random.default_rng(0)
x = np.zeros(50_000)
dt = 1e-3
for k in range(500):
    t = k * dt
    x += sde.bridge_drift(x, t, seg) * dt + np.sqrt(sched.g2(t) * dt) * rng.standard_normal(x.size)

m = sde.bridge_conditional(seg, 0.5)
print(f"simulated   mean {x.mean():.4f}  var {x.var():.4f}")
print(f"closed form mean {float(m.mean):.4f}  var {m.var:.4f}")

# the drift blows up near the end of the window, which is what pins the path
for t in (0.5, 0.9, 0.99):
    print(f"t={t:<5} drift at x=0: {float(sde.bridge_drift(0.0, t, seg)):8.2f}")

# with a tiny mean reversion the bridge is the Brownian one
flat = sde.BridgeSegment(0.0, 1.0, 0.0, 2.0, sde.NoiseSchedule(theta_min=1e-5, theta_max=1e-5))
print("Brownian limit drift at t=0.5, x=0:", float(sde.bridge_drift(0.0, 0.5, flat)), "(expect 4.0)")
