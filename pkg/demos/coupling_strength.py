"""How coupling strength moves the convergence rate, and where it stops helping."""
import numpy as np

from syncnet.conditions import quad_inverse_desync_threshold
from syncnet.graphs import SwitchingSignal
from syncnet.scenarios import EXAMPLE5_A, EXAMPLE5_B, EXAMPLE5_GRAPHS, EXAMPLE5_K, preset
from syncnet.simulate import LinearNetworkSystem, NonlinearNetworkSystem, convergence_rate, integrate

graphs = EXAMPLE5_GRAPHS()
sig = SwitchingSignal.periodic([0, 1], 1.0, 20.0)
x0 = preset("example5-positive").initial_state(0)
print("coupling  rate of log sync error")
for phi in (0.5, 1.0, 2.0, 5.0):
    sys = LinearNetworkSystem(EXAMPLE5_A, EXAMPLE5_B, EXAMPLE5_K, phi, graphs, sig)
    print(f"{phi:8.1f}  {convergence_rate(integrate(sys, x0, max_norm=1e20)):+.3f}")

# agents that push themselves apart: below the threshold coupling cannot hold them
threshold = quad_inverse_desync_threshold([g.laplacian for g in graphs], np.eye(1), np.eye(1))
print(f"\ndesynchronization threshold for f(x) = 2x: {threshold:.4f}")
short = sig.with_horizon(5.0)
for phi in (0.5 * threshold, 0.9 * threshold):
    sys = NonlinearNetworkSystem(lambda t, X: 2.0 * X, np.eye(1), phi, graphs, short, vectorized=True)
    tr = integrate(sys, np.array([0.3, -0.2, 0.1, 0.4]))
    norms = tr.error_norms()
    print(f"phi={phi:.3f}: error norm {norms[0]:.3f} -> {norms[-1]:.3e}")
