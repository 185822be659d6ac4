"""Simulate the positive four-node network next to its marginally stable variant."""
from syncnet.scenarios import preset
from syncnet.simulate import integrate_sync_error, pairwise_from_error

for name in ("example5-positive", "example5-counterexample"):
    sc = preset(name)
    times, E = integrate_sync_error(sc.system, sc.initial_state(0), dt=sc.dt)
    print(f"\n{name} (expected {sc.expected})")
    for t in (0, 5, 10, 20, 30, 50):
        if t <= times[-1]:
            k = abs(times - t).argmin()
            print(f"  t={times[k]:5.1f}  pairwise deviation {pairwise_from_error(E[k], sc.system.n):.3e}")
