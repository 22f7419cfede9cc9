"""Exact terminal sampling against the analytic transient moments.

Conditional on the chain path, the process value at time t is Gaussian
with mean and variance that accumulate in closed form across the path's
constant segments.  Sampling that Gaussian per path gives terminal draws
with no discretization error; an Euler-Maruyama scheme serves as a fully
independent cross-check.
"""

import numpy as np

from mmou import GeneratorMatrix, MmouSpec, sample_terminal_batch, simulate_euler
from mmou.moments import transient_first_moment, transient_second_moment

if __name__ == "__main__":
    chain = GeneratorMatrix([[-1.0, 1.0], [2.0, -2.0]])
    spec = MmouSpec(chain, alpha=[1.0, 3.0], gamma=[1.0, 1.0], sigma2=[0.5, 2.0], m0=0.0)

    times = [0.25, 1.0, 4.0]
    first = transient_first_moment(spec, times)
    second = transient_second_moment(spec, times)

    print("Exact sampler vs moment engine (n = 100k paths per time)")
    print("=" * 64)
    n = 100_000
    for k, t in enumerate(times):
        values, states = sample_terminal_batch(spec, n, t, seed=1000 + k)
        se = values.std(ddof=1) / np.sqrt(n)
        print(
            f"t={t:4}: MC mean {values.mean():+.4f} (SE {se:.4f})"
            f"  analytic {first.aggregate[k]:+.4f}"
        )
        print(
            f"        MC var  {values.var(ddof=1):+.4f}"
            f"            analytic {second.variance[k]:+.4f}"
        )

    print("\nEuler-Maruyama oracle (jump epochs hit exactly, O(dt) bias)")
    print("=" * 64)
    for dt in (2e-2, 1e-2, 5e-3):
        vals = simulate_euler(spec, 1.0, dt, 50_000, seed=2024)
        print(
            f"dt={dt:6}: mean {vals.mean():+.4f}  var {vals.var(ddof=1):+.4f}"
            f"   (exact: {first.aggregate[1]:+.4f}, {second.variance[1]:+.4f})"
        )

    print("\nDeterminism: same seed, same draws, any thread count")
    a, _ = sample_terminal_batch(spec, 5, 1.0, seed=42)
    b, _ = sample_terminal_batch(spec, 5, 1.0, seed=42)
    print("  first five samples:", np.round(a, 6))
    print("  repeat run equal:", bool(np.array_equal(a, b)))
