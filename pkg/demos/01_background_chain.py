"""Background chain basics: stationary law, deviation matrices, path sampling.

The modulating process is a continuous-time Markov chain on a few states.
Everything downstream (moments, transforms, scaling limits) is built from
its stationary law pi, the deviation matrix D, and the exponentially
discounted deviation D(gamma).
"""

import numpy as np

from mmou import (
    GeneratorMatrix,
    deviation_set,
    occupation_integral,
    resolvent_deviation,
    sample_path,
    stationary_distribution,
    substream,
    transient_distribution,
)

if __name__ == "__main__":
    print("Two-state reference chain")
    print("=" * 60)
    chain = GeneratorMatrix([[-1.0, 1.0], [2.0, -2.0]])
    print("Q =\n", chain.q)

    pi = stationary_distribution(chain)
    print("\nstationary law pi:", pi, " (exact: 2/3, 1/3)")

    print("\ntransient law from state 1:")
    for t in (0.25, 1.0, 4.0):
        print(f"  p({t}) = {transient_distribution(chain, [1.0, 0.0], t)}")

    ds = deviation_set(chain)
    print("\ndeviation matrix D =\n", ds.deviation)
    print("check D @ 1 =", ds.deviation @ np.ones(2), " (zero vector)")
    print("check pi @ D =", pi @ ds.deviation, " (zero vector)")

    print("\ndiscounted deviation D(gamma):")
    for gamma in (0.5, 1.0, 2.0):
        print(f"  gamma={gamma}: diag = {np.diag(resolvent_deviation(chain, gamma))}")
    print("  gamma -> 0 recovers D:", np.diag(resolvent_deviation(chain, 1e-6)))

    print("\nexact path sampling (seeded streams, reproducible):")
    path = sample_path(chain, pi, 10.0, substream(seed=7, index=0))
    print(f"  {path.n_jumps} jumps over [0, 10], first few: {path.jump_times[:4]}")
    frac = occupation_integral(path, [1.0, 0.0], 10.0) / 10.0
    print(f"  time share of state 1: {frac:.3f} vs pi_1 = {pi[0]:.3f}")

    long_path = sample_path(chain, pi, 10_000.0, substream(seed=7, index=1))
    frac = occupation_integral(long_path, [1.0, 0.0], 10_000.0) / 10_000.0
    print(f"  over [0, 1e4]: {frac:.4f} (ergodic theorem at work)")
