"""A weight-clipped critic's loss gap tracks the earth-mover distance.

Fit a small dense critic to separate N(0, 1) from N(delta, 1) for a few shifts
and compare its gap against the exact 1-D EMD of the samples.
"""

from momentwgan.studies import critic_emd_study

rows, rho = critic_emd_study(deltas=(0.5, 1.0, 2.0, 4.0), n=512, tau=0.01, steps=300)
print(f"{'delta':>6} {'EMD':>8} {'critic gap':>12}")
for r in rows:
    print(f"{r.delta:>6g} {r.emd:>8.4f} {r.gap:>12.3e}")
print(f"spearman rho = {rho:.3f}")

# the gap is tiny in absolute terms because clipping at 0.01 shrinks the
# critic's Lipschitz constant, but its ordering follows the EMD
