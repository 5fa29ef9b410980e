"""Spectral statistics across the band-width crossover.

Density of states against the semicircle, then nearest-neighbour spacings
for a diagonal matrix (Poisson) and a full GUE matrix (level repulsion).
"""

import numpy as np

import bandloc as bl
from bandloc.harness.runner import minami_lengths

# %% density of states, W = 8, N = 256
h = bl.dos_histogram(bl.gaussian_band_spec(8, 256, seed=1), samples=40, bins=16, lim=1.8)
print(f"sigma^2 = {h.sigma ** 2:.4f}, sup deviation from the semicircle = {h.sup_deviation:.4f}")
centers = 0.5 * (h.edges[1:] + h.edges[:-1])
for c, d, ref in zip(centers[::3], h.density[::3], h.reference[::3]):
    print(f"  x = {c:+.2f}  histogram {d:.3f}  semicircle {ref:.3f}")

# %% spacings: W = 1 vs W = N
for W, N, draws in ((1, 400, 20), (100, 100, 60)):
    ev = bl.sample_spectra(bl.gaussian_band_spec(W, N, seed=2), draws)
    sp = bl.spacing_distribution(ev)
    closer = "Poisson" if sp.ks_poisson < sp.ks_surmise else "surmise"
    print(f"W = {W:3d}, N = {N}: KS Poisson {sp.ks_poisson:.3f}, KS surmise {sp.ks_surmise:.3f} -> {closer}")

# %% few eigenvalue pairs in tiny intervals: the rate should scale like |I|^2
# once |I| is well below the mean spacing; longer intervals bend the curve down
spec = bl.gaussian_band_spec(2, 64, seed=4)
for lo, label in ((0.05, "small intervals"), (0.5, "intervals of a few spacings")):
    mr = bl.minami_pair_rate(spec, minami_lengths(spec, lo, 6), samples=5000)
    print(f"{label:27s} pair-rate log-log slope {mr.slope:.3f} +- {mr.slope_se:.3f}")
