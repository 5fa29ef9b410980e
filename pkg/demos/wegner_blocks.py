"""Wegner-type tail for one random block.

P(||(V - A)^{-1}|| > t W^{3/2}) is bounded by kappa / t with
kappa = 2 pi sup h, for any fixed Hermitian shift A.
"""

import numpy as np

import bandloc as bl

W = 6
law = bl.GaussianWigner()
A = law.draw(np.random.default_rng(5), W, bl.Symmetry.COMPLEX, 1)[0]
t = np.geomspace(0.5, 50, 7)
c = bl.wegner_block_tail(law, W, A, t, samples=20_000, seed=2)
print(f"kappa = {c.kappa:.4f}")
for ti, p, ref, tb in zip(c.t, c.prob, c.reference, c.trace_bound):
    print(f"  t = {ti:6.2f}  P = {p:.4f}  trace bound {tb:.4f}  kappa/t {ref:.4f}")
