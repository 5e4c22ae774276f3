"""
Long and short memory of Hermite transforms
===========================================

A Gaussian FARIMA(0, d, 0) sequence has spectral density
|1 - e^{-i lam}|^{-2d} f*(lam).  Its q-th Hermite transform H_q(X) has
spectral density proportional to the q-fold convolution f^{*q}, which keeps a
singularity at zero only while q stays below 1/(1 - 2d).
"""
import numpy as np

from hermwave.spectra import critical_order, farima, memory_param, self_convolve

# d = 0.35 keeps long memory up to order 3; d = 0.2 loses it at order 2
for d in (0.35, 0.2):
    print(f"d = {d}: critical order q_c = {critical_order(d)}")
    for q in (1, 2, 3):
        print(f"  q = {q}: memory parameter d(q) = {memory_param(d, q):+.3f}")

# the singular case: lam^{2 d(2)} f^{*2}(lam) flattens out near the origin
g = self_convolve(farima(0.35), 2)
for lam0 in (1e-1, 1e-2, 1e-3):
    i = np.argmin(np.abs(g.lam - lam0))
    print(f"d=0.35  lam={g.lam[i]:.2e}  lam^0.4 f*2 = {g.values[i] * g.lam[i] ** 0.4:.5f}")

# the regular case: f^{*2} stays bounded with a finite value at zero
h = self_convolve(farima(0.2), 2)
c = h.n // 2
print(f"d=0.2   f*2(0) = {h.values[c]:.5f}, max over grid = {h.values.max():.5f}")
