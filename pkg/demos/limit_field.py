"""
The limit field of wavelet coefficients
=======================================

Large-scale wavelet coefficients, suitably normalized, converge to a field
indexed by (m, k).  Its covariance reduces to a one-dimensional oscillatory
integral which the library evaluates with singular quadrature.
"""
import numpy as np

from hermwave.filters import build_mra_bank
from hermwave.limit import LimitSpec, limit_cov, limit_cov_block

bank = build_mra_bank("haar", 10)

# second-chaos limit (Rosenblatt type) with d = 0.35
spec = LimitSpec.from_bank(bank, q=2, d=0.35, K=0)
# K=0 indexes the increments; one integration (K=1) gives H = 0.7
print(f"self-similarity exponent H = {spec.H:.3f} (K=0), "
      f"{LimitSpec.from_bank(bank, 2, 0.35, 1).H:.3f} (K=1)")

# covariance across shifts at a fixed scale decays but stays positive
block = limit_cov_block(spec, [(0, k) for k in range(5)])
print("correlations with W(0,0):", np.round(block.correlation()[0], 4))

# variance ratio between scales follows 2^{2 m d(q)}
v0 = limit_cov(spec, (0, 0), (0, 0))[0]
for m in (1, 2, 3):
    ratio = limit_cov(spec, (m, 0), (m, 0))[0] / v0
    print(f"m={m}: ratio {ratio:.5f}  vs  {2.0 ** (2 * m * spec.dq):.5f}")
