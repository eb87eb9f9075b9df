"""
Convergence of truncated flows
==============================

For data with |u(n)| ~ <n>^(-s-1) the truncated flows approach the
reference flow in L2 at a rate close to N^(-(s - s')).
"""

from birkhoff_gibbs.core import ModelParams
from birkhoff_gibbs.flow import decaying_state, truncation_convergence

u0 = decaying_state(64, s=1.0, seed=6)
rows, slope = truncation_convergence(u0, 1.0, ModelParams(1.0, 1, 4), 1.0, 0.0,
                                     [4, 8, 16, 32], n_ref=64)
for n, err in rows:
    print(f"N={n:2d}  error {err:.3e}")
print("fitted slope", round(slope, 3))
