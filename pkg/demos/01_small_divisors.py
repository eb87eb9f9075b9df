"""
Small divisors and the normal-form generator
============================================

The quartic interaction couples modes ``n1 + n2 = m1 + m2``. A quadruple is
resonant when the divisor vanishes, which for ``1/2 < alpha <= 1`` happens
exactly when ``{n1, n2} = {m1, m2}``. The generator F_N divides every
nonresonant coefficient by its divisor.
"""

import numpy as np

from birkhoff_gibbs.core import ModelParams, divisor, is_resonant
from birkhoff_gibbs.hamiltonian import f_n_value, homological_check, vector_field
from birkhoff_gibbs.oracle import resonant_sum

# a few divisors; alpha = 1 uses exact integer arithmetic
for triple in [(2, 0, 1), (4, 1, 2), (3, 5, 3)]:
    for alpha in (0.9, 1.0):
        d = divisor(*triple, alpha)
        print(f"Phi{triple} at alpha={alpha}: {d.value:+.6f} resonant={d.resonant}")

# resonance is combinatorial, never a float comparison
print(is_resonant(5, 2, 2), is_resonant(2, 0, 1))

# F_N and its vector field on a random state
rng = np.random.default_rng(0)
p = ModelParams(alpha=0.95, sigma=1, n_trunc=4)
u = rng.normal(size=9) + 1j * rng.normal(size=9)
print("F_N(u) =", f_n_value(u, p))
print("|X(u)| =", np.linalg.norm(vector_field(u, p)))

# the bracket with the kinetic energy cancels the nonresonant quartic part
hc = homological_check(u, p, resonant_sum)
print(f"lhs={hc.lhs:.12f} rhs={hc.rhs_exact:.12f} residual={hc.residual:.1e}")
print(f"sigma*mass^2 would give {hc.rhs_paper:.6f}, which double counts sigma/2 * sum |u_j|^4")
