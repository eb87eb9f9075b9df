"""
Moments of the density exponent
===============================

G_N is the time derivative of the energy along the flow at t = 0. Its
moments, its truncation error and the exponential moments of the quartic
norm control the density. Counts here are small so the script runs in
seconds; the acceptance suite uses the full sample sizes.
"""

from birkhoff_gibbs.core import ModelParams
from birkhoff_gibbs.flow import fit_loglog_slope
from birkhoff_gibbs.transport import exp_moment, gn_moments, gn_truncation_decay, zeta

tab = gn_moments(ModelParams(1.0, 1, 8), range(2, 11), 50_000, seed=5)
for p, est in tab.rows:
    print(f"p={p:4.1f}  ||G_N||_p = {est.mean:.4e} +- {est.stderr:.1e}")
print("growth exponent", round(tab.slope, 3), "reference 1/zeta =", 1 / zeta(1.0))

# the unnormalised norm carries a factor P(ball)^(1/p); dividing it out
acc = tab.rows[0][1].acceptance
ps = [p for p, _ in tab.rows]
print("exponent under the normalised ball measure",
      round(fit_loglog_slope(ps, [e.mean / acc ** (1 / p) for p, e in tab.rows]), 3))

dec = gn_truncation_decay(ModelParams(1.0, 1, 32), [4, 8, 16], 60_000, seed=5)
for m, est in dec.rows:
    print(f"M={m:2d}  ||G_N - G_M||_2 = {est.mean:.3e}")
print("slope", round(dec.slope, 3), "reference", dec.reference)

for n, est in exp_moment(ModelParams(1.0, -1, 4), 0.5, [4, 8, 16, 32], 60_000, seed=5):
    print(f"N={n:2d}  E[1_ball exp(|u|_4^4 / 2)] = {est.mean:.4f} +- {est.stderr:.4f}")
