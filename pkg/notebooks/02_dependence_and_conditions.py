"""
Dependence measures, rates and design conditions
================================================

Run with ``python notebooks/02_dependence_and_conditions.py``.
"""

# %%
# Coupled-process Monte Carlo for a GARCH(1,1) error process.  The
# dependence measure decays geometrically in the lag.
import numpy as np

from deplasso.dgp import ProcessSpec
from deplasso.dependence import estimate_fdm, rate_profile
from deplasso.conditions import (
    PartitionedSigma,
    bounded_correlation_sigma,
    irrepresentable_all_signs,
    restricted_eigenvalue,
)

rep = estimate_fdm(ProcessSpec("GARCH11", garch=(0.1, 0.1, 0.8)), 2, 20, 20_000, seed=0)
for i in (1, 5, 10, 20):
    print(f"delta_{i:<2d} = {rep.delta[i, 0]:.4f}")

# %%
# A linear process with known coefficients has a closed-form measure
# sqrt(2) |A_i row j|_2, which the simulation reproduces.
rng = np.random.default_rng(0)
A = [rng.standard_normal((2, 2)) * 0.6 ** l for l in range(30)]
lin = estimate_fdm(ProcessSpec("LinearProcess", coefs=tuple(A)), 2, 5, 50_000, seed=1)
exact = np.sqrt(2) * np.array([np.linalg.norm(A[i], axis=1) for i in range(6)])
print("max relative error:", np.abs(lin.delta[:6] / exact - 1).max())

# %%
# Rate exponents: nu = 1 while alpha_X >= 1/2 - 2/gamma (0.25 here) and
# leaves that branch continuously below the threshold.
for ax in (0.45, 0.25, 0.1):
    r = rate_profile(8, 8, ax, 0.45)
    print(f"alpha_X={ax}: tau={r.tau}, nu={r.nu:.2f}, rho={r.rho:.2f}, regime {r.lambda_regime}")

# %%
# Restricted eigenvalue and the irrepresentable value for an equicorrelated
# design.  Values below one support sign recovery.
S = bounded_correlation_sigma(20, 3, 0.5, worst_case=True)
print("kappa (sparse bound):", restricted_eigenvalue(S, 3))
print("irrepresentable:", irrepresentable_all_signs(PartitionedSigma.from_sigma(S, [0, 1, 2])))
