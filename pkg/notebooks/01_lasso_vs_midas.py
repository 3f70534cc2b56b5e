"""
Lasso versus MIDAS on a simulated AR-plus-VAR design
====================================================

Run with ``python notebooks/01_lasso_vs_midas.py``.  Takes about a minute.
"""

# %%
# One dataset from model M1: a block VAR(1) of 100 covariates with Student-t
# innovations, and a response loading on the first lag of y and of 5 covariates.
import numpy as np

from deplasso.dgp import simulate_dataset
from deplasso.lasso import fit_path_bic
from deplasso.experiments import ExperimentConfig, run_experiment, stderr_progress

data = simulate_dataset("M1", n=100, p=100, s=5, seed=1)
train = data.train()
print("design:", train.X.shape, " nonzero truth:", np.flatnonzero(data.truth))

# %%
# BIC along a warm-started path.  The selected support should contain the
# AR coefficient (column 0) and the five active covariates.
path = fit_path_bic(train)
fit = path.selected
print(f"selected lambda {fit.lam:.3f} with support {np.flatnonzero(fit.coef)}")
print("estimation error |b - beta|_inf:", np.abs(fit.coef - data.truth).max())

# %%
# Forecasts for the 10 held-out periods.
Z_test, y_test = data.test()
print("holdout RMSE:", np.sqrt(np.mean((Z_test @ fit.coef - y_test) ** 2)))

# %%
# A small Monte Carlo over the three sample sizes.  MIDAS is the
# parametric benchmark restricted to the first 100 covariates.
cfg = ExperimentConfig(ns=(50, 100, 200), mc_reps=20, seed=7)
res = run_experiment(cfg, progress=stderr_progress)
print(res.text_table())
