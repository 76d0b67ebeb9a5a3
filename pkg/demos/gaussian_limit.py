"""
Random twists and their Gaussian limit
======================================

Rescaled by 2 pi n^{3/2}, the integrated difference between a randomly
twisted curve and its base converges to a Gaussian process whose covariance
is an integral of the amplitude field r Z and its derivative. Here an
ensemble of random twists is compared with that covariance, entry by entry.
"""

import math

import numpy as np

from corrugate import (ExperimentConfig, MetricSpec, covariance_comparison,
                       empirical_moments, ks_gof, limit_bundle,
                       limit_covariance_matrix, make_catalog_curve, run_ensemble)

helix = make_catalog_curve("helix", {"a": 0.1, "b": 0.05})
metric = MetricSpec.constant(2.0)
grid = (0.25, 0.5, 0.75, 1.0)

# 2000 twists with n = 1024 cells each, from the shipped seed.
config = ExperimentConfig(helix, metric, n=1024, M=2000, t_grid=grid, master_seed=42)
ens = run_ensemble(config)
mom = empirical_moments(ens)

# %%
# The oracle covariance comes from quadrature, with no simulation.
bundle = limit_bundle(helix, metric)
oracle = limit_covariance_matrix(bundle, grid)
report = covariance_comparison(mom.covariance, oracle, mom.covariance_se)
print("all 144 entries within 4 SE:", report.all_pass)
print("worst standardized deviation:", round(report.worst_deviation, 2))

# %%
# The marginal at t = 1, projected on the twist direction Z(1).
_, _, Z = bundle.frames.at(np.array([1.0]))
sigma = math.sqrt(Z[0] @ oracle[-3:, -3:] @ Z[0])
print(ks_gof(ens.samples[:, -1, :] @ Z[0], sigma))

# %%
# Variance of D_n(1) in the Z(1) direction, simulated against predicted.
print("simulated:", np.var(ens.samples[:, -1, :] @ Z[0], ddof=1), " predicted:", sigma ** 2)
