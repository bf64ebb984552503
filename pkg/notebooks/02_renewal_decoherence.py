# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Renewal noise and non-exponential decoherence
#
# Noise kicks arrive at renewal times with Yule-Simon waiting times, whose tail falls
# as `tau**(-1-alpha)`.  For alpha < 1 the mean wait is infinite and events thin out
# over time.  Here we tabulate the sprinkling density, the mean event count and the
# decoherence factor `D(t,0)` from their renewal equations, and compare the latter
# with the Mittag-Leffler form.

# %%
import numpy as np
from scipy.special import gamma

from levyrotor.mittag_leffler import mittag_leffler
from levyrotor.renewal import WaitingTimeDistribution, mc_renewal_oracle, renewal_tables
from levyrotor.theory import ml_decoherence, ml_power_law

alpha, t_c, T = 0.5, 41.0, 20_000
dist = WaitingTimeDistribution.yule_simon(alpha)
tab = renewal_tables(dist, t_c, T)

# %% [markdown]
# A quick Monte Carlo check of the tables at a few times.

# %%
mc = mc_renewal_oracle(dist, t_c, 1024, 5000, np.random.default_rng(0))
for t in (16, 128, 1024):
    print(f"t={t:5d}  Nbar {tab.Nbar[t]:8.3f} (MC {mc.Nbar[t]:8.3f} +- {mc.Nbar_se[t]:.3f})"
          f"   D {tab.D1[t]:.4f} (MC {mc.D1[t]:.4f} +- {mc.D1_se[t]:.4f})")

# %% [markdown]
# The Mittag-Leffler approximation uses the exact mean event count.  At late times
# both decay as a power law with amplitude `c t_c / alpha`, where `c = alpha Gamma(alpha+1)`
# is the tail amplitude of the Yule-Simon law.

# %%
t = np.array([10, 100, 1000, 10_000, 20_000])
approx = ml_decoherence(alpha, tab, t_c, t)
late = ml_power_law(alpha, alpha * gamma(alpha + 1), t_c, t)
for row in zip(t, tab.D1[t], approx, late):
    print("t={:6d}  exact {:.4f}  ML {:.4f}  power law {:.4f}".format(*row))

# %%
print("E_1/2(-x) for x = 1, 10, 100:", mittag_leffler(0.5, -np.array([1.0, 10.0, 100.0])))
