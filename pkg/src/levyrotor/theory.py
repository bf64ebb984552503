"""Analytical predictions for the momentum spread of the noisy kicked rotor.

All series are indexed by the number of kicks ``t = 0..T``.  The noiseless spread is
modelled by ``var_p0(t) = D* t* (1 - exp(-t/t*))`` and enters the noisy prediction via
its discrete force-correlation kernel :func:`c0_from_varp0`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .mittag_leffler import mittag_leffler
from .renewal import RenewalTables, decoherence_pair_row

__all__ = [
    "DEFAULT_HBAR",
    "DEFAULT_K",
    "DEFAULT_DSTAR",
    "LocalizationModel",
    "PredictionSeries",
    "var_p0_model",
    "stationary_crossover",
    "c0_from_varp0",
    "predict_variance_full",
    "ml_decoherence",
    "ml_stretched_exponential",
    "ml_power_law",
    "subdiffusion_asymptote",
    "subdiffusion_power_law",
    "effective_diffusion",
]

DEFAULT_K = 7.5
DEFAULT_HBAR = 2 * math.pi * 577 / 13872
DEFAULT_DSTAR = 45.28


@dataclass(frozen=True)
class LocalizationModel:
    D_star: float
    t_star: float

    def __post_init__(self):
        if not (self.D_star > 0 and self.t_star > 0):
            raise ValueError("D_star and t_star must be positive")

    @classmethod
    def from_dstar(cls, D_star: float, hbar: float) -> "LocalizationModel":
        """Single-parameter form with ``t* = D*/hbar**2``."""
        return cls(D_star, D_star / hbar ** 2)

    @property
    def plateau(self) -> float:
        return self.D_star * self.t_star

    @staticmethod
    def classical_diffusion(K: float) -> float:
        return 0.5 * K * K


def var_p0_model(model: LocalizationModel, t):
    t = np.asarray(t, dtype=np.float64)
    return model.D_star * model.t_star * -np.expm1(-t / model.t_star)


def stationary_crossover(model: LocalizationModel, t_c: float, t):
    """Perturbative spread under stationary noise with coherence time ``t_c``."""
    if not t_c > 0:
        raise ValueError("t_c must be positive")
    t = np.asarray(t, dtype=np.float64)
    Ds, ts = model.D_star, model.t_star
    diffusive = Ds / (1 + t_c / ts) * t
    bounded = Ds * ts / (1 + ts / t_c) ** 2 * -np.expm1(-t / ts - t / t_c)
    return diffusive + bounded


def effective_diffusion(model: LocalizationModel, t_c: float, mean_wait: float = 1.0) -> float:
    """Asymptotic diffusion constant ``D*/(1 + mean_wait t_c / t*)``."""
    return model.D_star / (1 + mean_wait * t_c / model.t_star)


def c0_from_varp0(model: LocalizationModel, T: int) -> np.ndarray:
    """Lag kernel with ``sum_{a,b<t} C0(|a-b|) = var_p0(t)``.

    ``C0(0) = V(1)`` and ``C0(d) = (V(d+1) - 2 V(d) + V(d-1)) / 2`` for ``d >= 1``.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    V = var_p0_model(model, np.arange(T + 1))
    C = np.empty(T)
    C[0] = V[1]
    C[1:] = 0.5 * (V[2:T + 1] - 2 * V[1:T] + V[0:T - 1])
    return C


@dataclass
class PredictionSeries:
    var_p: np.ndarray
    localized_term: np.ndarray
    noise_floor: np.ndarray
    memory_terms: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.var_p.size - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.T + 1)

    def at(self, times) -> np.ndarray:
        return self.var_p[np.asarray(times, dtype=np.int64)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "var_p", "localized_term", "noise_floor", "memory_terms"])
            for t in range(self.T + 1):
                wr.writerow([t] + [f"{a[t]:.17g}" for a in
                                   (self.var_p, self.localized_term, self.noise_floor, self.memory_terms)])


def _double_sum(model, tables, kappa, T, coefficient):
    C = c0_from_varp0(model, max(T, 2))
    var = np.zeros(T + 1)
    acc = 0.0
    for t in range(T):
        # new row of the symmetric sum: kick t against kicks b < t, plus the diagonal
        row = decoherence_pair_row(tables, t, coefficient)
        cross = np.dot(C[t:0:-1], row[:t]) if t else 0.0
        acc += C[0] * row[t] + 2.0 * cross
        var[t + 1] = acc
    return var


def _integral_form(model, tables, T, coefficient):
    """Kernel part of the integrated-by-parts form on the integer grid, forward differences."""
    V = var_p0_model(model, np.arange(T + 2))
    D1 = tables.D1
    out = np.zeros(T + 1)
    cum_single = 0.0
    cum_double = 0.0
    prev_row = decoherence_pair_row(tables, 0, coefficient)
    for t in range(1, T + 1):
        row = decoherence_pair_row(tables, t, coefficient)
        # int_0^t V(t-s) d_s D(t,s)
        dsD = np.diff(row)
        term_a = np.dot(V[t:0:-1], dsD)
        # int_0^t V(s) d_s D(s,0), accumulated
        cum_single += V[t - 1] * (D1[t] - D1[t - 1])
        # int_0^t ds' int_0^s' ds'' V(s'-s'') d_s' d_s'' D(s',s''), accumulated over s' = t-1
        s1 = t - 1
        if s1 >= 1:
            # cells s'' = 0..s1-1: D(s1+1, s''+1) - D(s1+1, s'') - D(s1, s''+1) + D(s1, s'')
            mixed = np.diff(row[:s1 + 1]) - np.diff(prev_row[:s1 + 1])
            cum_double += np.dot(V[s1:0:-1], mixed)
        out[t] = V[t] * D1[t] + term_a - cum_single - cum_double
        prev_row = row
    return out


def predict_variance_full(model: LocalizationModel, tables: RenewalTables, kappa: float, T: int,
                          form: str = "double_sum", coefficient: str = "discrete") -> PredictionSeries:
    """Momentum variance under renewal noise.

    ``double_sum``: ``var(t) = sum_{a,b<t} C0(|a-b|) D(max, min) + kappa/2 Nbar(t)``, built
    row by row in ``O(T**2)``.  ``integral``: the integrated-by-parts form discretized
    with forward differences on the integer grid (a cross-check).
    """
    if T > tables.T or (form == "integral" and T + 1 > tables.T):
        raise ValueError(f"horizon {T} exceeds renewal table horizon {tables.T}")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    floor = 0.5 * kappa * tables.Nbar[:T + 1]
    localized = var_p0_model(model, np.arange(T + 1)) * tables.D1[:T + 1]
    if form == "double_sum":
        kernel = _double_sum(model, tables, kappa, T, coefficient)
        meta = {"form": "double_sum", "coefficient": coefficient}
    elif form == "integral":
        kernel = _integral_form(model, tables, T, coefficient)
        meta = {"form": "integral", "coefficient": coefficient,
                "derivative": "forward difference, d_s D(t,s) ~ D(t,s+1) - D(t,s), D(t,t) = 1"}
    else:
        raise ValueError(f"unknown form {form!r}")
    var = kernel + floor
    return PredictionSeries(var, localized, floor, kernel - localized, meta)


def ml_decoherence(alpha: float, tables: RenewalTables, t_c: float, t):
    """``E_alpha(-Gamma(1+alpha) Nbar(t) / t_c)``."""
    t = np.asarray(t, dtype=np.int64)
    x = gamma(1 + alpha) * tables.Nbar[t] / t_c
    return mittag_leffler(alpha, -x)


def ml_stretched_exponential(alpha: float, c: float, t_c: float, t):
    """Early-time form ``exp(t**alpha / (Gamma(-alpha) c t_c))``."""
    t = np.asarray(t, dtype=np.float64)
    return np.exp(t ** alpha / (gamma(-alpha) * c * t_c))


def ml_power_law(alpha: float, c: float, t_c: float, t):
    """Late-time form ``(c t_c / alpha) t**(-alpha)``."""
    t = np.asarray(t, dtype=np.float64)
    return (c * t_c / alpha) * t ** (-alpha)


def subdiffusion_asymptote(model: LocalizationModel, tables: RenewalTables, t_c: float, t):
    """``(D* t* / t_c) Nbar(t)`` from the exact mean event count."""
    t = np.asarray(t, dtype=np.int64)
    return model.plateau / t_c * tables.Nbar[t]


def subdiffusion_power_law(model: LocalizationModel, alpha: float, c: float, t_c: float, t):
    """Closed form ``(D* t*/t_c) sin(pi alpha)/(pi c) t**alpha`` with a fitted tail coefficient."""
    t = np.asarray(t, dtype=np.float64)
    return model.plateau / t_c * math.sin(math.pi * alpha) / (math.pi * c) * t ** alpha
