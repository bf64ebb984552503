"""Noise-averaged simulations of the kicked rotor and their comparison with theory.

Realizations are propagated in fixed batches of ``config.batch_size`` (rows of one
2-d FFT).  Batch membership depends only on the config, so results are bit-identical
whatever the number of worker processes (``LEVYROTOR_WORKERS``).
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .renewal import (
    WaitingTimeDistribution,
    coherence_time,
    generate_realization,
    realization_rng,
    renewal_tables,
)
from .rotor import FloquetPropagator, LatticeParams, LeakageError, choose_basis_size
from .theory import (
    DEFAULT_DSTAR,
    DEFAULT_HBAR,
    DEFAULT_K,
    LocalizationModel,
    PredictionSeries,
    predict_variance_full,
    var_p0_model,
)

__all__ = [
    "ExperimentConfig",
    "EnsembleResult",
    "EnsembleError",
    "FitError",
    "ExponentFit",
    "ComparisonReport",
    "log_sample_times",
    "run_single_realization",
    "run_ensemble",
    "fit_dstar",
    "fit_exponent",
    "compare_theory_sim",
    "theory_for",
]

log = logging.getLogger(__name__)

WORKERS_ENV = "LEVYROTOR_WORKERS"
MAX_FAILED_FRACTION = 0.1
DISTS = ("yule_simon", "deterministic", "geometric")


class EnsembleError(RuntimeError):
    pass


class FitError(RuntimeError):
    pass


def log_sample_times(T: int, per_decade: int = 64) -> tuple:
    """Integer times ``0..T``, log-spaced at up to ``per_decade`` points per decade, ends included."""
    if T < 1:
        return (0,)
    n = int(math.ceil(per_decade * math.log10(T))) + 1
    t = np.unique(np.rint(np.logspace(0, math.log10(T), max(n, 2))).astype(np.int64))
    return tuple(int(x) for x in np.unique(np.concatenate(([0], t, [T]))))


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float = 0.5
    kappa: float = 1 / 300
    T: int = 10_000
    n_realizations: int = 200
    base_seed: int = 0
    K: float = DEFAULT_K
    hbar: float = DEFAULT_HBAR
    M: int | None = None
    dist: str = "yule_simon"
    tau0: int = 1
    p: float | None = None
    sample_times: tuple | None = None
    points_per_decade: int = 64
    theory: bool = True
    D_star: float = DEFAULT_DSTAR
    guard_fraction: float = 0.05
    leak_threshold: float = 1e-6
    batch_size: int = 50
    check_every: int = 16
    precision: str = "double"

    def __post_init__(self):
        def bad(name, why):
            raise ValueError(f"{name}: {why} (got {getattr(self, name)!r})")

        if self.dist not in DISTS:
            bad("dist", f"must be one of {DISTS}")
        if self.dist == "yule_simon" and not self.alpha > 0:
            bad("alpha", "must satisfy alpha > 0")
        if self.dist == "geometric" and not (self.p is not None and 0 < self.p <= 1):
            bad("p", "geometric waiting times need 0 < p <= 1")
        if int(self.tau0) != self.tau0 or self.tau0 < 1:
            bad("tau0", "must be an integer >= 1")
        if not self.kappa >= 0:
            bad("kappa", "must satisfy kappa >= 0")
        if int(self.T) != self.T or self.T < 1:
            bad("T", "must be an integer >= 1")
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            bad("n_realizations", "must be an integer >= 1")
        if not self.hbar > 0:
            bad("hbar", "must be positive")
        if self.M is not None and (int(self.M) != self.M or self.M < 8 or self.M % 2):
            bad("M", "must be an even integer >= 8")
        if not 0 < self.guard_fraction < 0.5:
            bad("guard_fraction", "must lie in (0, 0.5)")
        if self.batch_size < 1:
            bad("batch_size", "must be >= 1")
        if self.check_every < 1:
            bad("check_every", "must be >= 1")
        if self.precision not in ("double", "single"):
            bad("precision", "must be 'double' or 'single'")
        if not self.D_star > 0:
            bad("D_star", "must be positive")
        if self.sample_times is not None:
            st = tuple(int(x) for x in self.sample_times)
            if list(st) != sorted(set(st)) or st[0] < 0 or st[-1] > self.T:
                bad("sample_times", f"must be sorted, unique and within [0, {self.T}]")
            object.__setattr__(self, "sample_times", st)

    @property
    def times(self) -> tuple:
        if self.sample_times is not None:
            return self.sample_times
        return log_sample_times(self.T, self.points_per_decade)

    @property
    def t_c(self) -> float:
        return coherence_time(self.hbar, self.kappa) if self.kappa > 0 else math.inf

    @property
    def W(self) -> float:
        return math.sqrt(3 * self.kappa)

    def waiting_time_distribution(self) -> WaitingTimeDistribution:
        if self.dist == "deterministic":
            return WaitingTimeDistribution.deterministic(self.tau0)
        if self.dist == "geometric":
            return WaitingTimeDistribution.geometric(self.p)
        return WaitingTimeDistribution.yule_simon(self.alpha)

    def basis_size(self) -> int:
        if self.M is not None:
            return int(self.M)
        return choose_basis_size(self.hbar, self.K, self.T, self.guard_fraction)

    def lattice(self) -> LatticeParams:
        return LatticeParams(self.basis_size(), self.hbar, self.K)

    def model(self) -> LocalizationModel:
        return LocalizationModel.from_dstar(self.D_star, self.hbar)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["sample_times"] is not None:
            d["sample_times"] = list(d["sample_times"])
        return d


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    ok: np.ndarray
    failures: dict
    config: ExperimentConfig
    M: int
    fitted: dict = field(default_factory=dict)

    @property
    def n_ok(self) -> int:
        return int(self.ok.sum())

    def value_at(self, t: int) -> tuple:
        i = int(np.searchsorted(self.times, t))
        if i >= self.times.size or self.times[i] != t:
            raise KeyError(f"t={t} is not a sample time")
        return float(self.mean[i]), float(self.stderr[i])


def _run_batch(config: ExperimentConfig, indices, M: int):
    """Propagate a batch; returns (series[n, len(times)], failure reasons by index)."""
    lattice = LatticeParams(M, config.hbar, config.K)
    prop = FloquetPropagator(lattice, config.precision)
    dist = config.waiting_time_distribution()
    times = np.asarray(config.times)
    T = config.T
    n = len(indices)
    kicks = np.empty((n, T))
    for row, idx in enumerate(indices):
        real = generate_realization(dist, T, config.K, config.kappa, realization_rng(config.base_seed, idx))
        kicks[row] = real.kick_strengths
    noiseless = config.kappa == 0

    psi = prop.initial(n)
    out = np.zeros((n, times.size))
    failed = {}
    alive = np.ones(n, dtype=bool)
    k = 0
    if times[0] == 0:
        k = 1
    for t in range(1, T + 1):
        psi = prop.step(psi, None if noiseless else kicks[:, t - 1])
        sample = k < times.size and times[k] == t
        if sample or t % config.check_every == 0 or t == T:
            leak = prop.leakage(psi, config.guard_fraction)
            finite = np.isfinite(leak)
            for row in np.flatnonzero(alive & ~finite):
                failed[indices[row]] = f"non-finite amplitudes at t={t}"
            for row in np.flatnonzero(alive & finite & (leak > config.leak_threshold)):
                failed[indices[row]] = f"leakage {leak[row]:.3g} > {config.leak_threshold:.3g} at t={t}"
            alive &= finite & (leak <= config.leak_threshold)
        if sample:
            out[:, k] = prop.variance(psi)
            k += 1
    return out, failed


def run_single_realization(config: ExperimentConfig, realization_index: int) -> np.ndarray:
    """``var p`` at ``config.times`` for one noise realization; raises on leakage or blowup."""
    out, failed = _run_batch(config, [int(realization_index)], config.basis_size())
    if failed:
        msg = failed[int(realization_index)]
        if msg.startswith("leakage"):
            raise LeakageError(msg)
        raise FloatingPointError(msg)
    return out[0]


def _batch_job(args):
    config, indices, M = args
    return _run_batch(config, indices, M)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_ensemble(config: ExperimentConfig, workers: int | None = None) -> EnsembleResult:
    """Mean and standard error of ``var p(t)`` over ``config.n_realizations`` noise realizations.

    Realizations that leak into the guard band are dropped and reported; more than
    10% dropped raises :class:`EnsembleError`.
    """
    M = config.basis_size()
    n = config.n_realizations
    bs = config.batch_size
    batches = [list(range(i, min(i + bs, n))) for i in range(0, n, bs)]
    jobs = [(config, b, M) for b in batches]
    workers = _workers() if workers is None else workers
    log.info("ensemble: n=%d T=%d M=%d batches=%d workers=%d", n, config.T, M, len(batches), workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]

    series = np.concatenate([r[0] for r in results], axis=0)
    failures = {}
    for r in results:
        failures.update(r[1])
    ok = np.ones(n, dtype=bool)
    ok[list(failures)] = False
    if ok.sum() == 0 or (n - ok.sum()) > MAX_FAILED_FRACTION * n:
        raise EnsembleError(f"{n - ok.sum()} of {n} realizations failed: {dict(list(failures.items())[:5])}")
    good = series[ok]
    # statistics about the first row: identical rows give exactly zero spread
    shifted = good - good[0]
    mean = good[0] + shifted.mean(axis=0)
    if good.shape[0] > 1:
        stderr = shifted.std(axis=0, ddof=1) / math.sqrt(good.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(np.asarray(config.times), mean, stderr, ok, failures, config, M)


def theory_for(config: ExperimentConfig, model: LocalizationModel | None = None,
               form: str = "double_sum", t_c: float | None = None) -> PredictionSeries:
    """Full renewal-noise prediction for the config's noise law and horizon.

    ``t_c`` overrides the coherence time implied by ``config.kappa``.
    """
    model = config.model() if model is None else model
    if config.kappa == 0 and t_c is None:
        v = var_p0_model(model, np.arange(config.T + 1))
        z = np.zeros_like(v)
        return PredictionSeries(v, v.copy(), z, z.copy(), {"form": "noiseless"})
    T = config.T + (1 if form == "integral" else 0)
    tables = renewal_tables(config.waiting_time_distribution(), config.t_c if t_c is None else t_c, T)
    return predict_variance_full(model, tables, config.kappa, config.T, form=form)


def fit_dstar(t, var, hbar: float = DEFAULT_HBAR) -> tuple:
    """Single-parameter fit of ``D* t* (1 - exp(-t/t*))`` with ``D* = hbar**2 t*``.

    Returns ``(D_star, t_star, rms_residual)``.  Raises :class:`FitError` when the
    fitted break time is not well inside the observed window (no saturation).
    """
    t = np.asarray(t, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    if t.size < 3:
        raise FitError("need at least 3 points")
    h2 = hbar * hbar

    def resid(ts):
        return h2 * ts * ts * -np.expm1(-t / ts) - var

    T = float(t.max())
    res = optimize.minimize_scalar(lambda ts: np.sum(resid(ts) ** 2), bounds=(1e-3, 10 * T),
                                   method="bounded", options={"xatol": 1e-10})
    t_star = float(res.x)
    if not res.success or t_star > T / 2:
        raise FitError(f"no saturation within t <= {T:g} (fitted t* = {t_star:.4g})")
    rms = float(np.sqrt(np.mean(resid(t_star) ** 2)))
    return h2 * t_star, t_star, rms


@dataclass
class ExponentFit:
    alpha: float
    ci: float
    intercept: float
    n_points: int

    @property
    def interval(self) -> tuple:
        return self.alpha - self.ci, self.alpha + self.ci


def fit_exponent(t, y, window, confidence: float = 0.95) -> ExponentFit:
    """OLS slope of ``log y`` against ``log t`` over ``window = (t_lo, t_hi)``.

    ``ci`` is the half-width of the ``confidence`` interval from the residual variance.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lo, hi = window
    if not (lo > 0 and hi / lo >= 10 * (1 - 1e-12)):
        raise ValueError(f"window {window} is narrower than one decade")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 3:
        raise ValueError(f"window {window} holds fewer than 3 points")
    if np.any(y[sel] <= 0):
        raise ValueError("non-positive values in fit window")
    x = np.log(t[sel])
    z = np.log(y[sel])
    fit = stats.linregress(x, z)
    dof = x.size - 2
    ci = float(stats.t.ppf(0.5 + confidence / 2, dof) * fit.stderr) if dof > 0 else math.inf
    return ExponentFit(float(fit.slope), ci, float(fit.intercept), int(x.size))


@dataclass
class ComparisonReport:
    t: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    median_deviation: float
    tolerance: float
    passed: bool

    def summary(self) -> dict:
        return {"n_points": int(self.t.size), "max_deviation": self.max_deviation,
                "median_deviation": self.median_deviation, "tolerance": self.tolerance,
                "passed": self.passed}


def _as_series(obj, times=None):
    if isinstance(obj, EnsembleResult):
        return np.asarray(obj.times), np.asarray(obj.mean)
    if isinstance(obj, PredictionSeries):
        if times is None:
            return obj.t, obj.var_p
        times = np.asarray(times)
        if times.max() > obj.T:
            raise ValueError(f"prediction horizon {obj.T} does not cover t={times.max()}")
        return times, obj.at(times)
    t, v = obj
    return np.asarray(t), np.asarray(v, dtype=np.float64)


def compare_theory_sim(ensemble, prediction, window=None, tolerance: float = 0.15,
                       max_tolerance: float | None = None) -> ComparisonReport:
    """Relative deviation ``|sim/theory - 1|`` per time; passes when the median is within
    ``tolerance`` (and the maximum within ``max_tolerance`` if given).

    ``ensemble`` and ``prediction`` are :class:`EnsembleResult` / :class:`PredictionSeries`
    objects or ``(t, values)`` pairs on identical grids.
    """
    t_sim, v_sim = _as_series(ensemble)
    t_pred, v_pred = _as_series(prediction, t_sim if isinstance(prediction, PredictionSeries) else None)
    if t_sim.shape != t_pred.shape or np.any(t_sim != t_pred):
        raise ValueError("simulation and prediction are on different time grids")
    sel = np.ones(t_sim.size, dtype=bool)
    if window is not None:
        sel = (t_sim >= window[0]) & (t_sim <= window[1])
    sel &= v_pred != 0
    dev = np.abs(v_sim[sel] / v_pred[sel] - 1.0)
    if dev.size == 0:
        raise ValueError("no comparable points in window")
    mx, med = float(dev.max()), float(np.median(dev))
    passed = med <= tolerance and (max_tolerance is None or mx <= max_tolerance)
    return ComparisonReport(t_sim[sel], dev, mx, med, tolerance, passed)
